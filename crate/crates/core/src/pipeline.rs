//! Per-clip analysis: energy maps per frame, temporal features per mode,
//! and the resulting complexity report.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::{complexity_baseline, complexity_layered, FrameFeatures, LayerSums, TemporalVariant};
use crate::energy::{spatial_feature, EnergyMap, TextureEnergy};
use crate::eval::measure_fps;
use crate::gop::{FrameClass, GopStructure};
use crate::motion::{AttenuationMap, MeParams, MotionSearch};
use crate::temporal::{sad_map, SadMap};
use crate::video_io::LumaPlane;
use crate::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 32;

/// Ablation modes: which of motion estimation, layer weighting and
/// structural references are applied on top of the baseline features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "vca")]
    Vca,
    #[serde(rename = "vca+me")]
    VcaMe,
    #[serde(rename = "vca+weights")]
    VcaWeights,
    #[serde(rename = "ivca")]
    Ivca,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Vca, Mode::VcaMe, Mode::VcaWeights, Mode::Ivca];

    pub fn uses_me(self) -> bool {
        matches!(self, Mode::VcaMe | Mode::Ivca)
    }

    pub fn uses_weights(self) -> bool {
        matches!(self, Mode::VcaWeights | Mode::Ivca)
    }

    pub fn uses_structural_reference(self) -> bool {
        self == Mode::Ivca
    }

    pub fn variant(self) -> TemporalVariant {
        match self {
            Mode::Vca | Mode::VcaWeights => TemporalVariant::Baseline,
            Mode::VcaMe => TemporalVariant::Me,
            Mode::Ivca => TemporalVariant::MeRef,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Vca => "vca",
            Mode::VcaMe => "vca+me",
            Mode::VcaWeights => "vca+weights",
            Mode::Ivca => "ivca",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown mode `{s}` (vca, vca+me, vca+weights, ivca)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyzerConfig {
    pub block_size: usize,
    pub mode: Mode,
    pub me: MeParams,
    pub gop: GopStructure,
}

impl Default for AnalyzerConfig {
    fn default() -> Self {
        AnalyzerConfig {
            block_size: DEFAULT_BLOCK_SIZE,
            mode: Mode::Ivca,
            me: MeParams::default(),
            gop: GopStructure::default(),
        }
    }
}

impl AnalyzerConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.me.validate()?;
        self.gop.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub frames: u64,
    pub seconds: f64,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub clip: String,
    pub mode: Mode,
    /// Complexity under this report's mode: layered when the mode weights
    /// layers, baseline otherwise.
    pub complexity: f64,
    pub c_baseline: f64,
    pub c_layered: f64,
    pub layer_sums: LayerSums,
    pub config: AnalyzerConfig,
    pub per_frame: Vec<FrameFeatures>,
    pub timing: Timing,
}

/// Per-frame maps kept for heatmap output.
#[derive(Debug, Clone)]
pub struct FrameDiagnostics {
    pub poc: u64,
    pub sad: SadMap,
    pub attenuation: Option<AttenuationMap>,
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: ComplexityReport,
    pub diagnostics: Vec<FrameDiagnostics>,
}

/// Streaming analyzer. Frames are pushed in display order; only their
/// energy maps are retained. Feature extraction time is accumulated inside
/// [`Analyzer::push`] and [`Analyzer::finish`] only.
pub struct Analyzer {
    clip: String,
    config: AnalyzerConfig,
    energy: TextureEnergy,
    maps: Vec<EnergyMap>,
    spatial: Vec<f64>,
    elapsed: Duration,
    diagnostics_every: Option<u64>,
}

impl Analyzer {
    pub fn new(clip: impl Into<String>, config: AnalyzerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Analyzer {
            clip: clip.into(),
            energy: TextureEnergy::new(config.block_size)?,
            config,
            maps: Vec::new(),
            spatial: Vec::new(),
            elapsed: Duration::ZERO,
            diagnostics_every: None,
        })
    }

    /// Keep SAD and attenuation maps of every `every`-th frame.
    pub fn keep_diagnostics(mut self, every: u64) -> Self {
        self.diagnostics_every = (every > 0).then_some(every);
        self
    }

    pub fn frames(&self) -> usize {
        self.maps.len()
    }

    pub fn push(&mut self, plane: &LumaPlane) -> Result<()> {
        let expected = self.maps.len() as u64;
        if plane.frame_index != expected {
            return Err(Error::InvalidSpec(format!(
                "frames must arrive in display order: expected {expected}, got {}",
                plane.frame_index
            )));
        }
        if let Some(first) = self.maps.first() {
            let grid = plane.partition(self.config.block_size)?.grid;
            if grid != first.grid {
                return Err(Error::GridMismatch {
                    left: first.grid.to_string(),
                    right: grid.to_string(),
                });
            }
        }
        let start = Instant::now();
        let map = self.energy.energy_map(plane)?;
        let e = spatial_feature(&map)?;
        self.elapsed += start.elapsed();
        self.maps.push(map);
        self.spatial.push(e);
        Ok(())
    }

    fn reference_of(&self, poc: u64) -> Result<u64> {
        if self.config.mode.uses_structural_reference() {
            self.config.gop.select_reference_within(poc, self.maps.len() as u64)
        } else {
            Ok(poc - 1)
        }
    }

    fn frame_features(&self, poc: u64) -> Result<(FrameFeatures, Option<FrameDiagnostics>)> {
        let idx = poc as usize;
        let class = self.config.gop.classify(poc);
        let mode = self.config.mode;
        let mut features = FrameFeatures {
            poc,
            class,
            reference: None,
            e: self.spatial[idx],
            h: None,
            h_variant: mode.variant(),
            mu_mean: None,
        };
        if class == FrameClass::Intra {
            return Ok((features, None));
        }
        let q = self.reference_of(poc)?;
        let (current, reference) = (&self.maps[idx], &self.maps[q as usize]);
        let sad = sad_map(current, reference)?;
        let norm = current.grid.padded_pixels() as f64;
        let (h, mu) = if mode.uses_me() {
            let mu = MotionSearch::new(current, reference, self.config.me)?.attenuation_map(poc, q)?;
            let total: f64 = sad.values.iter().zip(&mu.values).map(|(s, m)| s * m).sum();
            (total / norm, Some(mu))
        } else {
            (sad.normalised_sum(), None)
        };
        features.reference = Some(q);
        features.h = Some(h);
        features.mu_mean = mu.as_ref().map(AttenuationMap::mean);
        let keep = self.diagnostics_every.is_some_and(|every| poc.is_multiple_of(every));
        let diag = keep.then_some(FrameDiagnostics {
            poc,
            sad,
            attenuation: mu,
        });
        Ok((features, diag))
    }

    pub fn finish(self) -> Result<Analysis> {
        if self.maps.is_empty() {
            return Err(Error::Empty("clip has no frames"));
        }
        let start = Instant::now();
        let results: Vec<(FrameFeatures, Option<FrameDiagnostics>)> = (0..self.maps.len() as u64)
            .into_par_iter()
            .map(|poc| self.frame_features(poc))
            .collect::<Result<_>>()?;
        let (per_frame, diagnostics): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let c_baseline = complexity_baseline(&per_frame)?;
        let c_layered = complexity_layered(&per_frame, &self.config.gop.weights)?;
        let layer_sums = LayerSums::from_features(&per_frame)?;
        let elapsed = self.elapsed + start.elapsed();

        let frames = per_frame.len() as u64;
        let seconds = elapsed.as_secs_f64();
        let mode = self.config.mode;
        let report = ComplexityReport {
            clip: self.clip,
            mode,
            complexity: if mode.uses_weights() { c_layered } else { c_baseline },
            c_baseline,
            c_layered,
            layer_sums,
            config: self.config,
            per_frame,
            timing: Timing {
                frames,
                seconds,
                fps: measure_fps(frames, seconds),
            },
        };
        Ok(Analysis {
            report,
            diagnostics: diagnostics.into_iter().flatten().collect(),
        })
    }
}

/// Runs a whole frame stream through an [`Analyzer`].
pub fn analyze_frames<I>(clip: impl Into<String>, frames: I, config: AnalyzerConfig) -> Result<Analysis>
where
    I: IntoIterator<Item = Result<LumaPlane>>,
{
    let mut analyzer = Analyzer::new(clip, config)?;
    for plane in frames {
        analyzer.push(&plane?)?;
    }
    analyzer.finish()
}

impl ComplexityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = self.to_json()?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One row per frame, then a `#` footer line with the sequence totals.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(["poc", "kind", "layer", "reference", "e", "h", "mu_mean"])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for f in &self.per_frame {
            writer.write_record([
                f.poc.to_string(),
                if f.class.is_intra() { "I" } else { "P" }.to_string(),
                opt(f.class.layer().map(|l| l.to_string())),
                opt(f.reference.map(|q| q.to_string())),
                f.e.to_string(),
                opt(f.h.map(|h| h.to_string())),
                opt(f.mu_mean.map(|m| m.to_string())),
            ])?;
        }
        writer.flush()?;
        let mut out = writer.into_inner().map_err(|e| Error::Stream(e.into_error()))?;
        writeln!(
            out,
            "# c_baseline={},c_layered={},fps={}",
            self.c_baseline, self.c_layered, self.timing.fps
        )?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(std::io::BufWriter::new(file))
            .map_err(|e| match e {
                Error::Stream(source) => Error::io(path, source),
                other => other,
            })
    }
}
