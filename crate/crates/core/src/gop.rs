//! Hierarchical GOP model: frame classes, layers and reference selection.
//!
//! The default structure mirrors x264's pyramid: GOP of 4, three layers and
//! an intra period of 250. Within a GOP the anchor (offset 0) is layer 0,
//! the midpoint layer 1 and the odd offsets layer 2. Classification is pure
//! arithmetic on the display index.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub w_i: f64,
    pub w_l0: f64,
    pub w_l1: f64,
    pub w_l2: f64,
}

impl Default for LayerWeights {
    fn default() -> Self {
        LayerWeights {
            w_i: 0.11,
            w_l0: 0.04,
            w_l1: 0.0001,
            w_l2: 0.0005,
        }
    }
}

impl LayerWeights {
    pub const ONES: LayerWeights = LayerWeights {
        w_i: 1.0,
        w_l0: 1.0,
        w_l1: 1.0,
        w_l2: 1.0,
    };

    pub fn from_array([w_i, w_l0, w_l1, w_l2]: [f64; 4]) -> Self {
        LayerWeights { w_i, w_l0, w_l1, w_l2 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w_i, self.w_l0, self.w_l1, self.w_l2]
    }

    pub fn scaled(self, factor: f64) -> Self {
        LayerWeights::from_array(self.to_array().map(|w| w * factor))
    }

    /// Weight of an inter frame on `layer`; layers past 2 share `w_l2`.
    pub fn layer(&self, layer: u32) -> f64 {
        match layer {
            0 => self.w_l0,
            1 => self.w_l1,
            _ => self.w_l2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidGop(format!(
                "weights must be finite and non-negative, got {:?}",
                self.to_array()
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for LayerWeights {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{},{}", self.w_i, self.w_l0, self.w_l1, self.w_l2)
    }
}

impl std::str::FromStr for LayerWeights {
    type Err = Error;

    /// Parses `wI,wL0,wL1,wL2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidGop(format!("bad weights `{s}`: {e}")))?;
        let arr: [f64; 4] = parts
            .try_into()
            .map_err(|_| Error::InvalidGop(format!("expected 4 comma-separated weights, got `{s}`")))?;
        let weights = LayerWeights::from_array(arr);
        weights.validate()?;
        Ok(weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GopStructure {
    pub gop_size: u64,
    /// Distance between intra frames; 0 means only frame 0 is intra.
    pub intra_period: u64,
    pub layer_count: u32,
    pub weights: LayerWeights,
}

impl Default for GopStructure {
    fn default() -> Self {
        GopStructure {
            gop_size: 4,
            intra_period: 250,
            layer_count: 3,
            weights: LayerWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FrameClass {
    Intra,
    Inter { layer: u32 },
}

impl FrameClass {
    pub fn is_intra(&self) -> bool {
        matches!(self, FrameClass::Intra)
    }

    pub fn layer(&self) -> Option<u32> {
        match self {
            FrameClass::Intra => None,
            FrameClass::Inter { layer } => Some(*layer),
        }
    }
}

impl std::fmt::Display for FrameClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FrameClass::Intra => f.write_str("I"),
            FrameClass::Inter { layer } => write!(f, "L{layer}"),
        }
    }
}

impl GopStructure {
    pub fn validate(&self) -> Result<()> {
        if self.gop_size < 2 || !self.gop_size.is_power_of_two() {
            return Err(Error::InvalidGop(format!(
                "gop size must be a power of two >= 2, got {}",
                self.gop_size
            )));
        }
        if self.layer_count == 0 {
            return Err(Error::InvalidGop("layer count must be >= 1".into()));
        }
        self.weights.validate()
    }

    /// Display index of the intra frame that opens the period holding `poc`.
    pub fn period_start(&self, poc: u64) -> u64 {
        if self.intra_period == 0 {
            0
        } else {
            poc - poc % self.intra_period
        }
    }

    pub fn classify(&self, poc: u64) -> FrameClass {
        let start = self.period_start(poc);
        if poc == start {
            return FrameClass::Intra;
        }
        let offset = (poc - start) % self.gop_size;
        if offset == 0 {
            return FrameClass::Inter { layer: 0 };
        }
        let depth = self.gop_size.trailing_zeros() - offset.trailing_zeros();
        FrameClass::Inter {
            layer: depth.min(self.layer_count - 1),
        }
    }

    /// Reference of an inter frame in an unbounded sequence.
    pub fn select_reference(&self, poc: u64) -> Result<u64> {
        self.select_reference_within(poc, u64::MAX)
    }

    /// Reference of an inter frame when only `frame_count` frames exist;
    /// future candidates past the end are skipped.
    ///
    /// Layer-0 frames take the closest earlier intra or layer-0 frame. Higher
    /// layers take the closest intra or strictly lower-layer frame within
    /// `[0, poc + gop_size]`, preferring the past on equal distance.
    pub fn select_reference_within(&self, poc: u64, frame_count: u64) -> Result<u64> {
        let layer = match self.classify(poc) {
            FrameClass::Intra => return Err(Error::IntraHasNoReference(poc)),
            FrameClass::Inter { layer } => layer,
        };
        let eligible = |q: u64| match self.classify(q) {
            FrameClass::Intra => true,
            FrameClass::Inter { layer: l } => l < layer || (layer == 0 && l == 0),
        };
        if layer == 0 {
            return Ok((0..poc)
                .rev()
                .find(|&q| eligible(q))
                .expect("frame 0 is always intra"));
        }
        let horizon = poc.saturating_add(self.gop_size).min(frame_count.saturating_sub(1));
        for d in 1..=poc {
            if eligible(poc - d) {
                return Ok(poc - d);
            }
            let future = poc + d;
            if future <= horizon && eligible(future) {
                return Ok(future);
            }
        }
        unreachable!("frame 0 is always intra")
    }
}
