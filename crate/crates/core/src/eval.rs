//! Evaluation against encoder bitrates: Pearson correlation, least-squares
//! fit and grid-search calibration of the layer weights.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::LayerSums;
use crate::gop::LayerWeights;
use crate::{Error, Result};

/// Correlations closer than this count as ties during calibration.
pub const PCC_TIE_EPS: f64 = 1e-12;

/// One clip's measured bitrate. Units only need to be uniform per dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitrateRecord {
    pub clip: String,
    pub bitrate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

/// Reads a `clip,bitrate` CSV (an optional `source` column is kept).
pub fn read_bitrates(path: impl AsRef<Path>) -> Result<Vec<BitrateRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut out = Vec::new();
    for row in reader.deserialize() {
        let record: BitrateRecord = row?;
        if !(record.bitrate > 0.0 && record.bitrate.is_finite()) {
            return Err(Error::InvalidBitrate {
                clip: record.clip,
                bitrate: record.bitrate,
            });
        }
        out.push(record);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pcc: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

struct Moments {
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

fn moments(xs: &[f64], ys: &[f64]) -> Result<Moments> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mean_x, y - mean_y);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok(Moments {
        mean_x,
        mean_y,
        sxx,
        syy,
        sxy,
    })
}

/// Sample Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let m = moments(xs, ys)?;
    Ok((m.sxy / (m.sxx.sqrt() * m.syy.sqrt())).clamp(-1.0, 1.0))
}

/// Least-squares `(slope, intercept)` of `ys` on `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let m = moments(xs, ys)?;
    let slope = m.sxy / m.sxx;
    Ok((slope, m.mean_y - slope * m.mean_x))
}

pub fn correlate(xs: &[f64], ys: &[f64]) -> Result<CorrelationResult> {
    let pcc = pearson(xs, ys)?;
    let (slope, intercept) = linear_fit(xs, ys)?;
    Ok(CorrelationResult {
        pcc,
        slope,
        intercept,
        n: xs.len(),
    })
}

/// Candidate values per weight, in `(w_i, w_l0, w_l1, w_l2)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightGrid {
    axes: [Vec<f64>; 4],
}

pub const DEFAULT_GRID_AXIS: [f64; 10] = [0.0, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.04, 0.11, 0.5, 1.0];

impl Default for WeightGrid {
    fn default() -> Self {
        let axis = DEFAULT_GRID_AXIS.to_vec();
        WeightGrid {
            axes: [axis.clone(), axis.clone(), axis.clone(), axis],
        }
    }
}

impl WeightGrid {
    /// Axes are sorted and deduplicated so enumeration order is
    /// lexicographic in the weight values.
    pub fn new(axes: [Vec<f64>; 4]) -> Result<Self> {
        let names = ["w_i", "w_l0", "w_l1", "w_l2"];
        let mut axes = axes;
        for (axis, name) in axes.iter_mut().zip(names) {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("axis {name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {name} must hold finite non-negative values"
                )));
            }
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        Ok(WeightGrid { axes })
    }

    /// Same candidate values on every axis.
    pub fn uniform(axis: Vec<f64>) -> Result<Self> {
        WeightGrid::new([axis.clone(), axis.clone(), axis.clone(), axis])
    }

    pub fn axes(&self) -> &[Vec<f64>; 4] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `index`-th tuple in lexicographic order.
    pub fn tuple(&self, index: usize) -> LayerWeights {
        let mut rest = index;
        let mut out = [0.0; 4];
        for d in (0..4).rev() {
            let n = self.axes[d].len();
            out[d] = self.axes[d][rest % n];
            rest /= n;
        }
        LayerWeights::from_array(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = LayerWeights> + '_ {
        (0..self.len()).map(|i| self.tuple(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub weights: LayerWeights,
    pub pcc: f64,
    pub evaluated: usize,
    pub degenerate: usize,
}

/// Correlation of the layered complexity under `weights` with `bitrates`;
/// `None` when every clip gets the same complexity.
pub fn weighted_pcc(components: &[LayerSums], bitrates: &[f64], weights: &LayerWeights) -> Result<Option<f64>> {
    let cs: Vec<f64> = components.iter().map(|c| c.weighted(weights)).collect();
    match pearson(&cs, bitrates) {
        Ok(p) => Ok(Some(p)),
        Err(Error::ConstantSeries) if cs.windows(2).all(|w| w[0] == w[1]) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Exhaustive grid search for the weights maximising the correlation between
/// layered complexity and bitrate. Ties within [`PCC_TIE_EPS`] go to the
/// lexicographically smallest tuple.
pub fn calibrate_weights(components: &[LayerSums], bitrates: &[f64], grid: &WeightGrid) -> Result<Calibration> {
    if components.len() != bitrates.len() {
        return Err(Error::LengthMismatch(components.len(), bitrates.len()));
    }
    if components.len() < 2 {
        return Err(Error::TooFewSamples(components.len()));
    }
    if grid.is_empty() {
        return Err(Error::InvalidGrid("grid has no tuples".into()));
    }
    let scores: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| weighted_pcc(components, bitrates, &grid.tuple(i)))
        .collect::<Result<_>>()?;

    let mut best: Option<(usize, f64)> = None;
    let mut degenerate = 0;
    for (i, score) in scores.iter().enumerate() {
        match (*score, best) {
            (None, _) => degenerate += 1,
            (Some(p), None) => best = Some((i, p)),
            (Some(p), Some((_, b))) if p > b + PCC_TIE_EPS => best = Some((i, p)),
            _ => {}
        }
    }
    let (index, pcc) = best.ok_or(Error::DegenerateGrid)?;
    let weights = grid.tuple(index);
    debug_assert!(
        weighted_pcc(components, bitrates, &weights.scaled(2.0))?
            .is_some_and(|p| (p - pcc).abs() < 1e-9),
        "pcc must be invariant to scaling all weights"
    );
    Ok(Calibration {
        weights,
        pcc,
        evaluated: grid.len(),
        degenerate,
    })
}

/// Frames per second over an analysis phase.
pub fn measure_fps(frames: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        frames as f64 / seconds
    } else {
        f64::INFINITY
    }
}
