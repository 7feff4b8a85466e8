//! Temporal features from block-wise absolute differences of energy maps.

use serde::{Deserialize, Serialize};

use crate::energy::EnergyMap;
use crate::video_io::BlockGrid;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SadMap {
    pub frame_index: u64,
    pub reference_index: u64,
    pub grid: BlockGrid,
    pub values: Vec<f64>,
}

impl SadMap {
    /// Sum of the map normalised by `B * w^2`.
    pub fn normalised_sum(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.grid.padded_pixels() as f64
    }
}

pub fn sad_map(current: &EnergyMap, reference: &EnergyMap) -> Result<SadMap> {
    current.check_same_grid(reference)?;
    let values = current
        .values
        .iter()
        .zip(&reference.values)
        .map(|(a, b)| (a - b).abs())
        .collect();
    Ok(SadMap {
        frame_index: current.frame_index,
        reference_index: reference.frame_index,
        grid: current.grid,
        values,
    })
}

/// Temporal feature `h` of `current` against `reference`. Serves both the
/// previous-frame and the structural-reference variants.
pub fn temporal_feature(current: &EnergyMap, reference: &EnergyMap) -> Result<f64> {
    Ok(sad_map(current, reference)?.normalised_sum())
}
