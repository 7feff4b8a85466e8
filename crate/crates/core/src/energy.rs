//! DCT texture energy.
//!
//! Each `w x w` block is transformed with an orthonormal 2-D DCT-II and its
//! coefficients are summed with the exponential weight
//! `exp(|(i*j / w^2)^2 - 1|)`, DC term included. The spatial feature of a
//! frame is the sum of block energies normalised by the padded pixel count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::video_io::{BlockGrid, LumaPlane};
use crate::{Error, Result};

/// Precomputed separable DCT-II basis and energy weights for one block size.
#[derive(Debug, Clone)]
pub struct DctPlan {
    size: usize,
    /// `basis[u * w + x] = alpha(u) * cos(pi * (2x + 1) * u / 2w)`
    basis: Vec<f64>,
    weights: Vec<f64>,
}

impl DctPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size < 4 || !size.is_power_of_two() {
            return Err(Error::InvalidBlockSize(size));
        }
        let n = size as f64;
        let mut basis = vec![0.0; size * size];
        for u in 0..size {
            let alpha = if u == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            for x in 0..size {
                let angle = std::f64::consts::PI * (2 * x + 1) as f64 * u as f64 / (2.0 * n);
                basis[u * size + x] = alpha * angle.cos();
            }
        }
        let w2 = n * n;
        let mut weights = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                let r = (i * j) as f64 / w2;
                weights[i * size + j] = (r * r - 1.0).abs().exp();
            }
        }
        Ok(DctPlan {
            size,
            basis,
            weights,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Weight applied to coefficient `(i, j)`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.size + j]
    }

    /// Row-column DCT-II of a row-major tile. `scratch` and `out` must hold
    /// `w * w` values.
    pub fn forward_into(&self, tile: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        let w = self.size;
        assert_eq!(tile.len(), w * w, "tile must be {w}x{w}");
        // rows: scratch[y][u] = sum_x tile[y][x] * basis[u][x]
        for y in 0..w {
            let row = &tile[y * w..(y + 1) * w];
            for u in 0..w {
                let b = &self.basis[u * w..(u + 1) * w];
                scratch[y * w + u] = row.iter().zip(b).map(|(a, b)| a * b).sum();
            }
        }
        // columns: out[v][u] = sum_y basis[v][y] * scratch[y][u]
        out.fill(0.0);
        for v in 0..w {
            let b = &self.basis[v * w..(v + 1) * w];
            let dst = &mut out[v * w..(v + 1) * w];
            for (y, &coef) in b.iter().enumerate() {
                let src = &scratch[y * w..(y + 1) * w];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += coef * s;
                }
            }
        }
    }

    pub fn dct2d(&self, tile: &[f64]) -> Vec<f64> {
        let w = self.size;
        let mut scratch = vec![0.0; w * w];
        let mut out = vec![0.0; w * w];
        self.forward_into(tile, &mut scratch, &mut out);
        out
    }

    /// Weighted sum of absolute coefficients.
    pub fn weighted_energy(&self, coeffs: &[f64]) -> f64 {
        coeffs
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * c.abs())
            .sum()
    }

    pub fn block_energy(&self, tile: &[f64]) -> f64 {
        self.weighted_energy(&self.dct2d(tile))
    }
}

/// Orthonormal 2-D DCT-II of a square tile given in row-major order.
pub fn dct2d(tile: &[f64], size: usize) -> Result<Vec<f64>> {
    Ok(DctPlan::new(size)?.dct2d(tile))
}

/// Texture energy `H` of one square tile.
pub fn block_energy(tile: &[f64], size: usize) -> Result<f64> {
    Ok(DctPlan::new(size)?.block_energy(tile))
}

/// Per-block texture energies of one frame, raster order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyMap {
    pub frame_index: u64,
    pub grid: BlockGrid,
    pub values: Vec<f64>,
}

impl EnergyMap {
    pub fn new(frame_index: u64, grid: BlockGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.block_count() {
            return Err(Error::InvalidSpec(format!(
                "energy map has {} values for {}",
                values.len(),
                grid
            )));
        }
        Ok(EnergyMap {
            frame_index,
            grid,
            values,
        })
    }

    pub fn block_count(&self) -> usize {
        self.values.len()
    }

    pub(crate) fn check_same_grid(&self, other: &EnergyMap) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.to_string(),
                right: other.grid.to_string(),
            });
        }
        Ok(())
    }
}

/// Reusable energy extractor for a fixed block size.
#[derive(Debug, Clone)]
pub struct TextureEnergy {
    plan: DctPlan,
}

impl TextureEnergy {
    pub fn new(block_size: usize) -> Result<Self> {
        Ok(TextureEnergy {
            plan: DctPlan::new(block_size)?,
        })
    }

    pub fn block_size(&self) -> usize {
        self.plan.size()
    }

    pub fn plan(&self) -> &DctPlan {
        &self.plan
    }

    pub fn energy_map(&self, plane: &LumaPlane) -> Result<EnergyMap> {
        let part = plane.partition(self.plan.size())?;
        let w = self.plan.size();
        let values = (0..part.grid.block_count())
            .into_par_iter()
            .map_init(
                || (vec![0.0; w * w], vec![0.0; w * w], vec![0.0; w * w]),
                |(tile, scratch, coeffs), k| {
                    part.tile_into(k, tile);
                    self.plan.forward_into(tile, scratch, coeffs);
                    self.plan.weighted_energy(coeffs)
                },
            )
            .collect();
        EnergyMap::new(plane.frame_index, part.grid, values)
    }
}

pub fn energy_map(plane: &LumaPlane, block_size: usize) -> Result<EnergyMap> {
    TextureEnergy::new(block_size)?.energy_map(plane)
}

/// Spatial feature `E`: block energies summed and divided by `B * w^2`.
pub fn spatial_feature(map: &EnergyMap) -> Result<f64> {
    if map.values.is_empty() {
        return Err(Error::Empty("energy map"));
    }
    let total: f64 = map.values.iter().sum();
    Ok(total / map.grid.padded_pixels() as f64)
}
