//! Feature-domain motion estimation.
//!
//! Motion is searched on the energy map rather than on pixels. For block `k`
//! a window of `N` energies along one axis is compared by cosine similarity
//! with reference windows displaced by `j` blocks, `|j| <= search_range`.
//! The best horizontal and vertical similarities give a per-block
//! attenuation factor `mu` that scales the block's absolute energy
//! difference, so translations the encoder can predict cheaply stop counting
//! as temporal complexity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::EnergyMap;
use crate::video_io::BlockGrid;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeParams {
    /// Window length `N` in blocks; even, at least 2.
    pub window: usize,
    /// Largest candidate offset in blocks.
    pub search_range: usize,
    /// Compare similarities on 16-bit quantized energies via their squares.
    pub quantize: bool,
}

impl Default for MeParams {
    fn default() -> Self {
        MeParams {
            window: 8,
            search_range: 4,
            quantize: false,
        }
    }
}

impl MeParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(Error::InvalidMeParams(format!(
                "window must be even and >= 2, got {}",
                self.window
            )));
        }
        if self.search_range < 1 {
            return Err(Error::InvalidMeParams("search range must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// Best similarity for one block along one axis. `offset` is `None` when no
/// candidate window fit inside the block's row or column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub offset: Option<i64>,
}

impl Similarity {
    const NONE: Similarity = Similarity {
        value: 0.0,
        offset: None,
    };
}

/// Per-block attenuation factors with the similarities they came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationMap {
    pub frame_index: u64,
    pub reference_index: u64,
    pub values: Vec<f64>,
    /// `(s_hor, s_ver)` per block.
    pub similarities: Vec<(f64, f64)>,
}

impl AttenuationMap {
    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 1.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Piecewise attenuation: `1 - (s_hor + s_ver)` while the sum stays within 1,
/// otherwise `1 - max(s_hor, s_ver)`.
pub fn attenuation(s_hor: f64, s_ver: f64) -> Result<f64> {
    let in_unit = |s: f64| (0.0..=1.0).contains(&s);
    if !in_unit(s_hor) || !in_unit(s_ver) {
        return Err(Error::SimilarityRange { s_hor, s_ver });
    }
    let sum = s_hor + s_ver;
    Ok(if sum <= 1.0 {
        1.0 - sum
    } else {
        1.0 - s_hor.max(s_ver)
    })
}

/// Energies prepared for one search, exact or quantized.
enum Samples<'a> {
    Exact { cur: &'a [f64], refr: &'a [f64] },
    Quantized { cur: Vec<u16>, refr: Vec<u16> },
}

/// One current/reference map pair prepared for per-block searches.
pub struct MotionSearch<'a> {
    grid: BlockGrid,
    params: MeParams,
    samples: Samples<'a>,
}

fn quantize(values: &[f64]) -> Vec<u16> {
    let max = values.iter().copied().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return vec![0; values.len()];
    }
    let scale = u16::MAX as f64 / max;
    values
        .iter()
        .map(|&v| (v * scale).round().clamp(0.0, u16::MAX as f64) as u16)
        .collect()
}

impl<'a> MotionSearch<'a> {
    pub fn new(current: &'a EnergyMap, reference: &'a EnergyMap, params: MeParams) -> Result<Self> {
        params.validate()?;
        current.check_same_grid(reference)?;
        let samples = if params.quantize {
            Samples::Quantized {
                cur: quantize(&current.values),
                refr: quantize(&reference.values),
            }
        } else {
            Samples::Exact {
                cur: &current.values,
                refr: &reference.values,
            }
        };
        Ok(MotionSearch {
            grid: current.grid,
            params,
            samples,
        })
    }

    pub fn similarity(&self, k: usize, axis: Axis) -> Result<Similarity> {
        let count = self.grid.block_count();
        if k >= count {
            return Err(Error::BlockIndex { index: k, count });
        }
        let (col, row) = self.grid.position(k);
        let (pos, len, stride) = match axis {
            Axis::Horizontal => (col as i64, self.grid.blocks_per_row as i64, 1i64),
            Axis::Vertical => (row as i64, self.grid.blocks_per_col as i64, self.grid.blocks_per_row as i64),
        };
        let half = (self.params.window / 2) as i64;
        // window covers line positions pos - half + 1 ..= pos + half
        let (lo, hi) = (pos - half + 1, pos + half);
        if lo < 0 || hi >= len {
            return Ok(Similarity::NONE);
        }
        let base = k as i64 - pos * stride;
        let range = self.params.search_range as i64;

        let mut best = Similarity::NONE;
        let mut best_key = f64::NEG_INFINITY;
        // scan 0, -1, +1, -2, +2, ... so ties resolve toward small offsets
        for step in 0..=2 * range {
            let j = if step % 2 == 1 { -(step + 1) / 2 } else { step / 2 };
            if lo + j < 0 || hi + j >= len {
                continue;
            }
            let key = self.candidate(base, lo, stride, j);
            if key > best_key {
                best_key = key;
                best.offset = Some(j);
            }
        }
        if best.offset.is_some() {
            best.value = match self.samples {
                Samples::Exact { .. } => best_key,
                Samples::Quantized { .. } => best_key.sqrt(),
            }
            .clamp(0.0, 1.0);
        }
        Ok(best)
    }

    /// Cosine similarity (exact path) or squared cosine (quantized path)
    /// between the current window starting at line position `lo` and the
    /// reference window displaced by `j`.
    fn candidate(&self, base: i64, lo: i64, stride: i64, j: i64) -> f64 {
        let n = self.params.window as i64;
        let cur_at = |i: i64| (base + (lo + i) * stride) as usize;
        let ref_at = |i: i64| (base + (lo + i + j) * stride) as usize;
        match &self.samples {
            Samples::Exact { cur, refr } => {
                let (mut dot, mut nc, mut nr) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let (a, b) = (cur[cur_at(i)], refr[ref_at(i)]);
                    dot += a * b;
                    nc += a * a;
                    nr += b * b;
                }
                match (nc == 0.0, nr == 0.0) {
                    (true, true) => 1.0,
                    (true, false) | (false, true) => 0.0,
                    _ => dot / (nc.sqrt() * nr.sqrt()),
                }
            }
            Samples::Quantized { cur, refr } => {
                let (mut dot, mut nc, mut nr) = (0u64, 0u64, 0u64);
                for i in 0..n {
                    let (a, b) = (cur[cur_at(i)] as u64, refr[ref_at(i)] as u64);
                    dot += a * b;
                    nc += a * a;
                    nr += b * b;
                }
                match (nc == 0, nr == 0) {
                    (true, true) => 1.0,
                    (true, false) | (false, true) => 0.0,
                    _ => {
                        let d = dot as f64;
                        d * d / (nc as f64 * nr as f64)
                    }
                }
            }
        }
    }

    pub fn attenuation_map(&self, frame_index: u64, reference_index: u64) -> Result<AttenuationMap> {
        let per_block: Vec<(f64, (f64, f64))> = (0..self.grid.block_count())
            .into_par_iter()
            .map(|k| {
                let s_hor = self.similarity(k, Axis::Horizontal)?.value;
                let s_ver = self.similarity(k, Axis::Vertical)?.value;
                Ok((attenuation(s_hor, s_ver)?, (s_hor, s_ver)))
            })
            .collect::<Result<_>>()?;
        let (values, similarities) = per_block.into_iter().unzip();
        Ok(AttenuationMap {
            frame_index,
            reference_index,
            values,
            similarities,
        })
    }
}

pub fn horiz_similarity(current: &EnergyMap, reference: &EnergyMap, k: usize, params: MeParams) -> Result<f64> {
    Ok(MotionSearch::new(current, reference, params)?
        .similarity(k, Axis::Horizontal)?
        .value)
}

pub fn vert_similarity(current: &EnergyMap, reference: &EnergyMap, k: usize, params: MeParams) -> Result<f64> {
    Ok(MotionSearch::new(current, reference, params)?
        .similarity(k, Axis::Vertical)?
        .value)
}

/// Temporal feature with every block's absolute energy difference scaled by
/// its attenuation factor. Returns the factors for diagnostics.
pub fn attenuated_temporal_feature(
    current: &EnergyMap,
    reference: &EnergyMap,
    params: MeParams,
) -> Result<(f64, AttenuationMap)> {
    let search = MotionSearch::new(current, reference, params)?;
    let mu = search.attenuation_map(current.frame_index, reference.frame_index)?;
    let total: f64 = current
        .values
        .iter()
        .zip(&reference.values)
        .zip(&mu.values)
        .map(|((a, b), m)| m * (a - b).abs())
        .sum();
    Ok((total / current.grid.padded_pixels() as f64, mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::temporal_feature;

    fn grid(cols: usize, rows: usize) -> BlockGrid {
        BlockGrid::new(cols * 32, rows * 32, 32).unwrap()
    }

    fn map(g: BlockGrid, values: Vec<f64>) -> EnergyMap {
        EnergyMap::new(0, g, values).unwrap()
    }

    /// Exhaustive horizontal search written straight from the window formula.
    fn oracle_hor(cur: &[f64], refr: &[f64], cols: usize, k: usize, n: usize, r: i64) -> Option<(f64, i64)> {
        let row = k / cols;
        let in_row = |idx: i64| idx >= (row * cols) as i64 && idx < ((row + 1) * cols) as i64;
        let mut best: Option<(f64, i64)> = None;
        for j in -r..=r {
            let mut idx = Vec::new();
            for i in 0..n as i64 {
                idx.push((k as i64 + n as i64 / 2 - i, k as i64 + n as i64 / 2 - i + j));
            }
            if !idx.iter().all(|&(a, b)| in_row(a) && in_row(b)) {
                continue;
            }
            let dot: f64 = idx.iter().map(|&(a, b)| cur[a as usize] * refr[b as usize]).sum();
            let na: f64 = idx.iter().map(|&(a, _)| cur[a as usize].powi(2)).sum::<f64>().sqrt();
            let nb: f64 = idx.iter().map(|&(_, b)| refr[b as usize].powi(2)).sum::<f64>().sqrt();
            let s = dot / (na * nb);
            if best.is_none_or(|(v, _)| s > v) {
                best = Some((s, j));
            }
        }
        best
    }

    #[test]
    fn attenuation_examples() {
        assert_eq!(attenuation(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(attenuation(1.0, 1.0).unwrap(), 0.0);
        assert!((attenuation(0.4, 0.4).unwrap() - 0.2).abs() < 1e-12);
        assert!((attenuation(0.8, 0.6).unwrap() - 0.2).abs() < 1e-12);
        assert!(attenuation(1.01, 0.0).is_err());
        assert!(attenuation(0.5, -0.1).is_err());
        assert!(attenuation(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn self_similarity() {
        let g = grid(12, 12);
        let values: Vec<f64> = (0..144).map(|i| ((i * 37) % 17) as f64 + 1.0).collect();
        let m = map(g, values);
        let p = MeParams::default();
        // block at column 6, row 6 has room for the window on both axes
        let k = 6 * 12 + 6;
        assert!((horiz_similarity(&m, &m, k, p).unwrap() - 1.0).abs() < 1e-12);
        assert!((vert_similarity(&m, &m, k, p).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn horizontal_shift_found() {
        let cols = 16;
        let g = grid(cols, 1);
        let row: Vec<f64> = (0..cols).map(|i| ((i * 7919) % 101) as f64 + 3.0).collect();
        // content moved right by two blocks: cur[c] = ref[c - 2]
        let reference: Vec<f64> = (0..cols).map(|c| row[(c + 2) % cols]).collect();
        let (cur, refr) = (map(g, row.clone()), map(g, reference.clone()));
        let p = MeParams::default();
        let search = MotionSearch::new(&cur, &refr, p).unwrap();
        for k in 0..cols {
            let got = search.similarity(k, Axis::Horizontal).unwrap();
            let want = oracle_hor(&row, &reference, cols, k, p.window, p.search_range as i64);
            match want {
                None => assert_eq!(got.offset, None, "k={k}"),
                Some((v, _)) => assert!((got.value - v.min(1.0)).abs() < 1e-12, "k={k}"),
            }
            if (5..=11).contains(&k) {
                assert!((got.value - 1.0).abs() < 1e-12, "k={k}");
                assert_eq!(got.offset, Some(-2));
            }
        }
    }

    #[test]
    fn vertical_shift_found() {
        let (cols, rows) = (3, 12);
        let g = grid(cols, rows);
        let f = |c: usize, r: usize| ((c * 31 + r * r * 17) % 23) as f64 + 1.0;
        let cur: Vec<f64> = (0..rows).flat_map(|r| (0..cols).map(move |c| f(c, r))).collect();
        let refr: Vec<f64> = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| f(c, (r + rows - 1) % rows)))
            .collect();
        let p = MeParams::default();
        let k = 6 * cols + 1;
        let s = vert_similarity(&map(g, cur), &map(g, refr), k, p).unwrap();
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn boundary_conventions() {
        let p = MeParams::default();
        let g = grid(16, 1);
        let m = map(g, vec![2.0; 16]);
        // a single block row cannot hold a vertical window
        assert_eq!(vert_similarity(&m, &m, 8, p).unwrap(), 0.0);
        // the window around column 0 leaves the row
        assert_eq!(horiz_similarity(&m, &m, 0, p).unwrap(), 0.0);
        let zero = map(g, vec![0.0; 16]);
        assert_eq!(horiz_similarity(&zero, &zero, 8, p).unwrap(), 1.0);
        assert_eq!(horiz_similarity(&m, &zero, 8, p).unwrap(), 0.0);
        assert!(matches!(
            horiz_similarity(&m, &m, 16, p),
            Err(Error::BlockIndex { .. })
        ));
    }

    #[test]
    fn params_validated() {
        let m = map(grid(16, 1), vec![1.0; 16]);
        for bad in [
            MeParams { window: 3, ..MeParams::default() },
            MeParams { window: 0, ..MeParams::default() },
            MeParams { search_range: 0, ..MeParams::default() },
        ] {
            assert!(horiz_similarity(&m, &m, 8, bad).is_err());
        }
    }

    #[test]
    fn unit_attenuation_reduces_to_plain_sad() {
        // a grid too small for any window gives S = 0 and mu = 1 everywhere
        let g = grid(3, 3);
        let a = map(g, (0..9).map(|i| i as f64 * 3.0).collect());
        let b = map(g, (0..9).map(|i| 40.0 - i as f64).collect());
        let (h, mu) = attenuated_temporal_feature(&a, &b, MeParams::default()).unwrap();
        assert!(mu.values.iter().all(|&m| m == 1.0));
        assert_eq!(h, temporal_feature(&a, &b).unwrap());
    }

    #[test]
    fn identical_frames_have_no_temporal_cost() {
        let g = grid(12, 12);
        let m = map(g, (0..144).map(|i| (i % 13) as f64).collect());
        let (h, _) = attenuated_temporal_feature(&m, &m, MeParams::default()).unwrap();
        assert_eq!(h, 0.0);
    }
}
