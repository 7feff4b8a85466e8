//! Sequence-level complexity from per-frame features.

use serde::{Deserialize, Serialize};

use crate::gop::{FrameClass, LayerWeights};
use crate::{Error, Result};

/// Which pipeline produced a frame's temporal feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalVariant {
    Baseline,
    Me,
    MeRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameFeatures {
    pub poc: u64,
    pub class: FrameClass,
    /// Frame the temporal feature was measured against.
    pub reference: Option<u64>,
    /// Spatial feature, present for every frame.
    pub e: f64,
    /// Temporal feature; absent on intra frames.
    pub h: Option<f64>,
    pub h_variant: TemporalVariant,
    /// Mean attenuation factor, present when motion estimation ran.
    pub mu_mean: Option<f64>,
}

impl FrameFeatures {
    fn inter_h(&self) -> Result<f64> {
        self.h.ok_or(Error::MissingTemporal(self.poc))
    }
}

/// The four sums the layered complexity is linear in.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerSums {
    pub intra_e: f64,
    pub l0_h: f64,
    pub l1_h: f64,
    /// Layer 2 and deeper.
    pub l2_h: f64,
}

impl LayerSums {
    pub fn from_features(features: &[FrameFeatures]) -> Result<Self> {
        let mut sums = LayerSums::default();
        for f in features {
            match f.class {
                FrameClass::Intra => sums.intra_e += f.e,
                FrameClass::Inter { layer } => {
                    let h = f.inter_h()?;
                    match layer {
                        0 => sums.l0_h += h,
                        1 => sums.l1_h += h,
                        _ => sums.l2_h += h,
                    }
                }
            }
        }
        Ok(sums)
    }

    pub fn weighted(&self, w: &LayerWeights) -> f64 {
        w.w_l0 * self.l0_h + w.w_l1 * self.l1_h + w.w_l2 * self.l2_h + w.w_i * self.intra_e
    }
}

/// Sum of temporal features over inter frames plus spatial features over
/// intra frames.
pub fn complexity_baseline(features: &[FrameFeatures]) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::Empty("feature list"));
    }
    let mut inter = 0.0;
    let mut intra = 0.0;
    for f in features {
        match f.class {
            FrameClass::Intra => intra += f.e,
            FrameClass::Inter { .. } => inter += f.inter_h()?,
        }
    }
    Ok(inter + intra)
}

/// Per-layer weighted sums of temporal features plus the weighted intra
/// spatial sum.
pub fn complexity_layered(features: &[FrameFeatures], weights: &LayerWeights) -> Result<f64> {
    if features.is_empty() {
        return Err(Error::Empty("feature list"));
    }
    Ok(LayerSums::from_features(features)?.weighted(weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gop::GopStructure;

    fn intra(poc: u64, e: f64) -> FrameFeatures {
        FrameFeatures {
            poc,
            class: FrameClass::Intra,
            reference: None,
            e,
            h: None,
            h_variant: TemporalVariant::Baseline,
            mu_mean: None,
        }
    }

    fn inter(poc: u64, layer: u32, h: f64) -> FrameFeatures {
        FrameFeatures {
            poc,
            class: FrameClass::Inter { layer },
            reference: Some(poc - 1),
            e: 123.0,
            h: Some(h),
            h_variant: TemporalVariant::Baseline,
            mu_mean: None,
        }
    }

    #[test]
    fn baseline_examples() {
        assert_eq!(complexity_baseline(&[intra(0, 2.5)]).unwrap(), 2.5);
        let frames = [intra(0, 1.0), inter(1, 0, 0.5), inter(2, 0, 0.25)];
        assert_eq!(complexity_baseline(&frames).unwrap(), 1.75);
        assert!(complexity_baseline(&[]).is_err());
    }

    #[test]
    fn layered_examples() {
        let w = LayerWeights::default();
        assert!((complexity_layered(&[intra(0, 1.0)], &w).unwrap() - 0.11).abs() < 1e-15);

        let g = GopStructure::default();
        let frames: Vec<FrameFeatures> = (0..5)
            .map(|poc| match g.classify(poc) {
                FrameClass::Intra => intra(poc, 1.0),
                FrameClass::Inter { layer } => inter(poc, layer, 1.0),
            })
            .collect();
        let c = complexity_layered(&frames, &w).unwrap();
        assert!((c - 0.1511).abs() < 1e-12, "{c}");

        let frames = [intra(0, 1.0), inter(1, 0, 0.5), inter(2, 2, 0.25)];
        assert_eq!(
            complexity_layered(&frames, &LayerWeights::ONES).unwrap(),
            complexity_baseline(&frames).unwrap()
        );
    }

    #[test]
    fn inter_without_h_is_rejected() {
        let mut bad = inter(1, 0, 0.0);
        bad.h = None;
        let frames = [intra(0, 1.0), bad];
        assert!(matches!(
            complexity_baseline(&frames),
            Err(Error::MissingTemporal(1))
        ));
        assert!(matches!(
            complexity_layered(&frames, &LayerWeights::default()),
            Err(Error::MissingTemporal(1))
        ));
    }

    #[test]
    fn deep_layers_share_l2_weight() {
        let frames = [intra(0, 0.0), inter(1, 4, 2.0)];
        let w = LayerWeights::from_array([0.0, 0.0, 0.0, 3.0]);
        assert_eq!(complexity_layered(&frames, &w).unwrap(), 6.0);
    }
}
