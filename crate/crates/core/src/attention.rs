//! Attention maps and the full / attention / background feature streams.
//!
//! For each tap layer and mask channel `c` an attention map `att+` with
//! values in `[0, 1]` is produced; its complement `att- = 1 - att+` selects
//! the background. The attention stream is the feature matrix weighted
//! column-wise by `att+`, the background stream by `att-`.

use crate::error::{Error, Result};
use crate::net::{FeatureMap, FeaturePyramid, MaskPyramid, Tap};

/// Learned 1x1 attention unit for one tap layer.
///
/// `weights` has one entry per feature channel followed by one entry for the
/// mask value; the same unit is applied to every mask channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionUnit {
    pub weights: Vec<f64>,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum AttentionSubnet {
    /// `att+` is the downsampled mask itself.
    #[default]
    Passthrough,
    /// `att+ = sigmoid(w . [feature column, mask value] + b)`, one unit per tap layer.
    Learned(Vec<AttentionUnit>),
}

impl AttentionSubnet {
    pub fn learned(units: Vec<AttentionUnit>) -> Result<Self> {
        for (i, u) in units.iter().enumerate() {
            if u.weights.is_empty() {
                return Err(Error::ShapeMismatch(format!("attention unit {i} has no weights")));
            }
            if !u.bias.is_finite() || u.weights.iter().any(|w| !w.is_finite()) {
                return Err(Error::InvalidValue(format!(
                    "attention unit {i} has a non-finite parameter"
                )));
            }
        }
        Ok(AttentionSubnet::Learned(units))
    }

    pub fn is_passthrough(&self) -> bool {
        matches!(self, AttentionSubnet::Passthrough)
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `att+` per tap layer, stored as a map with one channel per mask channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionPyramid {
    pub taps: Vec<Tap>,
}

impl AttentionPyramid {
    pub fn positive(&self, tap: usize) -> &FeatureMap {
        &self.taps[tap].map
    }

    /// `att- = 1 - att+`.
    pub fn negative(&self, tap: usize) -> FeatureMap {
        let mut m = self.taps[tap].map.clone();
        for v in m.data_mut() {
            *v = 1.0 - *v;
        }
        m
    }

    pub fn mask_channels(&self) -> usize {
        self.taps.first().map_or(0, |t| t.map.channels())
    }
}

pub fn compute_attention(
    subnet: &AttentionSubnet,
    features: &FeaturePyramid,
    masks: &MaskPyramid,
) -> Result<AttentionPyramid> {
    if features.taps.len() != masks.taps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature taps but {} mask taps",
            features.taps.len(),
            masks.taps.len()
        )));
    }
    for (f, m) in features.taps.iter().zip(&masks.taps) {
        if f.layer != m.layer || f.map.height() != m.map.height() || f.map.width() != m.map.width() {
            return Err(Error::ShapeMismatch(format!(
                "layer {} features {} vs layer {} mask {}",
                f.layer,
                f.map.shape_str(),
                m.layer,
                m.map.shape_str()
            )));
        }
    }

    let taps = match subnet {
        AttentionSubnet::Passthrough => masks.taps.clone(),
        AttentionSubnet::Learned(units) => {
            if units.len() != features.taps.len() {
                return Err(Error::ShapeMismatch(format!(
                    "{} attention units for {} tap layers",
                    units.len(),
                    features.taps.len()
                )));
            }
            features
                .taps
                .iter()
                .zip(&masks.taps)
                .zip(units)
                .map(|((f, m), unit)| learned_map(unit, f, m))
                .collect::<Result<_>>()?
        }
    };
    Ok(AttentionPyramid { taps })
}

fn learned_map(unit: &AttentionUnit, features: &Tap, mask: &Tap) -> Result<Tap> {
    let n = features.map.channels();
    if unit.weights.len() != n + 1 {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: attention unit has input width {} but features have {n} channels plus 1 mask value",
            features.layer,
            unit.weights.len()
        )));
    }
    let m = features.map.plane_len();
    // w . f is shared by every mask channel.
    let mut feature_term = vec![unit.bias; m];
    for (k, &w) in unit.weights[..n].iter().enumerate() {
        for (acc, &f) in feature_term.iter_mut().zip(features.map.row(k)) {
            *acc += w * f;
        }
    }
    let w_mask = unit.weights[n];
    let mut out = FeatureMap::zeros_like(&mask.map);
    for c in 0..mask.map.channels() {
        let src = mask.map.row(c);
        for ((dst, &base), &mv) in out.row_mut(c).iter_mut().zip(&feature_term).zip(src) {
            *dst = sigmoid(base + w_mask * mv);
        }
    }
    Ok(Tap {
        layer: features.layer,
        map: out,
    })
}

/// Streams at one tap layer.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamLayer {
    pub layer: usize,
    pub full: FeatureMap,
    /// `att+` with one channel per mask channel.
    pub attention_map: FeatureMap,
    /// `full` weighted by `att+` of each mask channel.
    pub attention: Vec<FeatureMap>,
    /// `full` weighted by `att-` of each mask channel.
    pub background: Vec<FeatureMap>,
}

impl StreamLayer {
    pub fn mask_channels(&self) -> usize {
        self.attention.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSet {
    pub layers: Vec<StreamLayer>,
}

/// Scale every row of `f` elementwise by `weights` (length `M`).
pub fn weight_columns(f: &FeatureMap, weights: &[f64]) -> FeatureMap {
    let mut out = f.clone();
    for c in 0..f.channels() {
        for (v, &a) in out.row_mut(c).iter_mut().zip(weights) {
            *v *= a;
        }
    }
    out
}

pub fn build_streams(features: &FeaturePyramid, attn: &AttentionPyramid) -> Result<StreamSet> {
    if features.taps.len() != attn.taps.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} feature taps but {} attention taps",
            features.taps.len(),
            attn.taps.len()
        )));
    }
    let layers = features
        .taps
        .iter()
        .zip(&attn.taps)
        .map(|(f, a)| {
            if f.layer != a.layer || f.map.plane_len() != a.map.plane_len() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} features {} vs attention {}",
                    f.layer,
                    f.map.shape_str(),
                    a.map.shape_str()
                )));
            }
            let mut attention = Vec::with_capacity(a.map.channels());
            let mut background = Vec::with_capacity(a.map.channels());
            for c in 0..a.map.channels() {
                let pos = a.map.row(c);
                let neg: Vec<f64> = pos.iter().map(|v| 1.0 - v).collect();
                attention.push(weight_columns(&f.map, pos));
                background.push(weight_columns(&f.map, &neg));
            }
            Ok(StreamLayer {
                layer: f.layer,
                full: f.map.clone(),
                attention_map: a.map.clone(),
                attention,
                background,
            })
        })
        .collect::<Result<_>>()?;
    Ok(StreamSet { layers })
}
