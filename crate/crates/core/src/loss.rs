//! Region-level content and style losses and the combined objective.
//!
//! Per tap layer `l` with `N` filters and `M` positions, and per mask
//! channel `c`:
//!
//! * global content: `sum_c 1/(2NM) |F[O] - F[I]|^2`
//! * local content: `sum_c 1/(2NM) |(F[O] - F[I]) * att+_c[I]|^2`
//! * global style: `sum_c |Gb[O]/(2 N M_O) - Gb[S]/(2 N M_S)|^2` with
//!   `Gb` the Gram of features weighted by `att-` (of `I` for the output,
//!   of `S` for the style image)
//! * local style: same with `att+`
//!
//! The objective is
//! `sum_l alpha_l (lg gc + ll lc) + sum_l beta_l (lg gs + ll ls) + theta * tv`,
//! where `alpha_l` is nonzero on content layers and `beta_l`
//! on style layers.

use std::fmt::Write as _;

use crate::attention::{
    build_streams, compute_attention, weight_columns, AttentionPyramid, AttentionSubnet, StreamLayer,
    StreamSet,
};
use crate::error::{Error, Result};
use crate::image_io::{ImagePlane, RgbMaskPair};
use crate::net::{image_to_features, FeatureMap, NetworkSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct LossWeights {
    /// Weight of the global (full / background) terms.
    pub lambda_global: f64,
    /// Weight of the local (attention-region) terms.
    pub lambda_local: f64,
    /// Content weight applied on every content layer.
    pub alpha: f64,
    /// Style weight applied on every style layer.
    pub beta: f64,
    /// Total-variation weight.
    pub theta: f64,
    /// Keep the `sum_c` in the global content term, which multiplies the
    /// channel-independent quantity by the number of mask channels.
    pub literal_channel_sum: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_global: 1.0,
            lambda_local: 1.0,
            alpha: 1e2,
            beta: 1e4,
            theta: 1e-3,
            literal_channel_sum: true,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_global", self.lambda_global),
            ("lambda_local", self.lambda_local),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn zero() -> Self {
        Self {
            lambda_global: 0.0,
            lambda_local: 0.0,
            alpha: 0.0,
            beta: 0.0,
            theta: 0.0,
            literal_channel_sum: true,
        }
    }

    pub fn alpha_for(&self, spec: &NetworkSpec, layer: usize) -> f64 {
        if spec.is_content_layer(layer) {
            self.alpha
        } else {
            0.0
        }
    }

    pub fn beta_for(&self, spec: &NetworkSpec, layer: usize) -> f64 {
        if spec.is_style_layer(layer) {
            self.beta
        } else {
            0.0
        }
    }
}

/// Unnormalized `N x N` Gram matrix of a (masked) feature matrix with `M`
/// columns. The style loss scales it by `1 / (2 N M)` before comparing.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// `1 / (4 N^2 M^2)`
    pub fn normalization(&self) -> f64 {
        let nm = (self.n * self.m) as f64;
        1.0 / (4.0 * nm * nm)
    }

    /// `G / (2 N M)`
    pub fn normalized(&self) -> Vec<f64> {
        let k = 1.0 / (2.0 * (self.n * self.m) as f64);
        self.data.iter().map(|v| v * k).collect()
    }
}

fn gram_of(x: &FeatureMap) -> GramMatrix {
    let n = x.channels();
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let ri = x.row(i);
        for j in i..n {
            let v: f64 = ri.iter().zip(x.row(j)).map(|(a, b)| a * b).sum();
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    GramMatrix {
        n,
        m: x.plane_len(),
        data,
    }
}

/// `(F * A)(F * A)^T` with `A` broadcast over the rows of `F`.
pub fn masked_gram(features: &FeatureMap, mask: &[f64]) -> Result<GramMatrix> {
    if mask.len() != features.plane_len() {
        return Err(Error::ShapeMismatch(format!(
            "mask has {} entries but features have {} positions",
            mask.len(),
            features.plane_len()
        )));
    }
    Ok(gram_of(&weight_columns(features, mask)))
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Per-channel content terms of one layer and their weighted sum.
#[derive(Debug, Clone, PartialEq)]
pub struct ContentTerms {
    pub global: Vec<f64>,
    pub local: Vec<f64>,
    /// `lambda_g * sum(global) + lambda_l * sum(local)`
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StyleTerms {
    pub global: Vec<f64>,
    pub local: Vec<f64>,
    pub value: f64,
}

fn stream_layer<'a>(streams: &'a StreamSet, tap: usize, who: &str) -> Result<&'a StreamLayer> {
    streams
        .layers
        .get(tap)
        .ok_or_else(|| Error::ShapeMismatch(format!("{who} streams have no tap {tap}")))
}

/// Content loss at tap `tap` and its gradient with respect to `F^l[O]`.
///
/// Both stream sets must have been built with the attention of `I`.
pub fn content_loss(
    streams_o: &StreamSet,
    streams_i: &StreamSet,
    weights: &LossWeights,
    tap: usize,
) -> Result<(ContentTerms, FeatureMap)> {
    let o = stream_layer(streams_o, tap, "output")?;
    let i = stream_layer(streams_i, tap, "content")?;
    content_terms(o, i, weights)
}

fn content_terms(
    o: &StreamLayer,
    i: &StreamLayer,
    weights: &LossWeights,
) -> Result<(ContentTerms, FeatureMap)> {
    if !o.full.same_shape(&i.full) || o.mask_channels() != i.mask_channels() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: output {} vs content {}",
            o.layer,
            o.full.shape_str(),
            i.full.shape_str()
        )));
    }
    let c_count = o.mask_channels();
    let nm = (o.full.channels() * o.full.plane_len()) as f64;

    let mut diff = o.full.clone();
    diff.scaled_add(-1.0, &i.full);
    let base = squared_norm(diff.data()) / (2.0 * nm);
    let channel_factor = if weights.literal_channel_sum {
        1.0
    } else {
        1.0 / c_count as f64
    };
    let global = vec![base * channel_factor; c_count];

    // d(sum_c gc_c)/dF = C * diff / NM (literal) or diff / NM.
    let mut grad = diff.clone();
    grad.scale(weights.lambda_global * channel_factor * c_count as f64 / nm);

    let mut local = Vec::with_capacity(c_count);
    for c in 0..c_count {
        let mut d = o.attention[c].clone();
        d.scaled_add(-1.0, &i.attention[c]);
        local.push(squared_norm(d.data()) / (2.0 * nm));
        if weights.lambda_local != 0.0 {
            let g = weight_columns(&d, i.attention_map.row(c));
            grad.scaled_add(weights.lambda_local / nm, &g);
        }
    }
    let value =
        weights.lambda_global * global.iter().sum::<f64>() + weights.lambda_local * local.iter().sum::<f64>();
    Ok((ContentTerms { global, local, value }, grad))
}

/// Normalized target Grams of the style image at one tap.
#[derive(Debug, Clone, PartialEq)]
struct StyleTarget {
    n: usize,
    background: Vec<Vec<f64>>,
    attention: Vec<Vec<f64>>,
}

impl StyleTarget {
    fn from_streams(s: &StreamLayer) -> Self {
        Self {
            n: s.full.channels(),
            background: s.background.iter().map(|x| gram_of(x).normalized()).collect(),
            attention: s.attention.iter().map(|x| gram_of(x).normalized()).collect(),
        }
    }
}

/// Style loss at tap `tap` and its gradient with respect to `F^l[O]`.
///
/// `streams_o` must be built with the attention of `I`, `streams_s` with the
/// attention of `S`. Spatial sizes may differ; channel counts may not.
pub fn style_loss(
    streams_o: &StreamSet,
    streams_s: &StreamSet,
    weights: &LossWeights,
    tap: usize,
) -> Result<(StyleTerms, FeatureMap)> {
    let o = stream_layer(streams_o, tap, "output")?;
    let s = stream_layer(streams_s, tap, "style")?;
    style_terms(o, &StyleTarget::from_streams(s), weights)
}

/// `|Ghat(X) - target|^2` and its gradient with respect to `X`, where
/// `Ghat(X) = X X^T / (2 N M)`.
fn gram_distance(x: &FeatureMap, target: &[f64], need_grad: bool) -> (f64, Option<FeatureMap>) {
    let n = x.channels();
    let g = gram_of(x).normalized();
    let d: Vec<f64> = g.iter().zip(target).map(|(a, b)| a - b).collect();
    let value = squared_norm(&d);
    if !need_grad {
        return (value, None);
    }
    // dL/dX = 2 D X / (N M)
    let k = 2.0 / (n * x.plane_len()) as f64;
    let mut grad = FeatureMap::zeros_like(x);
    for i in 0..n {
        let out = grad.row_mut(i);
        for j in 0..n {
            let dij = d[i * n + j];
            if dij == 0.0 {
                continue;
            }
            let coef = k * dij;
            for (acc, &xv) in out.iter_mut().zip(x.row(j)) {
                *acc += coef * xv;
            }
        }
    }
    (value, Some(grad))
}

fn style_terms(
    o: &StreamLayer,
    target: &StyleTarget,
    weights: &LossWeights,
) -> Result<(StyleTerms, FeatureMap)> {
    if o.full.channels() != target.n || o.mask_channels() != target.background.len() {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: output has {} filters and {} mask channels, style has {} and {}",
            o.layer,
            o.full.channels(),
            o.mask_channels(),
            target.n,
            target.background.len()
        )));
    }
    let mut grad = FeatureMap::zeros_like(&o.full);
    let mut global = Vec::with_capacity(o.mask_channels());
    let mut local = Vec::with_capacity(o.mask_channels());
    for c in 0..o.mask_channels() {
        let att = o.attention_map.row(c);

        let (gs, g_bkgd) = gram_distance(
            &o.background[c],
            &target.background[c],
            weights.lambda_global != 0.0,
        );
        if let Some(g) = g_bkgd {
            let neg: Vec<f64> = att.iter().map(|a| 1.0 - a).collect();
            grad.scaled_add(weights.lambda_global, &weight_columns(&g, &neg));
        }
        global.push(gs);

        let (ls, g_att) = gram_distance(&o.attention[c], &target.attention[c], weights.lambda_local != 0.0);
        if let Some(g) = g_att {
            grad.scaled_add(weights.lambda_local, &weight_columns(&g, att));
        }
        local.push(ls);
    }
    let value =
        weights.lambda_global * global.iter().sum::<f64>() + weights.lambda_local * local.iter().sum::<f64>();
    Ok((StyleTerms { global, local, value }, grad))
}

/// Smooth total variation of an interleaved `h x w x channels` buffer:
/// squared differences between horizontal and vertical neighbours.
pub fn tv_loss_raw(data: &[f64], height: usize, width: usize, channels: usize) -> (f64, Vec<f64>) {
    assert_eq!(data.len(), height * width * channels, "tv buffer shape");
    let mut loss = 0.0;
    let mut grad = vec![0.0; data.len()];
    let row = width * channels;
    for y in 0..height {
        for x in 0..width {
            for c in 0..channels {
                let i = y * row + x * channels + c;
                if x + 1 < width {
                    let d = data[i + channels] - data[i];
                    loss += d * d;
                    grad[i + channels] += 2.0 * d;
                    grad[i] -= 2.0 * d;
                }
                if y + 1 < height {
                    let d = data[i + row] - data[i];
                    loss += d * d;
                    grad[i + row] += 2.0 * d;
                    grad[i] -= 2.0 * d;
                }
            }
        }
    }
    (loss, grad)
}

pub fn tv_loss(image: &ImagePlane) -> (f64, Vec<f64>) {
    tv_loss_raw(image.data(), image.height(), image.width(), ImagePlane::CHANNELS)
}

/// Loss terms of one tap layer, per mask channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerReport {
    pub layer: usize,
    pub alpha: f64,
    pub beta: f64,
    pub content_global: Vec<f64>,
    pub content_local: Vec<f64>,
    pub style_global: Vec<f64>,
    pub style_local: Vec<f64>,
}

impl LayerReport {
    pub fn gc(&self) -> f64 {
        self.content_global.iter().sum()
    }
    pub fn lc(&self) -> f64 {
        self.content_local.iter().sum()
    }
    pub fn gs(&self) -> f64 {
        self.style_global.iter().sum()
    }
    pub fn ls(&self) -> f64 {
        self.style_local.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub layers: Vec<LayerReport>,
    pub tv: f64,
    pub lambda_global: f64,
    pub lambda_local: f64,
    pub theta: f64,
    pub total: f64,
}

impl LossReport {
    /// `sum_l alpha_l (lg gc + ll lc)`
    pub fn content(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.alpha * (self.lambda_global * l.gc() + self.lambda_local * l.lc()))
            .sum()
    }

    /// `sum_l beta_l (lg gs + ll ls)`
    pub fn style(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.beta * (self.lambda_global * l.gs() + self.lambda_local * l.ls()))
            .sum()
    }

    /// Total rebuilt from the parts.
    pub fn recompute_total(&self) -> f64 {
        self.content() + self.style() + self.theta * self.tv
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("iter");
        for term in ["gc", "lc", "gs", "ls"] {
            for l in &self.layers {
                let _ = write!(h, ",{term}_l{}", l.layer);
            }
        }
        h.push_str(",tv,total");
        h
    }

    pub fn csv_row(&self, iteration: usize) -> String {
        let mut r = iteration.to_string();
        for term in [LayerReport::gc, LayerReport::lc, LayerReport::gs, LayerReport::ls] {
            for l in &self.layers {
                let _ = write!(r, ",{}", term(l));
            }
        }
        let _ = write!(r, ",{},{}", self.tv, self.total);
        r
    }
}

/// Write one CSV row per report (header taken from the first).
pub fn reports_to_csv(reports: &[LossReport]) -> String {
    let mut out = String::new();
    if let Some(first) = reports.first() {
        out.push_str(&first.csv_header());
        out.push('\n');
    }
    for (k, r) in reports.iter().enumerate() {
        out.push_str(&r.csv_row(k));
        out.push('\n');
    }
    out
}

/// The combined objective with everything that does not depend on the output
/// image precomputed: content features and attention of `I`, and the style
/// Gram targets of `S`.
pub struct Objective<'a> {
    spec: &'a NetworkSpec,
    weights: LossWeights,
    dims: (usize, usize),
    content_streams: StreamSet,
    content_attention: AttentionPyramid,
    style_targets: Vec<StyleTarget>,
}

impl<'a> Objective<'a> {
    pub fn new(
        pair_i: &RgbMaskPair,
        pair_s: &RgbMaskPair,
        spec: &'a NetworkSpec,
        subnet: &AttentionSubnet,
        weights: &LossWeights,
    ) -> Result<Self> {
        weights.validate()?;
        if pair_i.mask().channels() != pair_s.mask().channels() {
            return Err(Error::ShapeMismatch(format!(
                "content mask has {} channels, style mask has {}",
                pair_i.mask().channels(),
                pair_s.mask().channels()
            )));
        }
        let (fi, ai) = features_and_attention(pair_i, spec, subnet)?;
        let (fs, as_) = features_and_attention(pair_s, spec, subnet)?;
        let content_streams = build_streams(&fi, &ai)?;
        let style_streams = build_streams(&fs, &as_)?;
        Ok(Self {
            spec,
            weights: weights.clone(),
            dims: pair_i.dims(),
            content_streams,
            content_attention: ai,
            style_targets: style_streams
                .layers
                .iter()
                .map(StyleTarget::from_streams)
                .collect(),
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn content_attention(&self) -> &AttentionPyramid {
        &self.content_attention
    }

    /// Loss report and pixel gradient (interleaved, same layout as the image).
    pub fn evaluate(&self, output: &ImagePlane) -> Result<(LossReport, Vec<f64>)> {
        let (report, grad, _) = self.run(output, true)?;
        Ok((report, grad.expect("gradient requested")))
    }

    /// Loss report without the gradient, plus the ReLU activation pattern of
    /// `output` (see [`crate::net::Activations::relu_pattern`]).
    pub fn probe(&self, output: &ImagePlane) -> Result<(LossReport, Vec<u64>)> {
        let (report, _, pattern) = self.run(output, false)?;
        Ok((report, pattern))
    }

    fn run(&self, output: &ImagePlane, with_grad: bool) -> Result<(LossReport, Option<Vec<f64>>, Vec<u64>)> {
        if output.dims() != self.dims {
            return Err(Error::ShapeMismatch(format!(
                "output is {}x{} but the content image is {}x{}",
                output.height(),
                output.width(),
                self.dims.0,
                self.dims.1
            )));
        }
        let w = &self.weights;
        let acts = self.spec.trace(image_to_features(output))?;
        let streams_o = build_streams(&acts.pyramid(), &self.content_attention)?;

        let mut layers = Vec::with_capacity(streams_o.layers.len());
        let mut grads = Vec::with_capacity(streams_o.layers.len());
        for ((o, i), target) in streams_o
            .layers
            .iter()
            .zip(&self.content_streams.layers)
            .zip(&self.style_targets)
        {
            let alpha = w.alpha_for(self.spec, o.layer);
            let beta = w.beta_for(self.spec, o.layer);
            let (ct, cg) = content_terms(o, i, w)?;
            let (st, sg) = style_terms(o, target, w)?;
            let mut g = FeatureMap::zeros_like(&o.full);
            if alpha != 0.0 {
                g.scaled_add(alpha, &cg);
            }
            if beta != 0.0 {
                g.scaled_add(beta, &sg);
            }
            grads.push(g);
            layers.push(LayerReport {
                layer: o.layer,
                alpha,
                beta,
                content_global: ct.global,
                content_local: ct.local,
                style_global: st.global,
                style_local: st.local,
            });
        }

        let (tv, tv_grad) = tv_loss(output);
        let (grad, pattern) = if with_grad {
            let mut grad = acts.backward(&grads)?.to_interleaved();
            if w.theta != 0.0 {
                for (g, t) in grad.iter_mut().zip(&tv_grad) {
                    *g += w.theta * t;
                }
            }
            (Some(grad), Vec::new())
        } else {
            (None, acts.relu_pattern())
        };
        let mut report = LossReport {
            layers,
            tv,
            lambda_global: w.lambda_global,
            lambda_local: w.lambda_local,
            theta: w.theta,
            total: 0.0,
        };
        report.total = report.recompute_total();
        Ok((report, grad, pattern))
    }
}

fn features_and_attention(
    pair: &RgbMaskPair,
    spec: &NetworkSpec,
    subnet: &AttentionSubnet,
) -> Result<(crate::net::FeaturePyramid, AttentionPyramid)> {
    let f = spec.forward(pair.image())?;
    let m = spec.downsample_mask(pair.mask())?;
    let a = compute_attention(subnet, &f, &m)?;
    Ok((f, a))
}

/// One-shot evaluation of the objective at `output`.
pub fn total_objective(
    output: &ImagePlane,
    pair_i: &RgbMaskPair,
    pair_s: &RgbMaskPair,
    spec: &NetworkSpec,
    subnet: &AttentionSubnet,
    weights: &LossWeights,
) -> Result<(LossReport, Vec<f64>)> {
    Objective::new(pair_i, pair_s, spec, subnet, weights)?.evaluate(output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{FeaturePyramid, Tap};
    use crate::rng::Lcg64;

    fn fm(n: usize, m: usize, v: &[f64]) -> FeatureMap {
        FeatureMap::new(n, 1, m, v.to_vec()).unwrap()
    }

    fn streams(f: &FeatureMap, att: &[f64]) -> StreamSet {
        let pyr = FeaturePyramid {
            taps: vec![Tap {
                layer: 1,
                map: f.clone(),
            }],
        };
        let a = AttentionPyramid {
            taps: vec![Tap {
                layer: 1,
                map: FeatureMap::new(1, f.height(), f.width(), att.to_vec()).unwrap(),
            }],
        };
        build_streams(&pyr, &a).unwrap()
    }

    #[test]
    fn masked_gram_small_case() {
        let f = fm(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let g = masked_gram(&f, &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(g.data, vec![5.0, 2.0, 2.0, 1.0]);
        assert_eq!(masked_gram(&f, &[0.0; 3]).unwrap().data, vec![0.0; 4]);
        assert_eq!(
            masked_gram(&fm(2, 3, &[0.0; 6]), &[1.0; 3]).unwrap().data,
            vec![0.0; 4]
        );
        assert!(matches!(masked_gram(&f, &[1.0; 2]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let mut rng = Lcg64::new(4);
        let f = fm(5, 9, &(0..45).map(|_| rng.next_unit() - 0.5).collect::<Vec<_>>());
        let a: Vec<f64> = (0..9).map(|_| rng.next_unit()).collect();
        let g = masked_gram(&f, &a).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        for _ in 0..20 {
            let x: Vec<f64> = (0..5).map(|_| rng.next_unit() - 0.5).collect();
            let q: f64 = (0..5)
                .flat_map(|i| (0..5).map(move |j| (i, j)))
                .map(|(i, j)| x[i] * g.get(i, j) * x[j])
                .sum();
            assert!(q >= -1e-6 * squared_norm(&x));
        }
    }

    #[test]
    fn content_small_case() {
        let o = streams(&fm(1, 4, &[1.0; 4]), &[1.0, 0.0, 1.0, 0.0]);
        let i = streams(&fm(1, 4, &[0.0; 4]), &[1.0, 0.0, 1.0, 0.0]);
        let (t, _) = content_loss(&o, &i, &LossWeights::default(), 0).unwrap();
        assert_eq!(t.global, vec![0.5]);
        assert_eq!(t.local, vec![0.25]);
        assert_eq!(t.value, 0.75);
    }

    #[test]
    fn content_is_zero_at_identity_and_quadratic() {
        let mut rng = Lcg64::new(8);
        let fi: Vec<f64> = (0..12).map(|_| rng.next_unit()).collect();
        let fo: Vec<f64> = (0..12).map(|_| rng.next_unit()).collect();
        let att = [0.0, 1.0, 0.5, 1.0];
        let w = LossWeights::default();
        let si = streams(&fm(3, 4, &fi), &att);
        let (t, g) = content_loss(&si, &si, &w, 0).unwrap();
        assert_eq!(t.value, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));

        let (t1, _) = content_loss(&streams(&fm(3, 4, &fo), &att), &si, &w, 0).unwrap();
        let fo2: Vec<f64> = fo.iter().zip(&fi).map(|(o, i)| i + 2.0 * (o - i)).collect();
        let (t2, _) = content_loss(&streams(&fm(3, 4, &fo2), &att), &si, &w, 0).unwrap();
        assert!((t2.value / t1.value - 4.0).abs() < 1e-12);
    }

    #[test]
    fn style_small_case() {
        // Background (att+ = 0) features of O are [1, 1]; of S are zero.
        let o = streams(&fm(1, 2, &[1.0, 1.0]), &[0.0, 0.0]);
        let s = streams(&fm(1, 2, &[0.0, 0.0]), &[0.0, 0.0]);
        let w = LossWeights {
            lambda_global: 1.0,
            lambda_local: 0.0,
            ..LossWeights::default()
        };
        let (t, _) = style_loss(&o, &s, &w, 0).unwrap();
        assert_eq!(t.global, vec![0.25]);
        assert_eq!(t.value, 0.25);
    }

    #[test]
    fn style_local_vanishes_without_attention() {
        let mut rng = Lcg64::new(2);
        let fo: Vec<f64> = (0..12).map(|_| rng.next_unit()).collect();
        let fs: Vec<f64> = (0..12).map(|_| rng.next_unit()).collect();
        let (t, _) = style_loss(
            &streams(&fm(3, 4, &fo), &[0.0; 4]),
            &streams(&fm(3, 4, &fs), &[0.0; 4]),
            &LossWeights::default(),
            0,
        )
        .unwrap();
        assert_eq!(t.local, vec![0.0]);
        assert!(t.global[0] > 0.0);
    }

    #[test]
    fn style_rejects_filter_mismatch() {
        let o = streams(&fm(2, 2, &[1.0; 4]), &[1.0; 2]);
        let s = streams(&fm(1, 2, &[1.0; 2]), &[1.0; 2]);
        assert!(matches!(
            style_loss(&o, &s, &LossWeights::default(), 0),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn tv_small_cases() {
        assert_eq!(tv_loss_raw(&[0.0, 2.0], 1, 2, 1).0, 4.0);
        assert_eq!(tv_loss_raw(&[5.0; 12], 2, 2, 3).0, 0.0);
        let mut rng = Lcg64::new(1);
        let x: Vec<f64> = (0..27).map(|_| rng.next_pixel()).collect();
        let kx: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let (a, _) = tv_loss_raw(&x, 3, 3, 3);
        let (b, _) = tv_loss_raw(&kx, 3, 3, 3);
        assert!((b / a - 9.0).abs() < 1e-12);
    }

    #[test]
    fn tv_gradient_matches_differences() {
        let mut rng = Lcg64::new(6);
        let x: Vec<f64> = (0..30).map(|_| rng.next_pixel()).collect();
        let (_, g) = tv_loss_raw(&x, 2, 5, 3);
        let h = 1e-3;
        for k in 0..x.len() {
            let mut p = x.clone();
            p[k] += h;
            let mut m = x.clone();
            m[k] -= h;
            let fd = (tv_loss_raw(&p, 2, 5, 3).0 - tv_loss_raw(&m, 2, 5, 3).0) / (2.0 * h);
            assert!((fd - g[k]).abs() <= 1e-6 * g[k].abs().max(1.0));
        }
    }
}
