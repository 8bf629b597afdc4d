//! Convolutional feature extractor with an explicit backward pass.
//!
//! The network is a plain stack of 3x3 convolutions, ReLUs and 2x2 mean
//! pools. Selected ReLU outputs ("tap" layers) feed the content and style
//! losses. [`NetworkSpec::backward`] computes the gradient of
//! `sum_l <grads_l, F^l>` with respect to the input pixels.

mod ops;
mod tensor;

pub use ops::{avgpool_backward, avgpool_forward, conv_backward, conv_forward, relu_backward, relu_forward};
pub use tensor::FeatureMap;

use crate::error::{Error, Result};
use crate::image_io::{ImagePlane, SegMask};
use crate::rng::Lcg64;

/// A 3x3, stride 1, zero-padded convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out][in][ky][kx]`
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(in_channels: usize, out_channels: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::ShapeMismatch("conv layer with zero channels".into()));
        }
        if weights.len() != out_channels * in_channels * 9 || bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "conv {in_channels}->{out_channels} needs {} weights and {out_channels} biases, got {} and {}",
                out_channels * in_channels * 9,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidValue("non-finite conv parameter".into()));
        }
        Ok(Self {
            in_channels,
            out_channels,
            weights,
            bias,
        })
    }

    #[inline]
    pub fn weight(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((o * self.in_channels + i) * 3 + ky) * 3 + kx]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvLayer),
    Relu,
    AvgPool,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::AvgPool => "avgpool",
        }
    }
}

/// Layer stack plus the indices of the layers feeding each loss family.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    layers: Vec<LayerSpec>,
    style_layers: Vec<usize>,
    content_layers: Vec<usize>,
    taps: Vec<usize>,
}

impl NetworkSpec {
    pub const INPUT_CHANNELS: usize = 3;

    pub fn new(
        layers: Vec<LayerSpec>,
        mut style_layers: Vec<usize>,
        mut content_layers: Vec<usize>,
    ) -> Result<Self> {
        let mut channels = Self::INPUT_CHANNELS;
        for (i, layer) in layers.iter().enumerate() {
            if let LayerSpec::Conv(conv) = layer {
                if conv.in_channels != channels {
                    return Err(Error::ShapeMismatch(format!(
                        "layer {i}: conv expects {} input channels but receives {channels}",
                        conv.in_channels
                    )));
                }
                channels = conv.out_channels;
            }
        }
        style_layers.sort_unstable();
        style_layers.dedup();
        content_layers.sort_unstable();
        content_layers.dedup();
        let mut taps: Vec<usize> = style_layers.iter().chain(&content_layers).copied().collect();
        taps.sort_unstable();
        taps.dedup();
        if taps.is_empty() {
            return Err(Error::Config("network has no style or content layers".into()));
        }
        for &t in &taps {
            match layers.get(t) {
                Some(LayerSpec::Relu) => {}
                Some(other) => {
                    return Err(Error::Config(format!(
                        "tap layer {t} is a {} layer; only relu outputs can be tapped",
                        other.kind_name()
                    )))
                }
                None => {
                    return Err(Error::Config(format!(
                        "tap layer {t} is beyond the {} layers",
                        layers.len()
                    )))
                }
            }
        }
        Ok(Self {
            layers,
            style_layers,
            content_layers,
            taps,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn style_layers(&self) -> &[usize] {
        &self.style_layers
    }

    pub fn content_layers(&self) -> &[usize] {
        &self.content_layers
    }

    /// Sorted union of style and content layers.
    pub fn tap_layers(&self) -> &[usize] {
        &self.taps
    }

    pub fn is_style_layer(&self, layer: usize) -> bool {
        self.style_layers.binary_search(&layer).is_ok()
    }

    pub fn is_content_layer(&self, layer: usize) -> bool {
        self.content_layers.binary_search(&layer).is_ok()
    }

    pub fn pool_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, LayerSpec::AvgPool))
            .count()
    }

    /// Input height and width must be multiples of this.
    pub fn size_divisor(&self) -> usize {
        1 << self.pool_count()
    }

    /// Channel count and spatial size at each tap for an `h x w` input.
    pub fn tap_shapes(&self, height: usize, width: usize) -> Vec<(usize, usize, usize)> {
        let (mut c, mut h, mut w) = (Self::INPUT_CHANNELS, height, width);
        let mut out = Vec::with_capacity(self.taps.len());
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                LayerSpec::Conv(conv) => c = conv.out_channels,
                LayerSpec::AvgPool => {
                    h /= 2;
                    w /= 2;
                }
                LayerSpec::Relu => {}
            }
            if self.taps.binary_search(&i).is_ok() {
                out.push((c, h, w));
            }
        }
        out
    }

    fn last_tap(&self) -> usize {
        *self.taps.last().expect("validated non-empty")
    }

    fn check_input(&self, height: usize, width: usize) -> Result<()> {
        let d = self.size_divisor();
        if !height.is_multiple_of(d) || !width.is_multiple_of(d) || height == 0 || width == 0 {
            return Err(Error::IndivisibleDims {
                height,
                width,
                divisor: d,
            });
        }
        Ok(())
    }

    /// Runs the stack on a channel-major input, keeping every activation.
    pub fn trace(&self, input: FeatureMap) -> Result<Activations<'_>> {
        if input.channels() != Self::INPUT_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "network input must have {} channels, got {}",
                Self::INPUT_CHANNELS,
                input.channels()
            )));
        }
        self.check_input(input.height(), input.width())?;
        let last = self.last_tap();
        let mut outputs = Vec::with_capacity(last + 1);
        for layer in &self.layers[..=last] {
            let x = outputs.last().unwrap_or(&input);
            let y = match layer {
                LayerSpec::Conv(conv) => conv_forward(x, conv),
                LayerSpec::Relu => relu_forward(x),
                LayerSpec::AvgPool => avgpool_forward(x),
            };
            outputs.push(y);
        }
        Ok(Activations {
            spec: self,
            input_dims: (input.height(), input.width()),
            outputs,
        })
    }

    pub fn forward(&self, image: &ImagePlane) -> Result<FeaturePyramid> {
        Ok(self.trace(image_to_features(image))?.pyramid())
    }

    /// Gradient of `sum_l <grads_l, F^l>` with respect to the image pixels,
    /// returned in the image's interleaved layout.
    pub fn backward(&self, image: &ImagePlane, grads: &[FeatureMap]) -> Result<Vec<f64>> {
        let g = self.trace(image_to_features(image))?.backward(grads)?;
        Ok(g.to_interleaved())
    }

    /// Mean-pools each mask channel through the same pooling schedule as the
    /// features, yielding one map per tap layer.
    pub fn downsample_mask(&self, mask: &SegMask) -> Result<MaskPyramid> {
        self.check_input(mask.height(), mask.width())?;
        let mut current =
            FeatureMap::from_interleaved(mask.height(), mask.width(), mask.channels(), mask.data());
        let mut taps = Vec::with_capacity(self.taps.len());
        for (i, layer) in self.layers[..=self.last_tap()].iter().enumerate() {
            if matches!(layer, LayerSpec::AvgPool) {
                current = avgpool_forward(&current);
            }
            if self.taps.binary_search(&i).is_ok() {
                taps.push(Tap {
                    layer: i,
                    map: current.clone(),
                });
            }
        }
        Ok(MaskPyramid { taps })
    }
}

pub fn image_to_features(image: &ImagePlane) -> FeatureMap {
    FeatureMap::from_interleaved(image.height(), image.width(), ImagePlane::CHANNELS, image.data())
}

/// He-initialized default topology:
/// `conv(3,16) relu conv(16,16) relu pool conv(16,32) relu conv(32,32) relu pool conv(32,64) relu`.
///
/// Style taps are the first ReLU of each block (layers 1, 6, 11); the
/// content tap is the last ReLU (layer 11). Weights are normal with standard
/// deviation `sqrt(2 / (in * 9))`, drawn from [`Lcg64`] and rounded to `f32`
/// so that they survive a weights-file round trip bit for bit. Biases are 0.
pub fn default_network(seed: u64) -> NetworkSpec {
    let mut rng = Lcg64::new(seed);
    let mut conv = |cin: usize, cout: usize| {
        let scale = (2.0 / (cin * 9) as f64).sqrt();
        let weights = (0..cout * cin * 9)
            .map(|_| (rng.next_gaussian() * scale) as f32 as f64)
            .collect();
        LayerSpec::Conv(ConvLayer::new(cin, cout, weights, vec![0.0; cout]).expect("valid shape"))
    };
    let layers = vec![
        conv(3, 16),
        LayerSpec::Relu,
        conv(16, 16),
        LayerSpec::Relu,
        LayerSpec::AvgPool,
        conv(16, 32),
        LayerSpec::Relu,
        conv(32, 32),
        LayerSpec::Relu,
        LayerSpec::AvgPool,
        conv(32, 64),
        LayerSpec::Relu,
    ];
    NetworkSpec::new(layers, vec![1, 6, 11], vec![11]).expect("default topology is valid")
}

/// A per-tap-layer value.
#[derive(Debug, Clone, PartialEq)]
pub struct Tap {
    pub layer: usize,
    pub map: FeatureMap,
}

/// Feature matrices `F^l` (`N_l x M_l`) at every tap layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    pub taps: Vec<Tap>,
}

impl FeaturePyramid {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn get(&self, layer: usize) -> Option<&FeatureMap> {
        self.taps.iter().find(|t| t.layer == layer).map(|t| &t.map)
    }
}

/// Mask channels resampled to each tap layer's resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPyramid {
    pub taps: Vec<Tap>,
}

/// Forward activations of one input, kept for the backward pass.
pub struct Activations<'a> {
    spec: &'a NetworkSpec,
    input_dims: (usize, usize),
    outputs: Vec<FeatureMap>,
}

impl Activations<'_> {
    pub fn pyramid(&self) -> FeaturePyramid {
        FeaturePyramid {
            taps: self
                .spec
                .taps
                .iter()
                .map(|&l| Tap {
                    layer: l,
                    map: self.outputs[l].clone(),
                })
                .collect(),
        }
    }

    pub fn output(&self, layer: usize) -> &FeatureMap {
        &self.outputs[layer]
    }

    /// Bitset of which ReLU outputs are positive, over all ReLU layers run.
    /// Two inputs with equal patterns lie in the same linear piece of every
    /// ReLU.
    pub fn relu_pattern(&self) -> Vec<u64> {
        let mut bits = Vec::new();
        let mut n = 0usize;
        for (layer, out) in self.spec.layers.iter().zip(&self.outputs) {
            if !matches!(layer, LayerSpec::Relu) {
                continue;
            }
            for &v in out.data() {
                if n.is_multiple_of(64) {
                    bits.push(0u64);
                }
                if v > 0.0 {
                    *bits.last_mut().expect("pushed above") |= 1 << (n % 64);
                }
                n += 1;
            }
        }
        bits
    }

    /// Channel-major input gradient for per-tap output gradients.
    pub fn backward(&self, grads: &[FeatureMap]) -> Result<FeatureMap> {
        let taps = &self.spec.taps;
        if grads.len() != taps.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tap gradients, got {}",
                taps.len(),
                grads.len()
            )));
        }
        for (g, &l) in grads.iter().zip(taps) {
            if !g.same_shape(&self.outputs[l]) {
                return Err(Error::ShapeMismatch(format!(
                    "gradient for layer {l} is {} but the activation is {}",
                    g.shape_str(),
                    self.outputs[l].shape_str()
                )));
            }
        }

        let mut grad: Option<FeatureMap> = None;
        let mut next_tap = taps.len();
        for i in (0..self.outputs.len()).rev() {
            if next_tap > 0 && taps[next_tap - 1] == i {
                next_tap -= 1;
                match grad.as_mut() {
                    Some(g) => g.add_assign(&grads[next_tap]),
                    None => grad = Some(grads[next_tap].clone()),
                }
            }
            let Some(g) = grad.take() else { continue };
            grad = Some(match &self.spec.layers[i] {
                LayerSpec::Conv(conv) => conv_backward(&g, conv),
                LayerSpec::Relu => relu_backward(&g, &self.outputs[i]),
                LayerSpec::AvgPool => avgpool_backward(&g),
            });
        }
        let (h, w) = self.input_dims;
        Ok(grad.unwrap_or_else(|| FeatureMap::zeros(NetworkSpec::INPUT_CHANNELS, h, w)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::init_white_noise;

    fn identity_network() -> NetworkSpec {
        let mut weights = vec![0.0; 3 * 3 * 9];
        for c in 0..3 {
            weights[(c * 3 + c) * 9 + 4] = 1.0;
        }
        let conv = ConvLayer::new(3, 3, weights, vec![0.0; 3]).unwrap();
        NetworkSpec::new(vec![LayerSpec::Conv(conv), LayerSpec::Relu], vec![1], vec![1]).unwrap()
    }

    #[test]
    fn default_topology() {
        let net = default_network(7);
        let kinds: Vec<_> = net.layers().iter().map(LayerSpec::kind_name).collect();
        assert_eq!(
            kinds,
            [
                "conv", "relu", "conv", "relu", "avgpool", "conv", "relu", "conv", "relu", "avgpool", "conv",
                "relu"
            ]
        );
        assert_eq!(net.style_layers(), &[1, 6, 11]);
        assert_eq!(net.content_layers(), &[11]);
        assert_eq!(net.tap_layers(), &[1, 6, 11]);
        assert_eq!(net.size_divisor(), 4);
    }

    #[test]
    fn default_network_is_seeded() {
        assert_eq!(default_network(7), default_network(7));
        assert_ne!(default_network(7), default_network(8));
    }

    #[test]
    fn default_weights_have_he_variance_and_zero_bias() {
        for layer in default_network(7).layers() {
            if let LayerSpec::Conv(c) = layer {
                let n = c.weights.len() as f64;
                let mean = c.weights.iter().sum::<f64>() / n;
                let var = c.weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let target = 2.0 / (c.in_channels * 9) as f64;
                assert!(
                    (var / target - 1.0).abs() <= 0.3,
                    "conv {}->{}: variance {var} vs {target}",
                    c.in_channels,
                    c.out_channels
                );
                assert!(c.bias.iter().all(|&b| b == 0.0));
            }
        }
    }

    #[test]
    fn identity_conv_reproduces_input() {
        let img = init_white_noise(8, 8, 4).unwrap();
        let pyr = identity_network().forward(&img).unwrap();
        assert_eq!(pyr.taps[0].map, image_to_features(&img));
    }

    #[test]
    fn rejects_indivisible_input() {
        let img = init_white_noise(10, 12, 1).unwrap();
        assert!(matches!(
            default_network(1).forward(&img),
            Err(Error::IndivisibleDims { divisor: 4, .. })
        ));
    }

    #[test]
    fn rejects_non_relu_taps() {
        let conv = ConvLayer::new(3, 4, vec![0.0; 108], vec![0.0; 4]).unwrap();
        let err = NetworkSpec::new(vec![LayerSpec::Conv(conv), LayerSpec::Relu], vec![0], vec![]);
        assert!(err.is_err());
        assert!(NetworkSpec::new(vec![LayerSpec::Relu], vec![], vec![]).is_err());
    }

    #[test]
    fn relu_outputs_are_nonnegative() {
        let img = init_white_noise(16, 16, 9).unwrap();
        let pyr = default_network(3).forward(&img).unwrap();
        for t in &pyr.taps {
            assert!(t.map.data().iter().all(|&v| v >= 0.0));
            assert!(t.map.is_finite());
        }
    }

    #[test]
    fn backward_is_linear_in_grads() {
        let net = default_network(5);
        let img = init_white_noise(8, 8, 2).unwrap();
        let pyr = net.forward(&img).unwrap();
        let zeros: Vec<_> = pyr.taps.iter().map(|t| FeatureMap::zeros_like(&t.map)).collect();
        assert!(net.backward(&img, &zeros).unwrap().iter().all(|&g| g == 0.0));

        let mut rng = Lcg64::new(1);
        let grads: Vec<_> = pyr
            .taps
            .iter()
            .map(|t| {
                let mut g = FeatureMap::zeros_like(&t.map);
                g.data_mut().iter_mut().for_each(|v| *v = rng.next_unit() - 0.5);
                g
            })
            .collect();
        let doubled: Vec<_> = grads
            .iter()
            .map(|g| {
                let mut d = g.clone();
                d.scale(2.0);
                d
            })
            .collect();
        let g1 = net.backward(&img, &grads).unwrap();
        let g2 = net.backward(&img, &doubled).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn backward_rejects_mismatched_grads() {
        let net = default_network(5);
        let img = init_white_noise(8, 8, 2).unwrap();
        let bad = vec![FeatureMap::zeros(1, 1, 1); 3];
        assert!(matches!(net.backward(&img, &bad), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            net.backward(&img, &bad[..1]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn mask_pyramid_of_ones_and_half_plane() {
        let net = default_network(1);
        let ones = SegMask::new(8, 8, 1, vec![1.0; 64]).unwrap();
        let pyr = net.downsample_mask(&ones).unwrap();
        assert!(pyr.taps.iter().all(|t| t.map.data().iter().all(|&v| v == 1.0)));

        // Rows 0..3 set: after one pool, pooled row 1 straddles the edge.
        let half = SegMask::from_fn(8, 8, |y, _| if y < 3 { 1.0 } else { 0.0 }).unwrap();
        let pyr = net.downsample_mask(&half).unwrap();
        assert_eq!(pyr.taps[0].map.data(), half.data(), "tap before any pool");
        let l6 = &pyr.taps[1].map;
        assert_eq!((l6.height(), l6.width()), (4, 4));
        let rows: Vec<f64> = (0..4).map(|y| l6.row(0)[y * 4]).collect();
        assert_eq!(rows, [1.0, 0.5, 0.0, 0.0]);
        assert!(l6.row(0).chunks(4).all(|r| r.iter().all(|&v| v == r[0])));
    }
}
