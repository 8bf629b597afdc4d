//! Layer primitives: 3x3 same-padded convolution, ReLU and 2x2 mean pooling,
//! each with the vector-Jacobian product with respect to its input.

use super::tensor::FeatureMap;
use super::ConvLayer;

/// Row range `[lo, hi)` of output positions whose neighbour at offset `d`
/// stays inside `0..len`.
#[inline]
fn valid_range(len: usize, d: isize) -> (usize, usize) {
    let lo = (-d).max(0) as usize;
    let hi = (len as isize - d.max(0)).max(0) as usize;
    (lo, hi.max(lo))
}

pub fn conv_forward(input: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w) = (input.height(), input.width());
    let mut out = FeatureMap::zeros(layer.out_channels, h, w);
    for o in 0..layer.out_channels {
        let out_row = out.row_mut(o);
        out_row.fill(layer.bias[o]);
        for i in 0..layer.in_channels {
            let in_row = input.row(i);
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    let k = layer.weight(o, i, ky, kx);
                    if k == 0.0 {
                        continue;
                    }
                    for y in y0..y1 {
                        let src_y = (y as isize + dy) as usize;
                        let dst = &mut out_row[y * w + x0..y * w + x1];
                        let src_start = (src_y * w) as isize + x0 as isize + dx;
                        let src = &in_row[src_start as usize..src_start as usize + (x1 - x0)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += k * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradient with respect to the convolution input given the gradient with
/// respect to its output (the transposed correlation).
pub fn conv_backward(grad_out: &FeatureMap, layer: &ConvLayer) -> FeatureMap {
    let (h, w) = (grad_out.height(), grad_out.width());
    let mut grad_in = FeatureMap::zeros(layer.in_channels, h, w);
    for i in 0..layer.in_channels {
        let gin = grad_in.row_mut(i);
        for o in 0..layer.out_channels {
            let gout = grad_out.row(o);
            for ky in 0..3 {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3 {
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    let k = layer.weight(o, i, ky, kx);
                    if k == 0.0 {
                        continue;
                    }
                    for y in y0..y1 {
                        let dst_y = (y as isize + dy) as usize;
                        let src = &gout[y * w + x0..y * w + x1];
                        let dst_start = ((dst_y * w) as isize + x0 as isize + dx) as usize;
                        let dst = &mut gin[dst_start..dst_start + (x1 - x0)];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += k * s;
                        }
                    }
                }
            }
        }
    }
    grad_in
}

pub fn relu_forward(input: &FeatureMap) -> FeatureMap {
    let mut out = input.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes the gradient where the forward activation is positive.
pub fn relu_backward(grad_out: &FeatureMap, activation: &FeatureMap) -> FeatureMap {
    let mut g = grad_out.clone();
    for (gv, &a) in g.data_mut().iter_mut().zip(activation.data()) {
        if a <= 0.0 {
            *gv = 0.0;
        }
    }
    g
}

pub fn avgpool_forward(input: &FeatureMap) -> FeatureMap {
    let (h, w) = (input.height() / 2, input.width() / 2);
    let iw = input.width();
    let mut out = FeatureMap::zeros(input.channels(), h, w);
    for c in 0..input.channels() {
        let src = input.row(c);
        let dst = out.row_mut(c);
        for y in 0..h {
            for x in 0..w {
                let a = (2 * y) * iw + 2 * x;
                let b = a + iw;
                dst[y * w + x] = 0.25 * (src[a] + src[a + 1] + src[b] + src[b + 1]);
            }
        }
    }
    out
}

pub fn avgpool_backward(grad_out: &FeatureMap) -> FeatureMap {
    let (h, w) = (grad_out.height(), grad_out.width());
    let iw = 2 * w;
    let mut grad_in = FeatureMap::zeros(grad_out.channels(), 2 * h, iw);
    for c in 0..grad_out.channels() {
        let src = grad_out.row(c);
        let dst = grad_in.row_mut(c);
        for y in 0..h {
            for x in 0..w {
                let g = 0.25 * src[y * w + x];
                let a = (2 * y) * iw + 2 * x;
                let b = a + iw;
                dst[a] = g;
                dst[a + 1] = g;
                dst[b] = g;
                dst[b + 1] = g;
            }
        }
    }
    grad_in
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_channel_layer(kernel: [f64; 9]) -> ConvLayer {
        ConvLayer::new(1, 1, kernel.to_vec(), vec![0.0]).unwrap()
    }

    /// Direct nested-loop correlation with zero padding.
    fn correlate(input: &[f64], h: usize, w: usize, k: &[f64; 9]) -> Vec<f64> {
        let mut out = vec![0.0; h * w];
        for y in 0..h as isize {
            for x in 0..w as isize {
                let mut acc = 0.0;
                for ky in 0..3isize {
                    for kx in 0..3isize {
                        let (sy, sx) = (y + ky - 1, x + kx - 1);
                        if sy >= 0 && sy < h as isize && sx >= 0 && sx < w as isize {
                            acc += k[(ky * 3 + kx) as usize] * input[(sy * w as isize + sx) as usize];
                        }
                    }
                }
                out[(y * w as isize + x) as usize] = acc;
            }
        }
        out
    }

    #[test]
    fn all_ones_kernel_on_4x4() {
        let input: Vec<f64> = (1..=16).map(|v| v as f64).collect();
        let fm = FeatureMap::new(1, 4, 4, input.clone()).unwrap();
        let out = conv_forward(&fm, &single_channel_layer([1.0; 9]));
        // Corner (0,0): 1+2+5+6; interior (1,1): 1+2+3+5+6+7+9+10+11.
        assert_eq!(out.data()[0], 14.0);
        assert_eq!(out.data()[5], 54.0);
        assert_eq!(out.data(), correlate(&input, 4, 4, &[1.0; 9]).as_slice());
    }

    #[test]
    fn asymmetric_kernel_matches_direct_correlation() {
        let k = [0.5, -1.0, 2.0, 0.0, 3.0, -0.25, 1.5, 0.75, -2.0];
        let input: Vec<f64> = (0..35).map(|v| ((v * 7) % 11) as f64 - 4.0).collect();
        let fm = FeatureMap::new(1, 5, 7, input.clone()).unwrap();
        let out = conv_forward(&fm, &single_channel_layer(k));
        assert_eq!(out.data(), correlate(&input, 5, 7, &k).as_slice());
    }

    #[test]
    fn conv_backward_is_adjoint_of_forward() {
        // <conv(x), g> == <x, conv^T(g)> for a bias-free layer.
        let weights: Vec<f64> = (0..2 * 3 * 9).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
        let layer = ConvLayer::new(3, 2, weights, vec![0.0; 2]).unwrap();
        let x = FeatureMap::new(3, 4, 5, (0..60).map(|i| ((i * 5) % 9) as f64 - 4.0).collect()).unwrap();
        let g = FeatureMap::new(2, 4, 5, (0..40).map(|i| ((i * 3) % 5) as f64 - 2.0).collect()).unwrap();
        let lhs: f64 = conv_forward(&x, &layer)
            .data()
            .iter()
            .zip(g.data())
            .map(|(a, b)| a * b)
            .sum();
        let rhs: f64 = x
            .data()
            .iter()
            .zip(conv_backward(&g, &layer).data())
            .map(|(a, b)| a * b)
            .sum();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn pooling_a_constant() {
        let fm = FeatureMap::filled(2, 4, 6, 3.5);
        let p = avgpool_forward(&fm);
        assert_eq!((p.height(), p.width()), (2, 3));
        assert!(p.data().iter().all(|&v| v == 3.5));
    }

    #[test]
    fn pooling_preserves_mean() {
        let fm = FeatureMap::new(1, 4, 4, (0..16).map(|v| v as f64).collect()).unwrap();
        let p = avgpool_forward(&fm);
        let mean_in = fm.data().iter().sum::<f64>() / 16.0;
        let mean_out = p.data().iter().sum::<f64>() / 4.0;
        assert_eq!(mean_in, mean_out);
    }
}
