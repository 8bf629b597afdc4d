use mgst_core::eval::{gradcheck, GradcheckConfig};
use mgst_core::image_io::init_white_noise;
use mgst_core::loss::LossWeights;
use mgst_core::net::{default_network, image_to_features, FeatureMap, NetworkSpec};
use mgst_core::rng::Lcg64;

/// `phi(x) = sum_l <g_l, F_l(x)>` and the ReLU pattern at `x`.
fn linear_probe(spec: &NetworkSpec, x: &FeatureMap, g: &[FeatureMap]) -> (f64, Vec<u64>) {
    let acts = spec.trace(x.clone()).unwrap();
    let pyr = acts.pyramid();
    let phi = pyr
        .taps
        .iter()
        .zip(g)
        .map(|(t, gl)| {
            t.map
                .data()
                .iter()
                .zip(gl.data())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .sum();
    (phi, acts.relu_pattern())
}

#[test]
fn network_backward_matches_finite_differences() {
    let spec = default_network(5);
    let img = init_white_noise(8, 8, 17).unwrap();
    let x = image_to_features(&img);
    let acts = spec.trace(x.clone()).unwrap();
    let mut rng = Lcg64::new(4);
    let g: Vec<FeatureMap> = acts
        .pyramid()
        .taps
        .iter()
        .map(|t| {
            let m = &t.map;
            let data = (0..m.data().len()).map(|_| rng.next_unit() - 0.5).collect();
            FeatureMap::new(m.channels(), m.height(), m.width(), data).unwrap()
        })
        .collect();
    let analytic = acts.backward(&g).unwrap();
    let (_, base) = linear_probe(&spec, &x, &g);

    let h = 1e-3;
    let mut probe = x.clone();
    let (mut worst, mut scale, mut checked) = (0.0f64, 0.0f64, 0);
    for k in 0..x.data().len() {
        let v = x.data()[k];
        probe.data_mut()[k] = v + h;
        let (fp, pp) = linear_probe(&spec, &probe, &g);
        probe.data_mut()[k] = v - h;
        let (fm, pm) = linear_probe(&spec, &probe, &g);
        probe.data_mut()[k] = v;
        // phi is piecewise linear; only differences within one piece are exact.
        if pp != base || pm != base {
            continue;
        }
        checked += 1;
        let n = (fp - fm) / (2.0 * h);
        worst = worst.max((n - analytic.data()[k]).abs());
        scale = scale.max(n.abs()).max(analytic.data()[k].abs());
    }
    assert!(
        checked > x.data().len() * 9 / 10,
        "only {checked} coordinates checked"
    );
    assert!(worst / scale <= 1e-5, "relative error {}", worst / scale);
}

#[test]
fn objective_gradient_on_small_instance() {
    let r = gradcheck(&GradcheckConfig {
        seed: 3,
        height: 8,
        width: 8,
        ..Default::default()
    })
    .unwrap();
    assert!(r.passes(1e-4), "{r:?}");
    assert_eq!(r.parts.len(), 3);
}

#[test]
fn corrupted_tv_gradient_is_caught() {
    let cfg = GradcheckConfig {
        seed: 3,
        height: 8,
        width: 8,
        corrupt_tv: true,
        ..Default::default()
    };
    let r = gradcheck(&cfg).unwrap();
    assert!(!r.passes(1e-4));
    let tv = r.parts.iter().find(|p| p.name == "tv").unwrap();
    assert!(tv.max_rel_error > 1.0);
}

#[test]
fn gradient_with_several_mask_channels() {
    for literal_channel_sum in [true, false] {
        let weights = LossWeights {
            literal_channel_sum,
            lambda_local: 2.5,
            ..Default::default()
        };
        let cfg = GradcheckConfig {
            seed: 4,
            height: 8,
            width: 8,
            mask_channels: 3,
            weights,
            ..Default::default()
        };
        let r = gradcheck(&cfg).unwrap();
        assert!(r.passes(1e-4), "{r:?}");
    }
}

#[test]
fn gradcheck_rejects_large_images() {
    assert!(gradcheck(&GradcheckConfig {
        height: 64,
        width: 64,
        ..Default::default()
    })
    .is_err());
}

#[test]
fn one_hot_tap_gradients_match_directional_derivatives() {
    let spec = default_network(8);
    let x = image_to_features(&init_white_noise(8, 8, 23).unwrap());
    let acts = spec.trace(x.clone()).unwrap();
    let pyr = acts.pyramid();
    let mut rng = Lcg64::new(12);
    let dir: Vec<f64> = (0..x.data().len()).map(|_| rng.next_unit() - 0.5).collect();
    let h = 1e-4;
    let shifted = |s: f64| {
        let mut p = x.clone();
        for (v, d) in p.data_mut().iter_mut().zip(&dir) {
            *v += s * d;
        }
        spec.trace(p).unwrap()
    };
    let (plus, minus) = (shifted(h), shifted(-h));
    let same_piece =
        plus.relu_pattern() == acts.relu_pattern() && minus.relu_pattern() == acts.relu_pattern();
    assert!(same_piece, "probe crossed a kink; pick another seed");
    for (t, tap) in pyr.taps.iter().enumerate() {
        let len = tap.map.data().len();
        for pos in [0, len / 3, len / 2, len - 1] {
            let g: Vec<FeatureMap> = pyr
                .taps
                .iter()
                .enumerate()
                .map(|(u, other)| {
                    let mut m = FeatureMap::zeros_like(&other.map);
                    if u == t {
                        m.data_mut()[pos] = 1.0;
                    }
                    m
                })
                .collect();
            let grad = acts.backward(&g).unwrap();
            let analytic: f64 = grad.data().iter().zip(&dir).map(|(a, b)| a * b).sum();
            let numeric =
                (plus.output(tap.layer).data()[pos] - minus.output(tap.layer).data()[pos]) / (2.0 * h);
            let scale = analytic.abs().max(numeric.abs()).max(1e-12);
            assert!(
                (analytic - numeric).abs() / scale <= 1e-5,
                "tap {t} pos {pos}: {analytic} vs {numeric}"
            );
        }
    }
}

#[test]
fn mask_at_unpooled_tap_is_unchanged() {
    let spec = default_network(1);
    let mask = mgst_core::image_io::SegMask::from_fn(8, 8, |y, x| ((y * 8 + x) % 5) as f64 / 4.0).unwrap();
    let pyr = spec.downsample_mask(&mask).unwrap();
    assert_eq!(pyr.taps[0].layer, 1);
    assert_eq!(pyr.taps[0].map.data(), mask.data());
}
