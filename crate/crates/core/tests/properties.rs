use proptest::prelude::*;

use mgst_core::attention::{build_streams, compute_attention, AttentionSubnet, AttentionUnit};
use mgst_core::eval::pupil_center;
use mgst_core::image_io::{init_white_noise, ImagePlane, RgbMaskPair, SegMask};
use mgst_core::loss::{masked_gram, total_objective, LossWeights};
use mgst_core::net::{avgpool_forward, default_network, FeatureMap};
use mgst_core::optim::{minimize_box, purify, Bounds, FnCost, OptimizerConfig};
use mgst_core::rng::Lcg64;

fn random_mask(h: usize, w: usize, channels: usize, seed: u64) -> SegMask {
    let mut rng = Lcg64::new(seed);
    let mut data = Vec::with_capacity(h * w * channels);
    for _ in 0..h * w {
        let v: Vec<f64> = (0..channels).map(|_| rng.next_unit()).collect();
        let total: f64 = v.iter().sum();
        data.extend(v.iter().map(|a| if total > 1.0 { a / total } else { *a }));
    }
    SegMask::new(h, w, channels, data).unwrap()
}

fn random_map(c: usize, h: usize, w: usize, seed: u64, scale: f64) -> FeatureMap {
    let mut rng = Lcg64::new(seed);
    FeatureMap::new(
        c,
        h,
        w,
        (0..c * h * w).map(|_| (rng.next_unit() - 0.5) * scale).collect(),
    )
    .unwrap()
}

fn side() -> impl Strategy<Value = usize> {
    (2usize..5).prop_map(|k| 4 * k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn white_noise_is_pure(h in side(), w in side(), seed in any::<u64>()) {
        let a = init_white_noise(h, w, seed).unwrap();
        prop_assert_eq!(&a, &init_white_noise(h, w, seed).unwrap());
        prop_assert!(a.min_value() >= 0.0 && a.max_value() <= 255.0);
    }

    #[test]
    fn png_round_trip(h in side(), w in side(), seed in any::<u64>()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        let img = init_white_noise(h, w, seed).unwrap();
        mgst_core::image_io::save_image(&img, &path).unwrap();
        let back = mgst_core::image_io::load_image(&path).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            prop_assert!((a - b).abs() <= 0.5);
        }
    }

    #[test]
    fn forward_is_deterministic_and_nonnegative(seed in 0u64..1000, img_seed in any::<u64>()) {
        let net = default_network(seed);
        let img = init_white_noise(8, 8, img_seed).unwrap();
        let a = net.forward(&img).unwrap();
        prop_assert_eq!(&a, &net.forward(&img).unwrap());
        for t in &a.taps {
            prop_assert!(t.map.data().iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn avgpool_preserves_mean(c in 1usize..4, h in side(), w in side(), seed in any::<u64>()) {
        let x = random_map(c, h, w, seed, 200.0);
        let y = avgpool_forward(&x);
        let mean = |m: &FeatureMap| m.data().iter().sum::<f64>() / m.data().len() as f64;
        prop_assert!((mean(&x) - mean(&y)).abs() <= 1e-12 * (1.0 + mean(&x).abs()));
    }

    #[test]
    fn mask_pyramid_stays_in_unit_interval(channels in 1usize..4, seed in any::<u64>()) {
        let net = default_network(1);
        let pyr = net.downsample_mask(&random_mask(16, 16, channels, seed)).unwrap();
        for t in &pyr.taps {
            prop_assert!(t.map.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn attention_partition_and_streams(channels in 1usize..3, seed in any::<u64>(), scale in 1e-4f64..1e-2) {
        let net = default_network(seed % 50);
        let img = init_white_noise(16, 16, seed).unwrap();
        let f = net.forward(&img).unwrap();
        let m = net.downsample_mask(&random_mask(16, 16, channels, seed ^ 1)).unwrap();

        let pass = compute_attention(&AttentionSubnet::Passthrough, &f, &m).unwrap();
        prop_assert_eq!(&pass.taps, &m.taps);

        let mut rng = Lcg64::new(seed);
        let units = f.taps.iter().map(|t| AttentionUnit {
            weights: (0..=t.map.channels()).map(|_| (rng.next_unit() - 0.5) * scale).collect(),
            bias: rng.next_unit() - 0.5,
        }).collect();
        let learned = compute_attention(&AttentionSubnet::learned(units).unwrap(), &f, &m).unwrap();
        for t in &learned.taps {
            prop_assert!(t.map.data().iter().all(|&v| v > 0.0 && v < 1.0));
        }

        for a in [&pass, &learned] {
            for i in 0..a.taps.len() {
                let neg = a.negative(i);
                for (p, n) in a.positive(i).data().iter().zip(neg.data()) {
                    prop_assert!((p + n - 1.0).abs() <= 1e-15);
                }
            }
            let s = build_streams(&f, a).unwrap();
            for l in &s.layers {
                for (att, bkg) in l.attention.iter().zip(&l.background) {
                    for ((x, y), z) in att.data().iter().zip(bkg.data()).zip(l.full.data()) {
                        prop_assert!((x + y - z).abs() <= 1e-6 * z.abs().max(1e-300));
                    }
                }
            }
        }
    }

    #[test]
    fn masked_gram_symmetric_psd(n in 1usize..8, m in 1usize..40, seed in any::<u64>()) {
        let f = random_map(n, 1, m, seed, 10.0);
        let mut rng = Lcg64::new(seed ^ 7);
        let mask: Vec<f64> = (0..m).map(|_| rng.next_unit()).collect();
        let g = masked_gram(&f, &mask).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert_eq!(g.get(i, j), g.get(j, i));
            }
        }
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.next_unit() - 0.5).collect();
            let q: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| x[i] * g.get(i, j) * x[j]).sum();
            let norm2: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!(q >= -1e-6 * norm2);
        }
    }

    #[test]
    fn losses_nonnegative_and_decompose(seed in any::<u64>(), channels in 1usize..3, literal in any::<bool>()) {
        let net = default_network(seed % 20);
        let pi = RgbMaskPair::new(init_white_noise(16, 16, seed).unwrap(), random_mask(16, 16, channels, seed ^ 2)).unwrap();
        let ps = RgbMaskPair::new(init_white_noise(16, 16, seed ^ 3).unwrap(), random_mask(16, 16, channels, seed ^ 4)).unwrap();
        let o = init_white_noise(16, 16, seed ^ 5).unwrap();
        let weights = LossWeights { literal_channel_sum: literal, ..LossWeights::default() };
        let (r, _) = total_objective(&o, &pi, &ps, &net, &AttentionSubnet::Passthrough, &weights).unwrap();
        prop_assert!(r.tv >= 0.0 && r.total >= 0.0);
        for l in &r.layers {
            prop_assert!(l.gc() >= 0.0 && l.lc() >= 0.0 && l.gs() >= 0.0 && l.ls() >= 0.0);
        }
        prop_assert!((r.recompute_total() - r.total).abs() <= 1e-9 * r.total);

        let (same, grad) = total_objective(pi.image(), &pi, &ps, &net, &AttentionSubnet::Passthrough, &weights).unwrap();
        prop_assert_eq!(same.content(), 0.0);
        prop_assert!(grad.iter().all(|g| g.is_finite()));
    }

    #[test]
    fn projected_quadratic_optimum(seed in any::<u64>()) {
        let mut rng = Lcg64::new(seed);
        let c: Vec<f64> = (0..10).map(|_| rng.next_unit() * 500.0 - 120.0).collect();
        let x0: Vec<f64> = (0..10).map(|_| rng.next_pixel()).collect();
        let target = c.clone();
        let cost = FnCost(move |x: &[f64]| {
            let g: Vec<f64> = x.iter().zip(&target).map(|(a, b)| a - b).collect();
            (0.5 * g.iter().map(|v| v * v).sum::<f64>(), g)
        });
        let cfg = OptimizerConfig { max_iterations: 50, ..OptimizerConfig::default() };
        let m = minimize_box(cost, x0, Bounds::PIXELS, &cfg).unwrap();
        for (x, ci) in m.point.iter().zip(&c) {
            prop_assert!((x - ci.clamp(0.0, 255.0)).abs() <= 1e-6);
        }
        prop_assert!(m.trace.is_monotone());
    }

    #[test]
    fn pupil_center_equivariance(cx in 10.0f64..20.0, cy in 10.0f64..20.0, r in 3.0f64..6.0,
                                 dx in 0usize..6, dy in 0usize..6, offset in -20.0f64..20.0) {
        let make = |sx: f64, sy: f64, shade: f64| {
            let inside = move |y: usize, x: usize| (x as f64 - sx).powi(2) + (y as f64 - sy).powi(2) <= r * r;
            let img = ImagePlane::from_fn(32, 32, |y, x| if inside(y, x) { [60.0 + shade; 3] } else { [200.0 + shade; 3] }).unwrap();
            let mask = SegMask::from_fn(32, 32, |y, x| if inside(y, x) { 1.0 } else { 0.0 }).unwrap();
            (img, mask)
        };
        let (a, ma) = make(cx, cy, 0.0);
        let (b, mb) = make(cx + dx as f64, cy + dy as f64, 0.0);
        let (pa, pb) = (pupil_center(&a, &ma, 0).unwrap(), pupil_center(&b, &mb, 0).unwrap());
        prop_assert!((pb.0 - pa.0 - dx as f64).abs() <= 1e-9);
        prop_assert!((pb.1 - pa.1 - dy as f64).abs() <= 1e-9);
        let (c, _) = make(cx, cy, offset);
        let pc = pupil_center(&c, &ma, 0).unwrap();
        prop_assert!((pc.0 - pa.0).hypot(pc.1 - pa.1) <= 0.1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn purify_stays_in_box_and_descends(seed in any::<u64>(), warm in any::<bool>()) {
        let net = default_network(7);
        let pi = RgbMaskPair::new(init_white_noise(16, 16, seed).unwrap(), random_mask(16, 16, 1, seed)).unwrap();
        let ps = RgbMaskPair::new(init_white_noise(16, 16, seed ^ 9).unwrap(), random_mask(16, 16, 1, seed ^ 8)).unwrap();
        let cfg = OptimizerConfig { max_iterations: 15, seed, warm_start: warm, ..OptimizerConfig::default() };
        let r = purify(&pi, &ps, &net, &AttentionSubnet::Passthrough, &LossWeights::default(), &cfg).unwrap();
        prop_assert!(r.image.min_value() >= 0.0 && r.image.max_value() <= 255.0);
        prop_assert!(r.trace.is_monotone());
        prop_assert!(r.trace.steps() <= 15);
        prop_assert_eq!(r.reports.len(), r.trace.records.len());
    }
}
