use mgst_core::image_io::{
    init_white_noise, load_image, load_mask, load_rgb_mask_pair, project_pixels, save_image, save_labels,
    ChannelMap, ImagePlane,
};
use mgst_core::net::{default_network, LayerSpec};
use mgst_core::weights::{load_weights, write_weights};
use mgst_core::Error;

const DEFAULT_WEIGHTS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/default-seed7.mgstw");

#[test]
fn png_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.png");
    let mut img = init_white_noise(16, 24, 9).unwrap();
    img.data_mut()[0] = -12.0;
    img.data_mut()[1] = 300.0;
    let img = project_pixels(&img);
    save_image(&img, &path).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!(back.dims(), (16, 24));
    let err = img
        .data()
        .iter()
        .zip(back.data())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(err <= 0.5, "max error {err}");
}

#[test]
fn constant_128_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gray.png");
    save_image(&ImagePlane::filled(8, 8, 128.0).unwrap(), &path).unwrap();
    assert!(load_image(&path).unwrap().data().iter().all(|&v| v == 128.0));
}

#[test]
fn unwritable_path_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing-dir").join("out.png");
    let err = save_image(&ImagePlane::filled(8, 8, 1.0).unwrap(), &path).unwrap_err();
    assert!(matches!(err, Error::Io { .. }), "{err:?}");
    assert!(err.to_string().contains("missing-dir"));
}

#[test]
fn missing_file_names_the_path() {
    let err = load_image("/nonexistent/eye.png").unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/eye.png"));
}

#[test]
fn label_png_relabels_to_binary_channel() {
    let dir = tempfile::tempdir().unwrap();
    let (img_path, mask_path) = (dir.path().join("i.png"), dir.path().join("m.png"));
    save_image(&init_white_noise(64, 64, 1).unwrap(), &img_path).unwrap();
    let labels: Vec<u8> = (0..64 * 64).map(|p| u8::from((p % 64) < 20)).collect();
    save_labels(64, 64, &labels, &mask_path).unwrap();
    let map: ChannelMap = "0=-,1=0".parse().unwrap();
    let pair = load_rgb_mask_pair(&img_path, &mask_path, &map).unwrap();
    assert_eq!(pair.mask().channels(), 1);
    for y in 0..64 {
        for x in 0..64 {
            assert_eq!(pair.mask().value(y, x, 0), if x < 20 { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn pair_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (img_path, mask_path) = (dir.path().join("i.png"), dir.path().join("m.png"));
    save_image(&init_white_noise(64, 64, 1).unwrap(), &img_path).unwrap();
    save_labels(32, 32, &[1; 32 * 32], &mask_path).unwrap();
    let err = load_rgb_mask_pair(&img_path, &mask_path, &ChannelMap::default()).unwrap_err();
    assert!(matches!(
        err,
        Error::PairMismatch {
            image_height: 64,
            image_width: 64,
            mask_height: 32,
            mask_width: 32
        }
    ));
}

#[test]
fn unknown_label() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.png");
    let mut labels = vec![0u8; 64];
    labels[10] = 7;
    save_labels(8, 8, &labels, &path).unwrap();
    let map: ChannelMap = "0=-,1=0".parse().unwrap();
    assert!(matches!(load_mask(&path, &map), Err(Error::UnknownLabel(7))));
}

#[test]
fn shipped_default_weights() {
    let spec = load_weights(DEFAULT_WEIGHTS).unwrap();
    assert_eq!(spec, default_network(7));
    let convs = spec
        .layers()
        .iter()
        .filter(|l| matches!(l, LayerSpec::Conv(_)))
        .count();
    assert_eq!((spec.layers().len(), convs), (12, 5));
}

#[test]
fn weights_file_round_trip_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.mgstw");
    let spec = default_network(123);
    write_weights(&spec, None, &path).unwrap();
    assert_eq!(load_weights(&path).unwrap(), spec);
    std::fs::write(&path, b"XXXXXXXX").unwrap();
    assert!(matches!(load_weights(&path), Err(Error::Format(_))));
}
