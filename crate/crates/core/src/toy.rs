//! Deterministic synthetic eye images used as test and benchmark fixtures.
//!
//! The content image is a textured "real" eye with an off-center iris; the
//! style image is a flat-shaded eye with a centered iris. Both masks have a
//! single channel covering the iris and pupil.

use crate::error::Result;
use crate::image_io::{ImagePlane, RgbMaskPair, SegMask};
use crate::rng::Lcg64;

/// Noise seed of the content image texture.
pub const CONTENT_SEED: u64 = 11;
/// Seed of the default network used with the fixtures.
pub const NET_SEED: u64 = 7;
/// Seed of the white-noise starting image.
pub const INIT_SEED: u64 = 3;

/// Geometry of one eye, in fractions of the image side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeShape {
    pub center: (f64, f64),
    pub iris_radius: f64,
    pub pupil_radius: f64,
    /// Semi-axes of the sclera ellipse.
    pub sclera: (f64, f64),
}

impl EyeShape {
    pub const CONTENT: EyeShape = EyeShape {
        center: (0.45, 0.52),
        iris_radius: 0.2,
        pupil_radius: 0.09,
        sclera: (0.42, 0.26),
    };

    pub const STYLE: EyeShape = EyeShape {
        center: (0.5, 0.5),
        iris_radius: 0.22,
        pupil_radius: 0.1,
        sclera: (0.44, 0.28),
    };
}

const SUPERSAMPLE: usize = 4;

/// Fraction of pixel `(y, x)` inside the region, by 4x4 supersampling.
fn coverage(y: usize, x: usize, inside: impl Fn(f64, f64) -> bool) -> f64 {
    let mut hits = 0;
    for sy in 0..SUPERSAMPLE {
        for sx in 0..SUPERSAMPLE {
            let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64;
            let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64;
            if inside(py, px) {
                hits += 1;
            }
        }
    }
    hits as f64 / (SUPERSAMPLE * SUPERSAMPLE) as f64
}

struct Layers {
    sclera: f64,
    iris: f64,
    pupil: f64,
}

fn layers(shape: &EyeShape, size: usize, y: usize, x: usize) -> Layers {
    let s = size as f64;
    let (cx, cy) = (shape.center.0 * s, shape.center.1 * s);
    let disk = |r: f64| move |py: f64, px: f64| (px - cx).powi(2) + (py - cy).powi(2) <= (r * s).powi(2);
    let (ax, ay) = (shape.sclera.0 * s, shape.sclera.1 * s);
    let sclera = |py: f64, px: f64| ((px - s / 2.0) / ax).powi(2) + ((py - s / 2.0) / ay).powi(2) <= 1.0;
    Layers {
        sclera: coverage(y, x, sclera),
        iris: coverage(y, x, disk(shape.iris_radius)),
        pupil: coverage(y, x, disk(shape.pupil_radius)),
    }
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [0, 1, 2].map(|k| a[k] + (b[k] - a[k]) * t)
}

fn iris_mask(shape: &EyeShape, size: usize) -> Result<SegMask> {
    SegMask::from_fn(size, size, |y, x| layers(shape, size, y, x).iris)
}

/// Textured eye with shading, iris striations and pixel noise.
pub fn real_eye(size: usize, seed: u64) -> Result<RgbMaskPair> {
    let shape = EyeShape::CONTENT;
    let mut rng = Lcg64::new(seed);
    let s = size as f64;
    let (cx, cy) = (shape.center.0 * s, shape.center.1 * s);
    let image = ImagePlane::from_fn(size, size, |y, x| {
        let l = layers(&shape, size, y, x);
        let shade = 0.85 + 0.15 * (1.0 - y as f64 / s);
        let skin = [196.0 * shade, 150.0 * shade, 126.0 * shade];
        let sclera = [224.0, 214.0, 206.0];
        let angle = (y as f64 + 0.5 - cy).atan2(x as f64 + 0.5 - cx);
        let stripe = 0.8 + 0.2 * (9.0 * angle).sin();
        let iris = [112.0 * stripe, 78.0 * stripe, 52.0 * stripe];
        let pupil = [22.0, 18.0, 16.0];
        let mut p = mix(skin, sclera, l.sclera);
        p = mix(p, iris, l.iris);
        p = mix(p, pupil, l.pupil);
        let noise = (rng.next_unit() - 0.5) * 12.0;
        p.map(|v| (v + noise).clamp(0.0, 255.0))
    })?;
    RgbMaskPair::new(image, iris_mask(&shape, size)?)
}

/// Flat-shaded eye with a centered iris.
pub fn synthetic_eye(size: usize) -> Result<RgbMaskPair> {
    let shape = EyeShape::STYLE;
    let image = ImagePlane::from_fn(size, size, |y, x| {
        let l = layers(&shape, size, y, x);
        let mut p = mix([210.0, 170.0, 150.0], [245.0, 245.0, 245.0], l.sclera);
        p = mix(p, [70.0, 110.0, 150.0], l.iris);
        mix(p, [8.0, 8.0, 8.0], l.pupil)
    })?;
    RgbMaskPair::new(image, iris_mask(&shape, size)?)
}

/// Content and style pairs of side `size`.
#[derive(Debug, Clone)]
pub struct ToyFixture {
    pub content: RgbMaskPair,
    pub style: RgbMaskPair,
}

pub fn toy_fixture(size: usize) -> Result<ToyFixture> {
    Ok(ToyFixture {
        content: real_eye(size, CONTENT_SEED)?,
        style: synthetic_eye(size)?,
    })
}
