//! Images, segmentation masks and their PNG encodings.
//!
//! Pixels are stored as `f64` in row-major `(y, x, channel)` order with a
//! nominal range of `[0, 255]`. Masks use the same layout with values in
//! `[0, 1]`, one channel per semantic region.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{DynamicImage, GrayImage, RgbImage};

use crate::error::{Error, Result};
use crate::rng::Lcg64;

pub const PIXEL_MIN: f64 = 0.0;
pub const PIXEL_MAX: f64 = 255.0;
pub const MIN_SIDE: usize = 8;

/// Tolerance on the per-pixel channel sum of a soft mask.
const PARTITION_SLACK: f64 = 1e-6;

/// An `H x W x 3` real-valued RGB image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl ImagePlane {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_side(height, width)?;
        if data.len() != height * width * Self::CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x3 image needs {} values, got {}",
                height,
                width,
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(height, width, vec![value; height * width * Self::CHANNELS])
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        check_side(height, width)?;
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(y, x));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Quantize to 8-bit RGB (values are clamped, then rounded).
    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self
            .data
            .iter()
            .map(|&v| v.clamp(PIXEL_MIN, PIXEL_MAX).round() as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        Self::new(
            h as usize,
            w as usize,
            img.as_raw().iter().map(|&b| b as f64).collect(),
        )
    }
}

fn check_side(height: usize, width: usize) -> Result<()> {
    if height < MIN_SIDE || width < MIN_SIDE {
        return Err(Error::InvalidDims(format!(
            "{height}x{width} is smaller than {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    Ok(())
}

/// An `H x W x C` soft segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl SegMask {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidDims("mask needs at least one channel".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "{height}x{width}x{channels} mask needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        for (p, px) in data.chunks_exact(channels).enumerate() {
            if let Some(v) = px.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidValue(format!(
                    "mask value {v} at pixel {p} is outside [0, 1]"
                )));
            }
            let sum: f64 = px.iter().sum();
            if sum > 1.0 + PARTITION_SLACK {
                return Err(Error::InvalidValue(format!(
                    "mask channels sum to {sum} at pixel {p}"
                )));
            }
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// Single-channel mask from a per-pixel predicate.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(height, width, 1, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn value(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Copy one channel out as a row-major `H x W` plane.
    pub fn channel_plane(&self, c: usize) -> Vec<f64> {
        self.data.chunks_exact(self.channels).map(|px| px[c]).collect()
    }
}

/// An image together with its segmentation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbMaskPair {
    image: ImagePlane,
    mask: SegMask,
}

impl RgbMaskPair {
    pub fn new(image: ImagePlane, mask: SegMask) -> Result<Self> {
        if image.height() != mask.height() || image.width() != mask.width() {
            return Err(Error::PairMismatch {
                image_height: image.height(),
                image_width: image.width(),
                mask_height: mask.height(),
                mask_width: mask.width(),
            });
        }
        Ok(Self { image, mask })
    }

    pub fn image(&self) -> &ImagePlane {
        &self.image
    }

    pub fn mask(&self) -> &SegMask {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.image.dims()
    }
}

/// Assignment of mask label values to mask channels.
///
/// A label mapped to `None` is recognised but contributes to no channel
/// (typically the background label 0).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMap {
    entries: Vec<(u32, Option<usize>)>,
}

impl ChannelMap {
    pub fn new(entries: Vec<(u32, Option<usize>)>) -> Result<Self> {
        if !entries.iter().any(|(_, c)| c.is_some()) {
            return Err(Error::Config("channel map assigns no label to a channel".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (label, _) in &entries {
            if !seen.insert(*label) {
                return Err(Error::Config(format!("label {label} mapped twice")));
            }
        }
        Ok(Self { entries })
    }

    pub fn channels(&self) -> usize {
        self.entries
            .iter()
            .filter_map(|(_, c)| *c)
            .max()
            .map_or(0, |m| m + 1)
    }

    pub fn lookup(&self, label: u32) -> Result<Option<usize>> {
        self.entries
            .iter()
            .find(|(l, _)| *l == label)
            .map(|(_, c)| *c)
            .ok_or(Error::UnknownLabel(label))
    }

    pub fn entries(&self) -> &[(u32, Option<usize>)] {
        &self.entries
    }
}

impl Default for ChannelMap {
    /// `0` is background; `1` and `255` (binary masks) select channel 0.
    fn default() -> Self {
        Self {
            entries: vec![(0, None), (1, Some(0)), (255, Some(0))],
        }
    }
}

impl FromStr for ChannelMap {
    type Err = Error;

    /// Parses `label=idx[,label=idx...]`. A label is a decimal gray level or
    /// `#rrggbb`; `idx` is a channel index or `-` to ignore the label.
    fn from_str(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (label, channel) = item
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected label=idx, got {item:?}")))?;
            let label = parse_label(label.trim())?;
            let channel = match channel.trim() {
                "-" | "none" => None,
                c => Some(
                    c.parse::<usize>()
                        .map_err(|_| Error::Config(format!("bad channel index {c:?} in {item:?}")))?,
                ),
            };
            entries.push((label, channel));
        }
        Self::new(entries)
    }
}

impl fmt::Display for ChannelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (label, channel)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match channel {
                Some(c) => write!(f, "{label}={c}")?,
                None => write!(f, "{label}=-")?,
            }
        }
        Ok(())
    }
}

fn parse_label(s: &str) -> Result<u32> {
    if let Some(hex) = s.strip_prefix('#') {
        let v = u32::from_str_radix(hex, 16)
            .ok()
            .filter(|_| hex.len() == 6)
            .ok_or_else(|| Error::Config(format!("bad color label {s:?}")))?;
        return Ok(label_of_rgb([(v >> 16) as u8, (v >> 8) as u8, v as u8]));
    }
    s.parse::<u32>()
        .map_err(|_| Error::Config(format!("bad label {s:?}")))
}

/// Label of an RGB mask pixel: gray pixels carry their gray level, colored
/// pixels the packed `0xRRGGBB` value.
pub fn label_of_rgb([r, g, b]: [u8; 3]) -> u32 {
    if r == g && g == b {
        r as u32
    } else {
        ((r as u32) << 16) | ((g as u32) << 8) | b as u32
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Decode {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
}

pub fn load_image(path: impl AsRef<Path>) -> Result<ImagePlane> {
    let img = open_image(path.as_ref())?;
    ImagePlane::from_rgb8(&img.to_rgb8())
}

/// Decode a label PNG and expand it into a binary mask per the channel map.
pub fn load_mask(path: impl AsRef<Path>, channel_map: &ChannelMap) -> Result<SegMask> {
    let img = open_image(path.as_ref())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let labels: Vec<u32> = if img.color().has_color() {
        img.to_rgb8().pixels().map(|p| label_of_rgb(p.0)).collect()
    } else {
        img.to_luma8().as_raw().iter().map(|&v| v as u32).collect()
    };
    mask_from_labels(h, w, &labels, channel_map)
}

pub fn mask_from_labels(
    height: usize,
    width: usize,
    labels: &[u32],
    channel_map: &ChannelMap,
) -> Result<SegMask> {
    let channels = channel_map.channels();
    let mut data = vec![0.0; height * width * channels];
    for (p, &label) in labels.iter().enumerate() {
        if let Some(c) = channel_map.lookup(label)? {
            data[p * channels + c] = 1.0;
        }
    }
    SegMask::new(height, width, channels, data)
}

pub fn load_rgb_mask_pair(
    image_path: impl AsRef<Path>,
    mask_path: impl AsRef<Path>,
    channel_map: &ChannelMap,
) -> Result<RgbMaskPair> {
    let image = load_image(image_path)?;
    let mask = load_mask(mask_path, channel_map)?;
    RgbMaskPair::new(image, mask)
}

pub fn save_image(image: &ImagePlane, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image
        .to_rgb8()
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::io(path, std::io::Error::other(other.to_string())),
        })
}

/// Write an 8-bit grayscale label image.
pub fn save_labels(height: usize, width: usize, labels: &[u8], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let img = GrayImage::from_raw(width as u32, height as u32, labels.to_vec())
        .ok_or_else(|| Error::ShapeMismatch("label buffer does not match dimensions".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))
}

/// I.i.d. uniform `[0, 255]` noise drawn from [`Lcg64`] seeded with `seed`.
pub fn init_white_noise(height: usize, width: usize, seed: u64) -> Result<ImagePlane> {
    check_side(height, width)?;
    let mut rng = Lcg64::new(seed);
    let data = (0..height * width * 3).map(|_| rng.next_pixel()).collect();
    ImagePlane::new(height, width, data)
}

pub fn project_pixels(image: &ImagePlane) -> ImagePlane {
    let mut out = image.clone();
    clamp_to_box(out.data_mut());
    out
}

pub(crate) fn clamp_to_box(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(PIXEL_MIN, PIXEL_MAX);
    }
}
