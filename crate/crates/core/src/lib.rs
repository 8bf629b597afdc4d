//! Mask-guided style transfer for purifying real images toward a synthetic
//! style reference.
//!
//! An output image is synthesized by projected L-BFGS over raw pixels,
//! minimizing content losses against the input image and style (Gram)
//! losses against the style image, each split by segmentation masks into an
//! attention region and a background region.

pub mod attention;
pub mod error;
pub mod eval;
pub mod image_io;
pub mod loss;
pub mod net;
pub mod optim;
pub mod rng;
pub mod toy;
pub mod weights;

pub use error::{Error, Result};
