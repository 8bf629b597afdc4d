//! Browser demo: purify the toy eye fixture step by step.
//!
//! [`Session`] holds the logic and runs natively; [`Demo`] is its thin
//! JavaScript binding.

use std::sync::OnceLock;

use mgst_core::attention::AttentionSubnet;
use mgst_core::eval::preserve_check;
use mgst_core::image_io::{ImagePlane, RgbMaskPair};
use mgst_core::loss::{LossWeights, Objective};
use mgst_core::net::{default_network, NetworkSpec};
use mgst_core::optim::{initial_image, Bounds, OptimizerConfig, PixelCost, ProjectedLbfgs, Status};
use mgst_core::toy::{toy_fixture, NET_SEED};
use mgst_core::Result;
use wasm_bindgen::prelude::*;

fn network() -> &'static NetworkSpec {
    static NET: OnceLock<NetworkSpec> = OnceLock::new();
    NET.get_or_init(|| default_network(NET_SEED))
}

/// Which image of the fixture to show.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum View {
    Content,
    Style,
    Output,
}

impl View {
    fn parse(name: &str) -> Option<Self> {
        match name {
            "content" => Some(View::Content),
            "style" => Some(View::Style),
            "output" => Some(View::Output),
            _ => None,
        }
    }
}

/// Attention of one mask channel at one tap layer, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub layer: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

/// Loss terms of the current iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Terms {
    pub content: f64,
    pub style: f64,
    pub tv: f64,
    pub total: f64,
}

pub struct Session {
    content: RgbMaskPair,
    style: RgbMaskPair,
    weights: LossWeights,
    config: OptimizerConfig,
    solver: ProjectedLbfgs<PixelCost<'static>>,
    status: Option<Status>,
}

impl Session {
    pub fn new(size: usize, seed: u64) -> Result<Self> {
        let fixture = toy_fixture(size)?;
        let weights = LossWeights::default();
        let config = OptimizerConfig {
            seed,
            max_iterations: usize::MAX,
            ..OptimizerConfig::default()
        };
        let x0 = initial_image(&fixture.content, &config)?.into_data();
        let solver = Self::solver(&fixture.content, &fixture.style, &weights, &config, x0)?;
        Ok(Self {
            content: fixture.content,
            style: fixture.style,
            weights,
            config,
            solver,
            status: None,
        })
    }

    fn solver(
        content: &RgbMaskPair,
        style: &RgbMaskPair,
        weights: &LossWeights,
        config: &OptimizerConfig,
        x0: Vec<f64>,
    ) -> Result<ProjectedLbfgs<PixelCost<'static>>> {
        let objective = Objective::new(content, style, network(), &AttentionSubnet::Passthrough, weights)?;
        ProjectedLbfgs::new(PixelCost::new(objective), x0, Bounds::PIXELS, config.clone())
    }

    /// Change the loss weights and keep optimizing from the current image.
    /// The L-BFGS history is dropped since the objective changed.
    pub fn set_weights(&mut self, weights: LossWeights) -> Result<()> {
        weights.validate()?;
        let x = self.solver.point().to_vec();
        self.solver = Self::solver(&self.content, &self.style, &weights, &self.config, x)?;
        self.weights = weights;
        self.status = None;
        Ok(())
    }

    /// Restart from noise drawn with `seed`, or from the content image.
    pub fn restart(&mut self, seed: u64, warm: bool) -> Result<()> {
        self.config.seed = seed;
        self.config.warm_start = warm;
        let x0 = initial_image(&self.content, &self.config)?.into_data();
        self.solver = Self::solver(&self.content, &self.style, &self.weights, &self.config, x0)?;
        self.status = None;
        Ok(())
    }

    /// Run up to `n` iterations; stops early once the solver finishes.
    pub fn step(&mut self, n: usize) -> Result<Option<Status>> {
        for _ in 0..n {
            if self.status.is_some() {
                break;
            }
            self.status = self.solver.step()?;
        }
        Ok(self.status)
    }

    pub fn iteration(&self) -> usize {
        self.solver.iteration()
    }

    pub fn status(&self) -> Option<Status> {
        self.status
    }

    pub fn weights(&self) -> &LossWeights {
        &self.weights
    }

    pub fn losses(&self) -> Vec<f64> {
        self.solver.trace().losses()
    }

    pub fn terms(&self) -> Terms {
        let r = &self.solver.current().report;
        Terms {
            content: r.content(),
            style: r.style(),
            tv: r.theta * r.tv,
            total: r.total,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.content.dims()
    }

    pub fn output(&self) -> Result<ImagePlane> {
        let (h, w) = self.dims();
        ImagePlane::new(h, w, self.solver.point().to_vec())
    }

    pub fn image(&self, view: View) -> Result<ImagePlane> {
        match view {
            View::Content => Ok(self.content.image().clone()),
            View::Style => Ok(self.style.image().clone()),
            View::Output => self.output(),
        }
    }

    /// Pupil-center shift of the output against the content, in pixels.
    pub fn pupil_shift(&self) -> Result<f64> {
        Ok(preserve_check(&self.content, &self.output()?, 0, None)?.shift)
    }

    /// Attention maps of the content (`style == false`) or style pair at
    /// every tap layer.
    pub fn attention(&self, style: bool) -> Result<Vec<AttentionMap>> {
        let pair = if style { &self.style } else { &self.content };
        let masks = network().downsample_mask(pair.mask())?;
        Ok(masks
            .taps
            .iter()
            .map(|t| AttentionMap {
                layer: t.layer,
                height: t.map.height(),
                width: t.map.width(),
                values: t.map.row(0).to_vec(),
            })
            .collect())
    }
}

/// Interleaved RGB in [0, 255] to RGBA bytes.
pub fn to_rgba(image: &ImagePlane) -> Vec<u8> {
    image
        .data()
        .chunks_exact(3)
        .flat_map(|p| {
            [p[0], p[1], p[2]]
                .map(|v| v.round().clamp(0.0, 255.0) as u8)
                .into_iter()
                .chain([255])
        })
        .collect()
}

/// Scalar map in [0, 1] to grayscale RGBA bytes.
pub fn gray_rgba(values: &[f64]) -> Vec<u8> {
    values
        .iter()
        .flat_map(|&v| {
            let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
            [g, g, g, 255]
        })
        .collect()
}

type JsResult<T> = std::result::Result<T, JsError>;

fn js(e: mgst_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct Demo {
    session: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(size: usize, seed: u64) -> JsResult<Demo> {
        Ok(Demo {
            session: Session::new(size, seed).map_err(js)?,
        })
    }

    pub fn width(&self) -> usize {
        self.session.dims().1
    }

    pub fn height(&self) -> usize {
        self.session.dims().0
    }

    /// Runs `n` iterations and returns the status, or "running".
    pub fn step(&mut self, n: usize) -> JsResult<String> {
        Ok(match self.session.step(n).map_err(js)? {
            Some(s) => s.to_string(),
            None => "running".into(),
        })
    }

    #[wasm_bindgen(js_name = setWeights)]
    pub fn set_weights(
        &mut self,
        alpha: f64,
        beta: f64,
        lambda_g: f64,
        lambda_l: f64,
        theta: f64,
    ) -> JsResult<()> {
        let w = LossWeights {
            alpha,
            beta,
            lambda_global: lambda_g,
            lambda_local: lambda_l,
            theta,
            ..self.session.weights().clone()
        };
        self.session.set_weights(w).map_err(js)
    }

    pub fn restart(&mut self, seed: u64, warm: bool) -> JsResult<()> {
        self.session.restart(seed, warm).map_err(js)
    }

    pub fn iteration(&self) -> usize {
        self.session.iteration()
    }

    /// Loss after each iteration, starting with the initial image.
    pub fn losses(&self) -> Vec<f64> {
        self.session.losses()
    }

    /// `[content, style, tv, total]` of the current image.
    pub fn terms(&self) -> Vec<f64> {
        let t = self.session.terms();
        vec![t.content, t.style, t.tv, t.total]
    }

    /// RGBA bytes of "content", "style" or "output".
    pub fn rgba(&self, view: &str) -> JsResult<Vec<u8>> {
        let v = View::parse(view).ok_or_else(|| JsError::new(&format!("unknown view {view:?}")))?;
        Ok(to_rgba(&self.session.image(v).map_err(js)?))
    }

    #[wasm_bindgen(js_name = pupilShift)]
    pub fn pupil_shift(&self) -> JsResult<f64> {
        self.session.pupil_shift().map_err(js)
    }

    /// Number of tap layers in the attention viewer.
    #[wasm_bindgen(js_name = tapCount)]
    pub fn tap_count(&self) -> usize {
        network().tap_layers().len()
    }

    /// `[layer, height, width]` of tap `k`.
    #[wasm_bindgen(js_name = tapShape)]
    pub fn tap_shape(&self, k: usize) -> JsResult<Vec<usize>> {
        let a = self.session.attention(false).map_err(js)?;
        let m = a.get(k).ok_or_else(|| JsError::new("no such tap"))?;
        Ok(vec![m.layer, m.height, m.width])
    }

    /// Grayscale RGBA of the attention map at tap `k`.
    #[wasm_bindgen(js_name = attentionRgba)]
    pub fn attention_rgba(&self, k: usize, style: bool) -> JsResult<Vec<u8>> {
        let a = self.session.attention(style).map_err(js)?;
        let m = a.get(k).ok_or_else(|| JsError::new("no such tap"))?;
        Ok(gray_rgba(&m.values))
    }
}
