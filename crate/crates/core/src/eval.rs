//! Evaluation tools: pupil-center preservation, gradient checking and the
//! resolution benchmark.

use std::fmt::Write as _;
use std::time::Instant;

use crate::attention::AttentionSubnet;
use crate::error::{Error, Result};
use crate::image_io::{init_white_noise, ImagePlane, RgbMaskPair, SegMask};
use crate::loss::{tv_loss, LossReport, LossWeights, Objective};
use crate::net::default_network;
use crate::optim::{purify, OptimizerConfig};
use crate::rng::Lcg64;
use crate::toy::toy_fixture;

pub fn luminance([r, g, b]: [f64; 3]) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// Centroid `(x, y)` of darkness `255 - luminance` weighted by mask channel
/// `channel`. Coordinates are pixel centers: the top-left pixel is `(0, 0)`.
/// A region with mass but no darkness falls back to the plain mask centroid.
pub fn pupil_center(image: &ImagePlane, mask: &SegMask, channel: usize) -> Result<(f64, f64)> {
    if (image.height(), image.width()) != (mask.height(), mask.width()) {
        return Err(Error::PairMismatch {
            image_height: image.height(),
            image_width: image.width(),
            mask_height: mask.height(),
            mask_width: mask.width(),
        });
    }
    if channel >= mask.channels() {
        return Err(Error::InvalidValue(format!(
            "mask channel {channel} out of range, mask has {}",
            mask.channels()
        )));
    }
    let (mut wsum, mut wx, mut wy) = (0.0, 0.0, 0.0);
    let (mut msum, mut mx, mut my) = (0.0, 0.0, 0.0);
    for y in 0..image.height() {
        for x in 0..image.width() {
            let m = mask.value(y, x, channel);
            if m == 0.0 {
                continue;
            }
            let w = m * (255.0 - luminance(image.pixel(y, x))).max(0.0);
            wsum += w;
            wx += w * x as f64;
            wy += w * y as f64;
            msum += m;
            mx += m * x as f64;
            my += m * y as f64;
        }
    }
    if msum <= 0.0 {
        return Err(Error::EmptyRegion(channel));
    }
    if wsum > 0.0 {
        Ok((wx / wsum, wy / wsum))
    } else {
        Ok((mx / msum, my / msum))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PupilCenterResult {
    pub center_before: (f64, f64),
    pub center_after: (f64, f64),
    /// Euclidean distance in pixels.
    pub shift: f64,
    pub eye_width: f64,
}

impl PupilCenterResult {
    pub fn normalized_shift(&self) -> f64 {
        self.shift / self.eye_width
    }
}

/// Pupil-center shift between `before` and `after`, both measured with the
/// mask of `before`. `eye_width` defaults to the image width.
pub fn preserve_check(
    before: &RgbMaskPair,
    after: &ImagePlane,
    channel: usize,
    eye_width: Option<f64>,
) -> Result<PupilCenterResult> {
    if after.dims() != before.dims() {
        let (h, w) = before.dims();
        return Err(Error::ShapeMismatch(format!(
            "after image is {}x{}, before is {h}x{w}",
            after.height(),
            after.width()
        )));
    }
    let a = pupil_center(before.image(), before.mask(), channel)?;
    let b = pupil_center(after, before.mask(), channel)?;
    Ok(PupilCenterResult {
        center_before: a,
        center_after: b,
        shift: (a.0 - b.0).hypot(a.1 - b.1),
        eye_width: eye_width.unwrap_or(before.dims().1 as f64),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub mask_channels: usize,
    /// Central-difference half step in pixel units.
    pub step: f64,
    pub weights: LossWeights,
    /// When a probe at `x +- step` changes the ReLU activation pattern, the
    /// difference straddles a kink; retry that coordinate with the step
    /// divided by 10 until the pattern is stable or `min_step` is reached.
    pub kink_aware: bool,
    pub min_step: f64,
    /// Subtract twice the TV gradient from the analytic gradient, flipping
    /// its sign. Used to confirm the check catches a wrong gradient.
    pub corrupt_tv: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            height: 16,
            width: 16,
            mask_channels: 1,
            step: 1e-2,
            weights: LossWeights::default(),
            kink_aware: true,
            min_step: 1e-6,
            corrupt_tv: false,
        }
    }
}

/// Error of one gradient compared against its finite-difference estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientError {
    pub name: &'static str,
    pub max_abs_error: f64,
    /// `max |a - n| / max(|a|_inf, |n|_inf)`, or 0 when both gradients vanish.
    pub max_rel_error: f64,
    pub analytic_inf: f64,
    pub numeric_inf: f64,
    pub worst_index: usize,
}

impl GradientError {
    pub fn compare(name: &'static str, analytic: &[f64], numeric: &[f64]) -> Self {
        let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let (analytic_inf, numeric_inf) = (inf(analytic), inf(numeric));
        let (mut max_abs_error, mut worst_index) = (0.0, 0);
        for (k, (a, n)) in analytic.iter().zip(numeric).enumerate() {
            let e = (a - n).abs();
            if e > max_abs_error {
                max_abs_error = e;
                worst_index = k;
            }
        }
        let scale = analytic_inf.max(numeric_inf);
        GradientError {
            name,
            max_abs_error,
            max_rel_error: if scale > 0.0 { max_abs_error / scale } else { 0.0 },
            analytic_inf,
            numeric_inf,
            worst_index,
        }
    }
}

/// The total objective is checked along with its content, style and TV
/// parts, each against its own scale, so that an error in a small term is
/// not hidden by a large one.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub coordinates: usize,
    /// Coordinates whose step had to be reduced to avoid a ReLU kink.
    pub kink_adjusted: usize,
    pub smallest_step: f64,
    pub total: GradientError,
    pub parts: Vec<GradientError>,
}

impl GradcheckReport {
    /// Largest relative error over the total and every part.
    pub fn max_rel_error(&self) -> f64 {
        self.parts
            .iter()
            .fold(self.total.max_rel_error, |m, p| m.max(p.max_rel_error))
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() <= tolerance
    }
}

/// Random content, style and output images with random soft masks of
/// `channels` channels, all derived from `seed`.
pub fn gradcheck_instance(
    seed: u64,
    height: usize,
    width: usize,
    channels: usize,
) -> Result<(RgbMaskPair, RgbMaskPair, ImagePlane)> {
    if channels == 0 {
        return Err(Error::InvalidValue("mask needs at least one channel".into()));
    }
    let mut rng = Lcg64::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5EED);
    let mut mask = || -> Result<SegMask> {
        let disks: Vec<(f64, f64, f64)> = (0..channels)
            .map(|_| {
                let (cy, cx) = (rng.next_unit() * height as f64, rng.next_unit() * width as f64);
                (cy, cx, (0.2 + 0.3 * rng.next_unit()) * height.min(width) as f64)
            })
            .collect();
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                let v: Vec<f64> = disks
                    .iter()
                    .map(|&(cy, cx, r)| {
                        let d = ((y as f64 - cy).powi(2) + (x as f64 - cx).powi(2)).sqrt();
                        (1.5 - d / r).clamp(0.0, 1.0)
                    })
                    .collect();
                let total: f64 = v.iter().sum();
                data.extend(v.iter().map(|a| if total > 1.0 { a / total } else { *a }));
            }
        }
        SegMask::new(height, width, channels, data)
    };
    let (mi, ms) = (mask()?, mask()?);
    let base = seed.wrapping_mul(4);
    let pi = RgbMaskPair::new(init_white_noise(height, width, base + 1)?, mi)?;
    let ps = RgbMaskPair::new(init_white_noise(height, width, base + 2)?, ms)?;
    let o = init_white_noise(height, width, base + 3)?;
    Ok((pi, ps, o))
}

/// Compare analytic gradients with central differences at every pixel
/// coordinate of a random instance.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    if config.height > 32 || config.width > 32 {
        return Err(Error::InvalidDims(format!(
            "gradient check is limited to 32x32, got {}x{}",
            config.height, config.width
        )));
    }
    if [config.step, config.min_step]
        .iter()
        .any(|s| s.is_nan() || *s <= 0.0)
    {
        return Err(Error::InvalidValue(
            "finite-difference steps must be positive".into(),
        ));
    }
    let spec = default_network(config.seed);
    let subnet = AttentionSubnet::Passthrough;
    let (pi, ps, o) = gradcheck_instance(config.seed, config.height, config.width, config.mask_channels)?;
    let w = &config.weights;
    let only = |alpha: bool, beta: bool, theta: bool| LossWeights {
        alpha: if alpha { w.alpha } else { 0.0 },
        beta: if beta { w.beta } else { 0.0 },
        theta: if theta { w.theta } else { 0.0 },
        ..w.clone()
    };

    let objective = Objective::new(&pi, &ps, &spec, &subnet, w)?;
    let mut analytic = vec![objective.evaluate(&o)?.1];
    for part in [
        only(true, false, false),
        only(false, true, false),
        only(false, false, true),
    ] {
        analytic.push(Objective::new(&pi, &ps, &spec, &subnet, &part)?.evaluate(&o)?.1);
    }
    if config.corrupt_tv {
        let (_, tv_grad) = tv_loss(&o);
        for g in [0, 3] {
            for (a, t) in analytic[g].iter_mut().zip(&tv_grad) {
                *a -= 2.0 * w.theta * t;
            }
        }
    }

    let values = |r: &LossReport| [r.total, r.content(), r.style(), r.theta * r.tv];
    let (_, base_pattern) = objective.probe(&o)?;
    let mut numeric = vec![vec![0.0; o.data().len()]; 4];
    let mut probe = o.clone();
    let (mut kink_adjusted, mut smallest_step) = (0, config.step);
    for k in 0..o.data().len() {
        let x = o.data()[k];
        let mut h = config.step;
        let (fp, fm) = loop {
            probe.data_mut()[k] = x + h;
            let (rp, pp) = objective.probe(&probe)?;
            probe.data_mut()[k] = x - h;
            let (rm, pm) = objective.probe(&probe)?;
            let stable = pp == base_pattern && pm == base_pattern;
            if stable || !config.kink_aware || h / 10.0 < config.min_step {
                break (values(&rp), values(&rm));
            }
            h /= 10.0;
        };
        probe.data_mut()[k] = x;
        if h < config.step {
            kink_adjusted += 1;
            smallest_step = smallest_step.min(h);
        }
        for (g, n) in numeric.iter_mut().enumerate() {
            n[k] = (fp[g] - fm[g]) / (2.0 * h);
        }
    }

    let names = ["total", "content", "style", "tv"];
    let mut errors = names
        .iter()
        .zip(analytic.iter().zip(&numeric))
        .map(|(name, (a, n))| GradientError::compare(name, a, n));
    Ok(GradcheckReport {
        coordinates: o.data().len(),
        kink_adjusted,
        smallest_step,
        total: errors.next().expect("four entries"),
        parts: errors.collect(),
    })
}

/// Method variants timed by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Global terms only, as in classic Gram-based transfer.
    Global,
    /// Global and region-local terms.
    MaskGuided,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Global, Method::MaskGuided];

    pub fn name(self) -> &'static str {
        match self {
            Method::Global => "global",
            Method::MaskGuided => "mask-guided",
        }
    }

    fn weights(self, base: &LossWeights) -> LossWeights {
        match self {
            Method::Global => LossWeights {
                lambda_local: 0.0,
                ..base.clone()
            },
            Method::MaskGuided => base.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub resolutions: Vec<usize>,
    pub repetitions: usize,
    /// Optimizer iterations per run.
    pub iterations: usize,
    pub net_seed: u64,
    pub seed: u64,
    pub weights: LossWeights,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![64, 128, 256],
            repetitions: 3,
            iterations: 5,
            net_seed: crate::toy::NET_SEED,
            seed: crate::toy::INIT_SEED,
            weights: LossWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub mean: f64,
    pub std: f64,
}

impl Timing {
    /// Mean and sample standard deviation (0 for a single sample).
    pub fn of(samples: &[f64]) -> Timing {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Timing { mean, std }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkCell {
    pub per_iteration: Timing,
    pub per_run: Timing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub method: Method,
    /// One cell per resolution.
    pub cells: Vec<BenchmarkCell>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub resolutions: Vec<usize>,
    pub rows: Vec<BenchmarkRow>,
}

pub const BENCHMARK_METRICS: [&str; 4] = [
    "sec_per_iter_mean",
    "sec_per_iter_std",
    "sec_per_run_mean",
    "sec_per_run_std",
];

impl BenchmarkTable {
    fn metric_rows(&self) -> Vec<(String, &'static str, Vec<f64>)> {
        let mut out = Vec::new();
        for row in &self.rows {
            for (k, metric) in BENCHMARK_METRICS.iter().enumerate() {
                let values = row
                    .cells
                    .iter()
                    .map(|c| match k {
                        0 => c.per_iteration.mean,
                        1 => c.per_iteration.std,
                        2 => c.per_run.mean,
                        _ => c.per_run.std,
                    })
                    .collect();
                out.push((row.method.name().to_string(), *metric, values));
            }
        }
        out
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["method".to_string(), "metric".to_string()];
        h.extend(self.resolutions.iter().map(|r| format!("{r}x{r}")));
        h
    }

    /// `method,metric,<R>x<R>,...` followed by four rows per method.
    pub fn to_csv(&self) -> String {
        let mut s = self.header().join(",");
        s.push('\n');
        for (method, metric, values) in self.metric_rows() {
            let _ = write!(s, "{method},{metric}");
            for v in values {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![self.header()];
        for (method, metric, values) in self.metric_rows() {
            let mut r = vec![method, metric.to_string()];
            r.extend(values.iter().map(|v| format!("{v:.4}")));
            rows.push(r);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut s = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (v, &w))| {
                    if c < 2 {
                        format!("{v:<w$}")
                    } else {
                        format!("{v:>w$}")
                    }
                })
                .collect();
            s.push_str(line.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}

/// Time full purification runs on the toy fixture at each resolution. Runs
/// are serial so they do not disturb each other's timings.
pub fn benchmark(config: &BenchmarkConfig) -> Result<BenchmarkTable> {
    if config.repetitions == 0 {
        return Err(Error::Config("benchmark needs at least one repetition".into()));
    }
    if config.resolutions.is_empty() {
        return Err(Error::Config("benchmark needs at least one resolution".into()));
    }
    let spec = default_network(config.net_seed);
    let divisor = spec.size_divisor();
    if let Some(&r) = config.resolutions.iter().find(|&&r| r % divisor != 0 || r < 8) {
        return Err(Error::IndivisibleDims {
            height: r,
            width: r,
            divisor,
        });
    }
    let optimizer = OptimizerConfig {
        max_iterations: config.iterations,
        seed: config.seed,
        ..OptimizerConfig::default()
    };
    let fixtures = config
        .resolutions
        .iter()
        .map(|&r| toy_fixture(r))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for method in Method::ALL {
        let weights = method.weights(&config.weights);
        let mut cells = Vec::new();
        for fixture in &fixtures {
            let (mut per_iter, mut per_run) = (Vec::new(), Vec::new());
            for _ in 0..config.repetitions {
                let start = Instant::now();
                let result = purify(
                    &fixture.content,
                    &fixture.style,
                    &spec,
                    &AttentionSubnet::Passthrough,
                    &weights,
                    &optimizer,
                )?;
                let secs = start.elapsed().as_secs_f64();
                per_run.push(secs);
                per_iter.push(secs / result.trace.steps().max(1) as f64);
            }
            cells.push(BenchmarkCell {
                per_iteration: Timing::of(&per_iter),
                per_run: Timing::of(&per_run),
            });
        }
        rows.push(BenchmarkRow { method, cells });
    }
    Ok(BenchmarkTable {
        resolutions: config.resolutions.clone(),
        rows,
    })
}
