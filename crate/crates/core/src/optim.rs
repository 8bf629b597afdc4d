//! Projected L-BFGS over a box.
//!
//! Every trial point is clamped into the box before the objective is
//! evaluated; a step is accepted when the Armijo condition holds on the
//! projected point. Curvature pairs with `s.y <= 1e-10` are discarded.

use std::collections::VecDeque;
use std::fmt;

use crate::attention::AttentionSubnet;
use crate::error::{Error, Result};
use crate::image_io::{init_white_noise, ImagePlane, RgbMaskPair, PIXEL_MAX, PIXEL_MIN};
use crate::loss::{LossReport, LossWeights, Objective};
use crate::net::NetworkSpec;

const CURVATURE_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Number of curvature pairs kept.
    pub history: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Stop when the loss fell by less than this fraction over `window` iterations.
    pub rel_tolerance: f64,
    pub window: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub grad_tolerance: f64,
    /// Largest coordinate change of the first trial step while the history
    /// is empty.
    pub initial_step: f64,
    /// Multiplier of the steepest-descent rescue step after a failed search.
    pub fallback_step: f64,
    pub seed: u64,
    /// Start from the content image instead of white noise.
    pub warm_start: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            history: 10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 20,
            rel_tolerance: 1e-7,
            window: 10,
            grad_tolerance: 1e-8,
            initial_step: 10.0,
            fallback_step: 1e-3,
            seed: 0,
            warm_start: false,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if self.history == 0 {
            return Err(Error::Config("history size must be >= 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("backtrack factor must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config("armijo constant must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const PIXELS: Bounds = Bounds {
        lower: PIXEL_MIN,
        upper: PIXEL_MAX,
    };

    pub fn project(&self, x: &mut [f64]) {
        for v in x {
            *v = v.clamp(self.lower, self.upper);
        }
    }

    /// Zero the gradient components that push against an active bound.
    pub fn project_gradient(&self, x: &[f64], g: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(g)
            .map(|(&xi, &gi)| {
                if (xi <= self.lower && gi > 0.0) || (xi >= self.upper && gi < 0.0) {
                    0.0
                } else {
                    gi
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    MaxIterations,
    Stalled,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Converged => "converged",
            Status::MaxIterations => "max-iterations",
            Status::Stalled => "stalled",
        })
    }
}

/// Value, gradient and an arbitrary report of one objective evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation<R> {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub report: R,
}

pub trait CostFunction {
    type Report: Clone;

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation<Self::Report>>;
}

/// Closure adaptor for objectives without a report.
pub struct FnCost<F>(pub F);

impl<F> CostFunction for FnCost<F>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    type Report = ();

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation<()>> {
        let (value, gradient) = (self.0)(x);
        Ok(Evaluation {
            value,
            gradient,
            report: (),
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[derive(Debug, Clone)]
struct CurvaturePair {
    s: Vec<f64>,
    y: Vec<f64>,
    rho: f64,
}

/// Bounded store of the most recent curvature pairs.
#[derive(Debug, Clone)]
pub struct LbfgsHistory {
    capacity: usize,
    pairs: VecDeque<CurvaturePair>,
}

impl LbfgsHistory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            pairs: VecDeque::with_capacity(capacity),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Store `(s, y)` unless `s.y <= 1e-10`; returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !sy.is_finite() || sy <= CURVATURE_EPS {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back(CurvaturePair { s, y, rho: 1.0 / sy });
        true
    }

    /// Two-loop recursion: approximate inverse Hessian times `g`, with the
    /// initial matrix scaled by `s.y / y.y` of the newest pair.
    pub fn apply_inverse_hessian(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for p in self.pairs.iter().rev() {
            let a = p.rho * dot(&p.s, &q);
            for (qi, yi) in q.iter_mut().zip(&p.y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some(p) = self.pairs.back() {
            let gamma = 1.0 / (p.rho * dot(&p.y, &p.y));
            for qi in &mut q {
                *qi *= gamma;
            }
        }
        for (p, a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = p.rho * dot(&p.y, &q);
            for (qi, si) in q.iter_mut().zip(&p.s) {
                *qi += (a - b) * si;
            }
        }
        q
    }
}

/// Search direction at `point`. Coordinates held at an active bound do not
/// move; if the quasi-Newton direction is not a descent direction the
/// projected steepest-descent direction is returned instead.
pub fn lbfgs_step(history: &LbfgsHistory, gradient: &[f64], point: &[f64], bounds: Bounds) -> Vec<f64> {
    let pg = bounds.project_gradient(point, gradient);
    let steepest = || pg.iter().map(|g| -g).collect::<Vec<f64>>();
    if history.is_empty() {
        return steepest();
    }
    let mut d: Vec<f64> = history.apply_inverse_hessian(&pg).iter().map(|v| -v).collect();
    for (di, gi) in d.iter_mut().zip(&pg) {
        if *gi == 0.0 {
            *di = 0.0;
        }
    }
    let slope = dot(&d, gradient);
    if slope < 0.0 && slope.is_finite() {
        d
    } else {
        steepest()
    }
}

/// An accepted trial point.
#[derive(Debug, Clone)]
pub struct Accepted<R> {
    pub point: Vec<f64>,
    pub evaluation: Evaluation<R>,
    pub step: f64,
}

/// Backtracking Armijo search along `direction` with projection of every
/// trial point; fails with [`Error::LineSearchFailed`] after the configured
/// number of backtracks.
pub fn project_and_accept<C: CostFunction>(
    cost: &mut C,
    point: &[f64],
    current: &Evaluation<C::Report>,
    direction: &[f64],
    initial_step: f64,
    bounds: Bounds,
    config: &OptimizerConfig,
) -> Result<Accepted<C::Report>> {
    let mut step = initial_step;
    let mut candidate = vec![0.0; point.len()];
    for _ in 0..=config.max_backtracks {
        for ((c, &x), &d) in candidate.iter_mut().zip(point).zip(direction) {
            *c = x + step * d;
        }
        bounds.project(&mut candidate);
        let moved: Vec<f64> = candidate.iter().zip(point).map(|(c, x)| c - x).collect();
        if moved.iter().any(|&m| m != 0.0) {
            let eval = cost.evaluate(&candidate)?;
            if !eval.value.is_finite() {
                return Err(Error::NonFiniteLoss {
                    last_good_iteration: 0,
                });
            }
            let predicted = config.armijo * dot(&current.gradient, &moved);
            if eval.value <= current.value + predicted && eval.value <= current.value {
                return Ok(Accepted {
                    point: candidate,
                    evaluation: eval,
                    step,
                });
            }
        }
        step *= config.backtrack;
    }
    Err(Error::LineSearchFailed(config.max_backtracks))
}

/// One row of the optimizer trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub loss: f64,
    /// Infinity norm of the projected gradient.
    pub grad_norm: f64,
    pub step: f64,
    pub evaluations: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptimizerTrace {
    pub records: Vec<TraceRecord>,
}

impl OptimizerTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Number of accepted steps (the first record is the starting point).
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].loss <= w[0].loss)
    }

    /// CSV with one row per accepted iterate. Wall-clock times are only
    /// written when asked for, so that the file is reproducible by default.
    pub fn to_csv(&self, with_timing: bool) -> String {
        let mut out = String::from("iter,loss,grad_inf,step,evals");
        if with_timing {
            out.push_str(",ms");
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}",
                r.iteration, r.loss, r.grad_norm, r.step, r.evaluations
            ));
            if with_timing {
                out.push_str(&format!(",{:.3}", r.elapsed_ms));
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(not(target_arch = "wasm32"))]
mod clock {
    pub struct Clock(std::time::Instant);
    impl Clock {
        pub fn start() -> Self {
            Self(std::time::Instant::now())
        }
        pub fn ms(&self) -> f64 {
            self.0.elapsed().as_secs_f64() * 1e3
        }
    }
}

#[cfg(target_arch = "wasm32")]
mod clock {
    pub struct Clock;
    impl Clock {
        pub fn start() -> Self {
            Self
        }
        pub fn ms(&self) -> f64 {
            0.0
        }
    }
}

/// Incremental projected L-BFGS driver.
pub struct ProjectedLbfgs<C: CostFunction> {
    cost: C,
    config: OptimizerConfig,
    bounds: Bounds,
    point: Vec<f64>,
    current: Evaluation<C::Report>,
    history: LbfgsHistory,
    trace: OptimizerTrace,
    reports: Vec<C::Report>,
    evaluations: usize,
    status: Option<Status>,
    clock: clock::Clock,
}

impl<C: CostFunction> ProjectedLbfgs<C> {
    pub fn new(mut cost: C, mut x0: Vec<f64>, bounds: Bounds, config: OptimizerConfig) -> Result<Self> {
        config.validate()?;
        let clock = clock::Clock::start();
        bounds.project(&mut x0);
        let current = cost.evaluate(&x0)?;
        if !current.value.is_finite() {
            return Err(Error::NonFiniteLoss {
                last_good_iteration: 0,
            });
        }
        let grad_norm = inf_norm(&bounds.project_gradient(&x0, &current.gradient));
        let mut me = Self {
            cost,
            history: LbfgsHistory::new(config.history),
            config,
            bounds,
            point: x0,
            trace: OptimizerTrace::default(),
            reports: vec![current.report.clone()],
            current,
            evaluations: 1,
            status: None,
            clock,
        };
        me.trace.records.push(TraceRecord {
            iteration: 0,
            loss: me.current.value,
            grad_norm,
            step: 0.0,
            evaluations: 1,
            elapsed_ms: me.clock.ms(),
        });
        me.status = me.check_termination();
        Ok(me)
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn current(&self) -> &Evaluation<C::Report> {
        &self.current
    }

    pub fn trace(&self) -> &OptimizerTrace {
        &self.trace
    }

    pub fn status(&self) -> Option<Status> {
        self.status
    }

    pub fn iteration(&self) -> usize {
        self.trace.steps()
    }

    pub fn cost(&self) -> &C {
        &self.cost
    }

    fn check_termination(&self) -> Option<Status> {
        let last = self.trace.records.last().expect("trace starts non-empty");
        if last.grad_norm < self.config.grad_tolerance {
            return Some(Status::Converged);
        }
        let k = self.trace.steps();
        if k >= self.config.window {
            let before = self.trace.records[k - self.config.window].loss;
            if before - last.loss <= self.config.rel_tolerance * before.abs() {
                return Some(Status::Converged);
            }
        }
        if k >= self.config.max_iterations {
            return Some(Status::MaxIterations);
        }
        None
    }

    /// Advance one iteration. Returns the status once the run has ended.
    pub fn step(&mut self) -> Result<Option<Status>> {
        if self.status.is_some() {
            return Ok(self.status);
        }
        let last_good = self.iteration();
        let direction = lbfgs_step(&self.history, &self.current.gradient, &self.point, self.bounds);
        let alpha0 = if self.history.is_empty() {
            let dn = inf_norm(&direction);
            if dn > 0.0 {
                (self.config.initial_step / dn).min(1.0)
            } else {
                1.0
            }
        } else {
            1.0
        };
        let before = self.evaluations;
        let mut counting = Counting {
            inner: &mut self.cost,
            count: &mut self.evaluations,
        };
        let searched = project_and_accept(
            &mut counting,
            &self.point,
            &self.current,
            &direction,
            alpha0,
            self.bounds,
            &self.config,
        );
        let accepted = match searched {
            Ok(a) => a,
            Err(Error::LineSearchFailed(_)) => match self.rescue_step()? {
                Some(a) => {
                    self.history.clear();
                    a
                }
                None => {
                    self.status = Some(Status::Stalled);
                    return Ok(self.status);
                }
            },
            Err(Error::NonFiniteLoss { .. }) => {
                return Err(Error::NonFiniteLoss {
                    last_good_iteration: last_good,
                })
            }
            Err(e) => return Err(e),
        };

        let s: Vec<f64> = accepted
            .point
            .iter()
            .zip(&self.point)
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = accepted
            .evaluation
            .gradient
            .iter()
            .zip(&self.current.gradient)
            .map(|(a, b)| a - b)
            .collect();
        self.history.push(s, y);
        self.point = accepted.point;
        self.current = accepted.evaluation;
        self.reports.push(self.current.report.clone());
        let grad_norm = inf_norm(&self.bounds.project_gradient(&self.point, &self.current.gradient));
        self.trace.records.push(TraceRecord {
            iteration: last_good + 1,
            loss: self.current.value,
            grad_norm,
            step: accepted.step,
            evaluations: self.evaluations - before,
            elapsed_ms: self.clock.ms(),
        });
        self.status = self.check_termination();
        Ok(self.status)
    }

    /// Small projected steepest-descent step, accepted only on strict decrease.
    fn rescue_step(&mut self) -> Result<Option<Accepted<C::Report>>> {
        let mut candidate: Vec<f64> = self
            .point
            .iter()
            .zip(&self.current.gradient)
            .map(|(x, g)| x - self.config.fallback_step * g)
            .collect();
        self.bounds.project(&mut candidate);
        if candidate == self.point {
            return Ok(None);
        }
        self.evaluations += 1;
        let eval = self.cost.evaluate(&candidate)?;
        if eval.value.is_finite() && eval.value < self.current.value {
            Ok(Some(Accepted {
                point: candidate,
                evaluation: eval,
                step: self.config.fallback_step,
            }))
        } else {
            Ok(None)
        }
    }

    pub fn run(mut self) -> Result<Minimization<C::Report>> {
        while self.step()?.is_none() {}
        Ok(self.finish())
    }

    pub fn finish(self) -> Minimization<C::Report> {
        Minimization {
            point: self.point,
            trace: self.trace,
            reports: self.reports,
            status: self.status.unwrap_or(Status::MaxIterations),
        }
    }
}

struct Counting<'a, C> {
    inner: &'a mut C,
    count: &'a mut usize,
}

impl<C: CostFunction> CostFunction for Counting<'_, C> {
    type Report = C::Report;

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation<C::Report>> {
        *self.count += 1;
        self.inner.evaluate(x)
    }
}

#[derive(Debug, Clone)]
pub struct Minimization<R> {
    pub point: Vec<f64>,
    pub trace: OptimizerTrace,
    /// Report of every accepted iterate, starting with the initial point.
    pub reports: Vec<R>,
    pub status: Status,
}

pub fn minimize_box<C: CostFunction>(
    cost: C,
    x0: Vec<f64>,
    bounds: Bounds,
    config: &OptimizerConfig,
) -> Result<Minimization<C::Report>> {
    ProjectedLbfgs::new(cost, x0, bounds, config.clone())?.run()
}

/// The image objective as a [`CostFunction`] over interleaved pixels.
pub struct PixelCost<'a> {
    objective: Objective<'a>,
}

impl<'a> PixelCost<'a> {
    pub fn new(objective: Objective<'a>) -> Self {
        Self { objective }
    }

    pub fn objective(&self) -> &Objective<'a> {
        &self.objective
    }
}

impl CostFunction for PixelCost<'_> {
    type Report = LossReport;

    fn evaluate(&mut self, x: &[f64]) -> Result<Evaluation<LossReport>> {
        let (h, w) = self.objective.dims();
        let image = ImagePlane::new(h, w, x.to_vec())?;
        let (report, gradient) = self.objective.evaluate(&image)?;
        Ok(Evaluation {
            value: report.total,
            gradient,
            report,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PurifyResult {
    pub image: ImagePlane,
    pub trace: OptimizerTrace,
    pub reports: Vec<LossReport>,
    pub status: Status,
}

/// Starting image: white noise from `config.seed`, or the content image.
pub fn initial_image(pair_i: &RgbMaskPair, config: &OptimizerConfig) -> Result<ImagePlane> {
    if config.warm_start {
        Ok(pair_i.image().clone())
    } else {
        let (h, w) = pair_i.dims();
        init_white_noise(h, w, config.seed)
    }
}

/// Synthesize the purified image for content pair `I` and style pair `S`.
pub fn purify(
    pair_i: &RgbMaskPair,
    pair_s: &RgbMaskPair,
    spec: &NetworkSpec,
    subnet: &AttentionSubnet,
    weights: &LossWeights,
    config: &OptimizerConfig,
) -> Result<PurifyResult> {
    let objective = Objective::new(pair_i, pair_s, spec, subnet, weights)?;
    let (h, w) = pair_i.dims();
    let x0 = initial_image(pair_i, config)?.into_data();
    let m = minimize_box(PixelCost::new(objective), x0, Bounds::PIXELS, config)?;
    Ok(PurifyResult {
        image: ImagePlane::new(h, w, m.point)?,
        trace: m.trace,
        reports: m.reports,
        status: m.status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg64;

    fn quadratic(center: Vec<f64>) -> FnCost<impl FnMut(&[f64]) -> (f64, Vec<f64>)> {
        FnCost(move |x: &[f64]| {
            let g: Vec<f64> = x.iter().zip(&center).map(|(a, c)| a - c).collect();
            (0.5 * dot(&g, &g), g)
        })
    }

    #[test]
    fn empty_history_gives_steepest_descent() {
        let h = LbfgsHistory::new(5);
        let g = [1.0, -2.0, 3.0];
        let d = lbfgs_step(&h, &g, &[10.0, 10.0, 10.0], Bounds::PIXELS);
        assert_eq!(d, vec![-1.0, 2.0, -3.0]);
    }

    #[test]
    fn history_discards_bad_pairs_and_caps_size() {
        let mut h = LbfgsHistory::new(2);
        assert!(!h.push(vec![1.0, 0.0], vec![-1.0, 0.0]));
        assert!(!h.push(vec![1e-6, 0.0], vec![1e-6, 0.0]));
        assert!(h.push(vec![1.0, 0.0], vec![2.0, 0.0]));
        assert!(h.push(vec![0.0, 1.0], vec![0.0, 3.0]));
        assert!(h.push(vec![1.0, 1.0], vec![1.0, 1.0]));
        assert_eq!(h.len(), 2);
    }

    #[test]
    fn two_loop_inverts_diagonal_hessian() {
        // Pairs from f = x^T diag(2, 4) x / 2 recover H^-1 g exactly along s.
        let mut h = LbfgsHistory::new(5);
        h.push(vec![1.0, 0.0], vec![2.0, 0.0]);
        h.push(vec![0.0, 1.0], vec![0.0, 4.0]);
        let r = h.apply_inverse_hessian(&[2.0, 4.0]);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn interior_quadratic_converges() {
        let mut rng = Lcg64::new(21);
        let c: Vec<f64> = (0..10).map(|_| 10.0 + 200.0 * rng.next_unit()).collect();
        let x0: Vec<f64> = (0..10).map(|_| rng.next_pixel()).collect();
        let cfg = OptimizerConfig {
            max_iterations: 50,
            ..OptimizerConfig::default()
        };
        let m = minimize_box(quadratic(c.clone()), x0, Bounds::PIXELS, &cfg).unwrap();
        let err = m
            .point
            .iter()
            .zip(&c)
            .fold(0.0f64, |e, (a, b)| e.max((a - b).abs()));
        assert!(err <= 1e-6, "error {err}, status {}", m.status);
        assert!(m.trace.is_monotone());
    }

    #[test]
    fn boxed_quadratic_reaches_projection() {
        let c = vec![-40.0, 300.0, 12.0, 255.5, -0.1, 128.0, 1000.0, 250.0, 3.0, -7.0];
        let cfg = OptimizerConfig {
            max_iterations: 50,
            ..OptimizerConfig::default()
        };
        let m = minimize_box(quadratic(c.clone()), vec![100.0; 10], Bounds::PIXELS, &cfg).unwrap();
        for (x, ci) in m.point.iter().zip(&c) {
            assert!((x - ci.clamp(0.0, 255.0)).abs() <= 1e-6, "{x} vs {ci}");
        }
        assert_eq!(m.status, Status::Converged);
    }

    #[test]
    fn line_search_projects_candidates() {
        // Minimum at 300: the trial at 300 is clamped to 255 before evaluation.
        let mut seen = Vec::new();
        let mut cost = FnCost(|x: &[f64]| {
            seen.push(x[0]);
            let g = x[0] - 300.0;
            (0.5 * g * g, vec![g])
        });
        let cur = cost.evaluate(&[200.0]).unwrap();
        let acc = project_and_accept(
            &mut cost,
            &[200.0],
            &cur,
            &[100.0],
            1.0,
            Bounds::PIXELS,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(acc.point, vec![255.0]);
        assert_eq!(seen, vec![200.0, 255.0]);
    }

    #[test]
    fn line_search_fails_on_ascent_direction() {
        let mut cost = quadratic(vec![0.0]);
        let cur = cost.evaluate(&[10.0]).unwrap();
        let r = project_and_accept(
            &mut cost,
            &[10.0],
            &cur,
            &[1.0],
            1.0,
            Bounds::PIXELS,
            &OptimizerConfig::default(),
        );
        assert!(matches!(r, Err(Error::LineSearchFailed(20))));
    }

    #[test]
    fn starts_converged_at_a_stationary_point() {
        let m = minimize_box(
            quadratic(vec![5.0; 4]),
            vec![5.0; 4],
            Bounds::PIXELS,
            &OptimizerConfig::default(),
        )
        .unwrap();
        assert_eq!(m.status, Status::Converged);
        assert_eq!(m.trace.steps(), 0);
    }

    #[test]
    fn non_finite_objective_is_reported() {
        let cost = FnCost(|_: &[f64]| (f64::NAN, vec![0.0]));
        let r = minimize_box(cost, vec![1.0], Bounds::PIXELS, &OptimizerConfig::default());
        assert!(matches!(r, Err(Error::NonFiniteLoss { .. })));
    }

    #[test]
    fn config_validation() {
        let bad = OptimizerConfig {
            max_iterations: 0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            history: 0,
            ..OptimizerConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
