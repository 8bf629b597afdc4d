//! Resolution of run settings: command-line flags override the TOML config
//! file, which overrides the built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mgst_core::attention::AttentionSubnet;
use mgst_core::image_io::ChannelMap;
use mgst_core::loss::LossWeights;
use mgst_core::net::{default_network, NetworkSpec};
use mgst_core::optim::OptimizerConfig;
use mgst_core::weights::load_weights_with_attention;

use crate::args::{LossArgs, PurifyArgs, RunArgs};

pub const WEIGHTS_ENV: &str = "MGST_WEIGHTS";
pub const DEFAULT_NET_SEED: u64 = 7;

/// Raised for missing or contradictory settings; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Keys accepted in a config file. Relative paths are resolved against the
/// file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub content: Option<PathBuf>,
    pub content_mask: Option<PathBuf>,
    pub style: Option<PathBuf>,
    pub style_mask: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub losses: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub net_seed: Option<u64>,
    pub iters: Option<usize>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub lambda_g: Option<f64>,
    pub lambda_l: Option<f64>,
    pub theta: Option<f64>,
    pub channel_sum: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub warm_start: Option<bool>,
    pub channel_map: Option<String>,
    pub trace_timing: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut cfg.content,
            &mut cfg.content_mask,
            &mut cfg.style,
            &mut cfg.style_mask,
            &mut cfg.out,
            &mut cfg.trace,
            &mut cfg.losses,
            &mut cfg.weights,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn for_run(run: &RunArgs) -> Result<Self> {
        match &run.config {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetSource {
    File(PathBuf),
    Seed(u64),
}

impl NetSource {
    pub fn load(&self) -> Result<(NetworkSpec, AttentionSubnet)> {
        match self {
            NetSource::File(p) => {
                let (spec, attn) = load_weights_with_attention(p)
                    .with_context(|| format!("cannot load weights {}", p.display()))?;
                Ok((spec, attn.unwrap_or_default()))
            }
            NetSource::Seed(s) => Ok((default_network(*s), AttentionSubnet::Passthrough)),
        }
    }
}

/// Everything a purify job needs besides its file paths.
#[derive(Debug, Clone)]
pub struct Settings {
    pub net: NetSource,
    pub loss: LossWeights,
    pub optimizer: OptimizerConfig,
    pub channel_map: ChannelMap,
    pub threads: usize,
    pub trace_timing: bool,
}

pub fn loss_weights(flags: &LossArgs, file: &FileConfig) -> Result<LossWeights> {
    let d = LossWeights::default();
    let w = LossWeights {
        alpha: flags.alpha.or(file.alpha).unwrap_or(d.alpha),
        beta: flags.beta.or(file.beta).unwrap_or(d.beta),
        lambda_global: flags.lambda_g.or(file.lambda_g).unwrap_or(d.lambda_global),
        lambda_local: flags.lambda_l.or(file.lambda_l).unwrap_or(d.lambda_local),
        theta: flags.theta.or(file.theta).unwrap_or(d.theta),
        literal_channel_sum: if flags.no_channel_sum {
            false
        } else {
            file.channel_sum.unwrap_or(d.literal_channel_sum)
        },
    };
    w.validate()?;
    Ok(w)
}

pub fn resolve_settings(run: &RunArgs, file: &FileConfig, env_weights: Option<PathBuf>) -> Result<Settings> {
    let net = if let Some(p) = run.weights.clone().or_else(|| file.weights.clone()) {
        NetSource::File(p)
    } else if let Some(s) = run.net_seed.or(file.net_seed) {
        NetSource::Seed(s)
    } else if let Some(p) = env_weights {
        NetSource::File(p)
    } else {
        NetSource::Seed(DEFAULT_NET_SEED)
    };

    let defaults = OptimizerConfig::default();
    let optimizer = OptimizerConfig {
        max_iterations: run.iters.or(file.iters).unwrap_or(defaults.max_iterations),
        seed: run.seed.or(file.seed).unwrap_or(defaults.seed),
        warm_start: run.warm_start || file.warm_start.unwrap_or(false),
        ..defaults
    };
    if optimizer.max_iterations == 0 {
        return Err(UsageError("--iters must be at least 1".into()).into());
    }

    let threads = run.threads.or(file.threads).unwrap_or(1);
    if threads == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }

    let channel_map = match run.channel_map.as_ref().or(file.channel_map.as_ref()) {
        Some(s) => s
            .parse::<ChannelMap>()
            .map_err(|e| UsageError(format!("invalid --channel-map {s:?}: {e}")))?,
        None => ChannelMap::default(),
    };

    Ok(Settings {
        net,
        loss: loss_weights(&run.loss, file)?,
        optimizer,
        channel_map,
        threads,
        trace_timing: run.trace_timing || file.trace_timing.unwrap_or(false),
    })
}

pub fn env_weights() -> Option<PathBuf> {
    std::env::var_os(WEIGHTS_ENV)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Input and output files of one purify job.
#[derive(Debug, Clone, PartialEq)]
pub struct JobPaths {
    pub content: PathBuf,
    pub content_mask: PathBuf,
    pub style: PathBuf,
    pub style_mask: PathBuf,
    pub out: PathBuf,
    pub trace: PathBuf,
    pub losses: PathBuf,
}

impl JobPaths {
    /// Trace and loss-report paths default to siblings of the output image.
    pub fn new(
        content: PathBuf,
        content_mask: PathBuf,
        style: PathBuf,
        style_mask: PathBuf,
        out: PathBuf,
        trace: Option<PathBuf>,
        losses: Option<PathBuf>,
    ) -> Self {
        let trace = trace.unwrap_or_else(|| out.with_extension("trace.csv"));
        let losses = losses.unwrap_or_else(|| out.with_extension("losses.csv"));
        Self {
            content,
            content_mask,
            style,
            style_mask,
            out,
            trace,
            losses,
        }
    }
}

pub fn purify_paths(args: &PurifyArgs, file: &FileConfig) -> Result<JobPaths> {
    fn pick(flag: &Option<PathBuf>, file: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
        match flag.as_ref().or(file.as_ref()) {
            Some(p) => Ok(p.clone()),
            None => bail!(UsageError(format!(
                "missing --{name} (or `{}` in the config file)",
                name.replace('-', "_")
            ))),
        }
    }
    Ok(JobPaths::new(
        pick(&args.content, &file.content, "content")?,
        pick(&args.content_mask, &file.content_mask, "content-mask")?,
        pick(&args.style, &file.style, "style")?,
        pick(&args.style_mask, &file.style_mask, "style-mask")?,
        pick(&args.out, &file.out, "out")?,
        args.trace.clone().or_else(|| file.trace.clone()),
        args.losses.clone().or_else(|| file.losses.clone()),
    ))
}
