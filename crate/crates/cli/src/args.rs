use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "mgst",
    version,
    about = "Purify real images toward a synthetic style with mask-guided style transfer",
    after_help = "Exit status: 0 on success (converged or iteration limit), 1 on error, \
                  2 on usage errors, 3 when the optimizer stalled."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize one purified image from a content pair and a style pair.
    Purify(PurifyArgs),
    /// Purify every 5-tuple of a manifest file.
    Batch(BatchArgs),
    /// Time purification runs on the toy fixture at several resolutions.
    Benchmark(BenchmarkArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Measure how far the pupil center moved between two images.
    PreserveCheck(PreserveArgs),
    /// Write the default network for a seed as a weights file.
    MakeWeights(MakeWeightsArgs),
    /// Write the synthetic eye fixture (images and label masks) to a directory.
    MakeToy(MakeToyArgs),
}

/// Loss weights. Unset values come from the config file, then the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct LossArgs {
    /// Content layer weight [default: 100]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Style layer weight [default: 10000]
    #[arg(long)]
    pub beta: Option<f64>,
    /// Weight of the global terms [default: 1]
    #[arg(long = "lambda-g")]
    pub lambda_g: Option<f64>,
    /// Weight of the local attention-region terms [default: 1]
    #[arg(long = "lambda-l")]
    pub lambda_l: Option<f64>,
    /// Total-variation weight [default: 0.001]
    #[arg(long)]
    pub theta: Option<f64>,
    /// Drop the factor of C (mask channel count) from the global content term
    #[arg(long)]
    pub no_channel_sum: bool,
}

/// Settings shared by `purify` and `batch`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML config file with the same keys as the long flags (dashes become underscores)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// MGSTW001 weights file; falls back to $MGST_WEIGHTS, then to the default network
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seed of the default network, used when no weights file is given [default: 7]
    #[arg(long = "net-seed")]
    pub net_seed: Option<u64>,
    /// Maximum optimizer iterations [default: 500]
    #[arg(long)]
    pub iters: Option<usize>,
    #[command(flatten)]
    pub loss: LossArgs,
    /// Seed of the white-noise starting image [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for batch mode [default: 1]
    #[arg(long)]
    pub threads: Option<usize>,
    /// Start from the content image instead of white noise
    #[arg(long = "warm-start")]
    pub warm_start: bool,
    /// Label-to-channel map, e.g. `0=-,1=0,2=1`; `-` ignores a label [default: 0=-,1=0,255=0]
    #[arg(long = "channel-map")]
    pub channel_map: Option<String>,
    /// Include wall-clock milliseconds in the trace CSV (makes it non-reproducible)
    #[arg(long = "trace-timing")]
    pub trace_timing: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PurifyArgs {
    /// Content image (PNG)
    #[arg(long)]
    pub content: Option<PathBuf>,
    /// Content label mask (PNG)
    #[arg(long = "content-mask")]
    pub content_mask: Option<PathBuf>,
    /// Style image (PNG)
    #[arg(long)]
    pub style: Option<PathBuf>,
    /// Style label mask (PNG)
    #[arg(long = "style-mask")]
    pub style_mask: Option<PathBuf>,
    /// Output image (PNG)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optimizer trace CSV [default: <out>.trace.csv]
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Per-iteration loss report CSV [default: <out>.losses.csv]
    #[arg(long)]
    pub losses: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BatchArgs {
    /// One `content content_mask style style_mask output` tuple per line;
    /// relative paths are resolved against the manifest's directory
    #[arg(long)]
    pub manifest: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Square image sides to time
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    pub resolutions: Vec<usize>,
    /// Runs per resolution and method
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    /// Optimizer iterations per run
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub iters: u64,
    /// Seed of the default network
    #[arg(long = "net-seed", default_value_t = 7)]
    pub net_seed: u64,
    /// Seed of the white-noise starting image
    #[arg(long, default_value_t = 3)]
    pub seed: u64,
    /// Also write the table as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub loss: LossArgs,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Instance seed (also seeds the network)
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of instances, with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub instances: u64,
    /// Image side (at most 32, divisible by 4)
    #[arg(long, default_value_t = 16)]
    pub size: usize,
    /// Mask channels of the random instance
    #[arg(long = "mask-channels", default_value_t = 1)]
    pub mask_channels: usize,
    /// Central-difference half step
    #[arg(long, default_value_t = 1e-2)]
    pub step: f64,
    /// Largest accepted relative error
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Keep the full step even where it crosses a ReLU kink
    #[arg(long = "no-kink-retry")]
    pub no_kink_retry: bool,
    /// Flip the sign of the TV gradient (the check must then fail)
    #[arg(long = "corrupt-tv", hide = true)]
    pub corrupt_tv: bool,
    #[command(flatten)]
    pub loss: LossArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PreserveArgs {
    /// Image before purification
    #[arg(long, required_unless_present = "manifest")]
    pub content: Option<PathBuf>,
    /// Label mask of the image before purification
    #[arg(long = "content-mask", required_unless_present = "manifest")]
    pub content_mask: Option<PathBuf>,
    /// Image after purification
    #[arg(long, required_unless_present = "manifest")]
    pub after: Option<PathBuf>,
    /// `content content_mask after` triples, one per line; prints mean and std of the shift
    #[arg(long, conflicts_with_all = ["content", "content_mask", "after"])]
    pub manifest: Option<PathBuf>,
    /// Mask channel holding the pupil region
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Reference eye width in pixels [default: image width]
    #[arg(long = "eye-width")]
    pub eye_width: Option<f64>,
    /// Label-to-channel map
    #[arg(long = "channel-map", default_value = "0=-,1=0,255=0")]
    pub channel_map: String,
}

#[derive(Debug, Clone, Args)]
pub struct MakeWeightsArgs {
    #[arg(long = "net-seed", default_value_t = 7)]
    pub net_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct MakeToyArgs {
    /// Image side (divisible by 4)
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
}
