mod args;
mod config;
mod job;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use mgst_core::eval::{benchmark, gradcheck, preserve_check, BenchmarkConfig, GradcheckConfig, Timing};
use mgst_core::image_io::{load_image, load_rgb_mask_pair, save_image, save_labels, ChannelMap};
use mgst_core::net::default_network;
use mgst_core::optim::Status;
use mgst_core::toy::toy_fixture;
use mgst_core::weights::write_weights;

use args::{
    BatchArgs, BenchmarkArgs, Cli, Command, GradcheckArgs, MakeToyArgs, MakeWeightsArgs, PreserveArgs,
    PurifyArgs,
};
use config::{env_weights, loss_weights, purify_paths, resolve_settings, FileConfig, JobPaths, UsageError};

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_STALLED: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::from(EXIT_ERROR)
            }
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Purify(a) => cmd_purify(a),
        Command::Batch(a) => cmd_batch(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::PreserveCheck(a) => cmd_preserve_check(a),
        Command::MakeWeights(a) => cmd_make_weights(a),
        Command::MakeToy(a) => cmd_make_toy(a),
    }
}

fn cmd_purify(args: PurifyArgs) -> Result<ExitCode> {
    let file = FileConfig::for_run(&args.run)?;
    let settings = resolve_settings(&args.run, &file, env_weights())?;
    let paths = purify_paths(&args, &file)?;
    let (spec, subnet) = settings.net.load()?;
    let o = job::run_job(&paths, &settings, &spec, &subnet)?;
    println!(
        "{}: {} after {} iterations, loss {:.6e} -> {:.6e} ({:.2}s)",
        paths.out.display(),
        o.status,
        o.steps,
        o.initial_loss,
        o.final_loss,
        o.seconds
    );
    Ok(match o.status {
        Status::Stalled => ExitCode::from(EXIT_STALLED),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_batch(args: BatchArgs) -> Result<ExitCode> {
    let file = FileConfig::for_run(&args.run)?;
    let settings = resolve_settings(&args.run, &file, env_weights())?;
    let jobs: Vec<(usize, JobPaths)> = job::read_manifest::<5>(&args.manifest)?
        .into_iter()
        .map(|(line, [c, cm, s, sm, o])| (line, JobPaths::new(c, cm, s, sm, o, None, None)))
        .collect();
    if jobs.is_empty() {
        bail!(UsageError(format!(
            "manifest {} lists no jobs",
            args.manifest.display()
        )));
    }
    let (spec, subnet) = settings.net.load()?;
    let entries = job::run_batch(&jobs, &settings, &spec, &subnet);
    print!("{}", job::summary_table(&entries));
    let failed = entries.iter().filter(|e| e.result.is_err()).count();
    println!("{} of {} jobs succeeded", entries.len() - failed, entries.len());
    Ok(if failed > 0 {
        ExitCode::from(EXIT_ERROR)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<ExitCode> {
    let config = BenchmarkConfig {
        resolutions: args.resolutions,
        repetitions: args.reps as usize,
        iterations: args.iters as usize,
        net_seed: args.net_seed,
        seed: args.seed,
        weights: loss_weights(&args.loss, &FileConfig::default())?,
    };
    let table = benchmark(&config)?;
    print!("{}", table.to_text());
    if let Some(path) = &args.csv {
        std::fs::write(path, table.to_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let weights = loss_weights(&args.loss, &FileConfig::default())?;
    let mut worst = 0.0f64;
    for seed in args.seed..args.seed + args.instances {
        let report = gradcheck(&GradcheckConfig {
            seed,
            height: args.size,
            width: args.size,
            mask_channels: args.mask_channels,
            step: args.step,
            weights: weights.clone(),
            kink_aware: !args.no_kink_retry,
            corrupt_tv: args.corrupt_tv,
            ..GradcheckConfig::default()
        })?;
        print!("seed {seed}: max relative error {:.3e}", report.max_rel_error());
        for part in std::iter::once(&report.total).chain(&report.parts) {
            print!(", {} {:.3e}", part.name, part.max_rel_error);
        }
        println!(
            " ({} coordinates, {} with reduced step)",
            report.coordinates, report.kink_adjusted
        );
        worst = worst.max(report.max_rel_error());
    }
    let pass = worst <= args.tolerance;
    println!(
        "max relative error {worst:.3e} {} tolerance {:.1e}: {}",
        if pass { "<=" } else { ">" },
        args.tolerance,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ERROR)
    })
}

fn cmd_preserve_check(args: PreserveArgs) -> Result<ExitCode> {
    let map: ChannelMap = args
        .channel_map
        .parse()
        .map_err(|e| UsageError(format!("invalid --channel-map: {e}")))?;
    let triples: Vec<(usize, [PathBuf; 3])> = match &args.manifest {
        Some(m) => job::read_manifest::<3>(m)?,
        None => vec![(
            0,
            [
                args.content.clone().expect("required by clap"),
                args.content_mask.clone().expect("required by clap"),
                args.after.clone().expect("required by clap"),
            ],
        )],
    };
    let mut shifts = Vec::new();
    for (_, [content, mask, after]) in &triples {
        let before = load_rgb_mask_pair(content, mask, &map)?;
        let after_img = load_image(after)?;
        let r = preserve_check(&before, &after_img, args.channel, args.eye_width)?;
        println!(
            "{}: center ({:.3}, {:.3}) -> ({:.3}, {:.3}), shift {:.3} px ({:.4} of eye width {})",
            after.display(),
            r.center_before.0,
            r.center_before.1,
            r.center_after.0,
            r.center_after.1,
            r.shift,
            r.normalized_shift(),
            r.eye_width
        );
        shifts.push(r.shift);
    }
    if shifts.len() > 1 {
        let t = Timing::of(&shifts);
        println!(
            "mean shift {:.3} +- {:.3} px over {} images",
            t.mean,
            t.std,
            shifts.len()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_make_weights(args: MakeWeightsArgs) -> Result<ExitCode> {
    write_weights(&default_network(args.net_seed), None, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_make_toy(args: MakeToyArgs) -> Result<ExitCode> {
    let fixture = toy_fixture(args.size)?;
    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("cannot create {}", args.out_dir.display()))?;
    let mut stdout = std::io::stdout().lock();
    for (name, pair) in [("content", &fixture.content), ("style", &fixture.style)] {
        let (h, w) = pair.dims();
        let image = args.out_dir.join(format!("{name}.png"));
        let mask = args.out_dir.join(format!("{name}_mask.png"));
        save_image(pair.image(), &image)?;
        // Label 1 where the soft iris mask covers at least half the pixel.
        let labels: Vec<u8> = pair.mask().data().iter().map(|&v| u8::from(v >= 0.5)).collect();
        save_labels(h, w, &labels, &mask)?;
        writeln!(stdout, "wrote {} and {}", image.display(), mask.display())?;
    }
    Ok(ExitCode::SUCCESS)
}
