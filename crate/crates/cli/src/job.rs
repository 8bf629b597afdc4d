use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::{bail, Context, Result};

use mgst_core::attention::AttentionSubnet;
use mgst_core::image_io::{load_rgb_mask_pair, save_image};
use mgst_core::loss::reports_to_csv;
use mgst_core::net::NetworkSpec;
use mgst_core::optim::{purify, Status};

use crate::config::{JobPaths, Settings};

#[derive(Debug, Clone)]
pub struct JobOutcome {
    pub status: Status,
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub seconds: f64,
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Load both pairs, purify, and write the image, trace and loss report.
pub fn run_job(
    paths: &JobPaths,
    settings: &Settings,
    spec: &NetworkSpec,
    subnet: &AttentionSubnet,
) -> Result<JobOutcome> {
    let start = Instant::now();
    let pair_i = load_rgb_mask_pair(&paths.content, &paths.content_mask, &settings.channel_map)
        .context("cannot load the content pair")?;
    let pair_s = load_rgb_mask_pair(&paths.style, &paths.style_mask, &settings.channel_map)
        .context("cannot load the style pair")?;
    let result = purify(
        &pair_i,
        &pair_s,
        spec,
        subnet,
        &settings.loss,
        &settings.optimizer,
    )?;
    save_image(&result.image, &paths.out)?;
    write_file(&paths.trace, &result.trace.to_csv(settings.trace_timing))?;
    write_file(&paths.losses, &reports_to_csv(&result.reports))?;
    let losses = result.trace.losses();
    Ok(JobOutcome {
        status: result.status,
        steps: result.trace.steps(),
        initial_loss: losses[0],
        final_loss: *losses.last().expect("trace has the initial row"),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Parse a batch manifest: five whitespace-separated paths per line, `#`
/// starts a comment. Relative paths are taken from the manifest's directory.
pub fn parse_manifest<const N: usize>(text: &str, base: &Path) -> Result<Vec<(usize, [PathBuf; N])>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != N {
            bail!(
                "manifest line {}: expected {N} paths, found {}",
                k + 1,
                fields.len()
            );
        }
        let paths = std::array::from_fn(|i| {
            let p = Path::new(fields[i]);
            if p.is_relative() {
                base.join(p)
            } else {
                p.to_path_buf()
            }
        });
        out.push((k + 1, paths));
    }
    Ok(out)
}

pub fn read_manifest<const N: usize>(path: &Path) -> Result<Vec<(usize, [PathBuf; N])>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read manifest {}", path.display()))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

pub struct BatchEntry {
    pub line: usize,
    pub out: PathBuf,
    pub result: Result<JobOutcome>,
}

/// Run all jobs on up to `settings.threads` worker threads. Results are
/// returned in manifest order.
pub fn run_batch(
    jobs: &[(usize, JobPaths)],
    settings: &Settings,
    spec: &NetworkSpec,
    subnet: &AttentionSubnet,
) -> Vec<BatchEntry> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<JobOutcome>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let workers = settings.threads.min(jobs.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                let Some((_, paths)) = jobs.get(k) else { break };
                let r = run_job(paths, settings, spec, subnet);
                *slots[k].lock().expect("no panics while holding the lock") = Some(r);
            });
        }
    });
    jobs.iter()
        .zip(slots)
        .map(|((line, paths), slot)| BatchEntry {
            line: *line,
            out: paths.out.clone(),
            result: slot
                .into_inner()
                .expect("no panics while holding the lock")
                .expect("every job ran"),
        })
        .collect()
}

pub fn summary_table(entries: &[BatchEntry]) -> String {
    let mut rows = vec![["line", "output", "status", "iters", "loss", "seconds"]
        .map(String::from)
        .to_vec()];
    for e in entries {
        let mut r = vec![e.line.to_string(), e.out.display().to_string()];
        match &e.result {
            Ok(o) => r.extend([
                o.status.to_string(),
                o.steps.to_string(),
                format!("{:.6e}", o.final_loss),
                format!("{:.2}", o.seconds),
            ]),
            Err(err) => r.extend([
                format!("error: {err:#}"),
                String::new(),
                String::new(),
                String::new(),
            ]),
        }
        rows.push(r);
    }
    let widths: Vec<usize> = (0..6)
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    for r in rows {
        let cells: Vec<String> = r.iter().zip(&widths).map(|(v, &w)| format!("{v:<w$}")).collect();
        s.push_str(cells.join("  ").trim_end());
        s.push('\n');
    }
    s
}
