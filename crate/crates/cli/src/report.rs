use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, Args)]
pub struct ReportArgs {
    /// Run directories or metric CSV files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Drop the first quarter of each run.
    #[arg(long)]
    pub post_burn_in: bool,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Deserialize)]
struct Row {
    #[allow(dead_code)]
    episode: usize,
    context: usize,
    correct: u8,
    views: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContextSummary {
    pub context: usize,
    pub n: usize,
    pub accuracy: f64,
    /// 95% Wilson score interval.
    pub ci: (f64, f64),
    pub mean_views: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub source: PathBuf,
    pub n: usize,
    pub contexts: Vec<ContextSummary>,
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

const Z95: f64 = 1.959963984540054;

fn collect_csvs(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let metrics = path.join("metrics.csv");
    if metrics.is_file() {
        return Ok(vec![metrics]);
    }
    let mut found = Vec::new();
    for dir in [path.to_path_buf(), path.join("runs")] {
        if !dir.is_dir() {
            continue;
        }
        for entry in fs::read_dir(&dir).map_err(CliError::io(&dir))? {
            let p = entry.map_err(CliError::io(&dir))?.path();
            if p.extension().is_some_and(|e| e == "csv") {
                found.push(p);
            }
        }
    }
    found.sort();
    if found.is_empty() {
        return Err(CliError::input(path, "no metric CSVs found"));
    }
    Ok(found)
}

pub fn summarize_csv(path: &Path, post_burn_in: bool) -> Result<RunSummary, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
    let rows: Vec<Row> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::input(path, e))?;
    let start = if post_burn_in { rows.len() / 4 } else { 0 };
    let rows = &rows[start..];
    let n_contexts = rows.iter().map(|r| r.context + 1).max().unwrap_or(0);
    let contexts = (0..n_contexts)
        .map(|x| {
            let (n, k, v) = rows
                .iter()
                .filter(|r| r.context == x)
                .fold((0usize, 0usize, 0usize), |(n, k, v), r| (n + 1, k + r.correct as usize, v + r.views));
            ContextSummary {
                context: x,
                n,
                accuracy: if n > 0 { k as f64 / n as f64 } else { f64::NAN },
                ci: wilson_interval(k, n, Z95),
                mean_views: if n > 0 { v as f64 / n as f64 } else { f64::NAN },
            }
        })
        .collect();
    Ok(RunSummary {
        source: path.to_path_buf(),
        n: rows.len(),
        contexts,
    })
}

pub fn run(args: ReportArgs) -> Result<(), CliError> {
    let mut summaries = Vec::new();
    for p in &args.paths {
        if !p.exists() {
            return Err(CliError::input(p, "not found"));
        }
        for csv in collect_csvs(p)? {
            summaries.push(summarize_csv(&csv, args.post_burn_in)?);
        }
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summaries)?);
        return Ok(());
    }
    for s in &summaries {
        println!("{}  (n = {})", s.source.display(), s.n);
        println!("  {:>4} {:>7} {:>9} {:>20} {:>7}", "x", "n", "accuracy", "95% CI", "views");
        for c in &s.contexts {
            println!(
                "  {:>4} {:>7} {:>8.2}% {:>20} {:>7.3}",
                c.context,
                c.n,
                100.0 * c.accuracy,
                format!("[{:.2}, {:.2}]", 100.0 * c.ci.0, 100.0 * c.ci.1),
                c.mean_views
            );
        }
    }
    Ok(())
}
