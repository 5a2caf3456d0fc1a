use std::fs::{self, File};
use std::io::{BufWriter, Write};

use ardent_core::sim::{run_ablation, summarize, AblationKind, AblationSpec};
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::error::CliError;
use crate::output::{run_dir, write_json, write_manifest};
use crate::scenario::ScenarioArgs;
use crate::{FilterArgs, OutArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    #[value(name = "alpha_sweep", alias = "alpha-sweep")]
    AlphaSweep,
    #[value(name = "particle_sweep", alias = "particle-sweep")]
    ParticleSweep,
    Convergence,
}

impl From<KindArg> for AblationKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::AlphaSweep => AblationKind::AlphaSweep,
            KindArg::ParticleSweep => AblationKind::ParticleSweep,
            KindArg::Convergence => AblationKind::Convergence,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Comma-separated α values or particle counts.
    #[arg(long, value_delimiter = ',')]
    pub grid: Vec<f64>,
    /// Number of seeds per grid point.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    pub seeds: u64,
    /// First seed; runs use `seed..seed + seeds`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Episodes per run.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub budget: u64,
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    /// Context whose rolling accuracy is tracked; all contexts when absent.
    #[arg(long)]
    pub focus_context: Option<usize>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(args: AblateArgs) -> Result<(), CliError> {
    let kind: AblationKind = args.kind.into();
    if kind != AblationKind::Convergence && args.grid.is_empty() {
        return Err(CliError::Usage("--grid is required for sweeps".into()));
    }
    let scenario = args.scenario.resolve()?;
    if let Some(c) = args.focus_context {
        if c >= scenario.dims.n_contexts {
            return Err(CliError::Usage(format!(
                "--focus-context {c} out of range; the scenario has {} contexts",
                scenario.dims.n_contexts
            )));
        }
    }
    let spec = AblationSpec {
        kind,
        grid: if kind == AblationKind::Convergence { Vec::new() } else { args.grid.clone() },
        seeds: (args.seed..args.seed + args.seeds).collect(),
        budget: args.budget as usize,
        window: args.window as usize,
        scenario,
        base: args.filter.config(),
        focus_context: args.focus_context,
    };
    let config = json!({
        "kind": spec.kind,
        "grid": spec.grid,
        "seeds": spec.seeds,
        "budget": spec.budget,
        "window": spec.window,
        "focus_context": spec.focus_context,
        "filter": spec.base,
        "scenario": args.scenario.describe(&spec.scenario)?,
    });

    let runs = run_ablation(&spec)?;
    let summaries = summarize(&runs, spec.focus_context);

    let (dir, hash) = run_dir(&args.out.out, "ablate", &config)?;
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(CliError::io(&runs_dir))?;
    let mut index = Vec::with_capacity(runs.len());
    for r in &runs {
        let name = format!("{}-{}-seed{}.csv", r.label, r.param, r.seed);
        let path = runs_dir.join(&name);
        let f = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(f);
        r.series.write_csv(&mut w).and_then(|_| w.flush()).map_err(CliError::io(&path))?;
        index.push(json!({
            "file": format!("runs/{name}"),
            "label": r.label,
            "param": r.param,
            "seed": r.seed,
            "terminal_accuracy": r.terminal_accuracy,
            "terminal_error": r.terminal_error,
        }));
    }
    write_json(&dir.join("summary.json"), &json!({ "summaries": summaries, "runs": index }))?;
    write_manifest(&dir, "ablate", args.seed, &hash, &config, json!({ "summaries": summaries }))?;

    eprintln!(
        "{:<8} {:>10} {:>6} {:>12} {:>12} {:>10}",
        "arm", "param", "seeds", "terminal", "error", "views"
    );
    for s in &summaries {
        eprintln!(
            "{:<8} {:>10} {:>6} {:>12.4} {:>12.4} {:>10.3}",
            s.label, s.param, s.n_seeds, s.mean_terminal_accuracy, s.mean_terminal_error, s.mean_post_burn_in_views
        );
    }
    println!("{}", dir.display());
    Ok(())
}
