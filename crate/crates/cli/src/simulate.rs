use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use ardent_core::persist::{hex_digest, ParticleSetDocument};
use ardent_core::sim::{run_recorded, ArmSpec, ExperimentSpec, System};
use ardent_core::MetaPolicyState;
use clap::{Args, ValueEnum};
use serde_json::json;

use crate::error::CliError;
use crate::output::{read_bytes, run_dir, write_manifest};
use crate::scenario::ScenarioArgs;
use crate::{FilterArgs, OutArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ArmArg {
    Human,
    Machine,
    Ardent,
    Random,
    Oracle,
    #[value(alias = "favourite")]
    Fixed,
}

#[derive(Clone, Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "ardent")]
    pub arm: ArmArg,
    /// Explainer shown first by the fixed arm.
    #[arg(long)]
    pub favourite: Option<usize>,
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    pub episodes: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rolling-accuracy window.
    #[arg(long, default_value_t = 500, value_parser = clap::value_parser!(u64).range(1..))]
    pub window: u64,
    #[command(flatten)]
    pub filter: FilterArgs,
    /// Start the ardent arm from a saved particle set instead of the prior.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    /// Also write every interaction to records.jsonl.
    #[arg(long)]
    pub records: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn run(args: SimulateArgs) -> Result<(), CliError> {
    let scenario = args.scenario.resolve()?;
    let dims = scenario.dims;
    let arm = match args.arm {
        ArmArg::Human => ArmSpec::Human,
        ArmArg::Machine => ArmSpec::Machine,
        ArmArg::Ardent => ArmSpec::Ardent {
            filter: args.filter.config(),
        },
        ArmArg::Random => ArmSpec::Random,
        ArmArg::Oracle => ArmSpec::Oracle,
        ArmArg::Fixed => {
            let favourite = args
                .favourite
                .ok_or_else(|| CliError::Usage("--arm fixed needs --favourite".into()))?;
            if favourite >= dims.n_explainers {
                return Err(CliError::Usage(format!(
                    "--favourite {favourite} out of range; the scenario has {} explainers",
                    dims.n_explainers
                )));
            }
            ArmSpec::Fixed { favourite }
        }
    };
    if args.warm_start.is_some() && args.arm != ArmArg::Ardent {
        return Err(CliError::Usage("--warm-start applies only to --arm ardent".into()));
    }

    let spec = ExperimentSpec {
        arm,
        n_episodes: args.episodes as usize,
        seed: args.seed,
        window: args.window as usize,
    };
    let mut config = json!({
        "scenario": args.scenario.describe(&scenario)?,
        "experiment": serde_json::to_value(&spec)?,
        "records": args.records,
    });

    let system = match &args.warm_start {
        None => None,
        Some(path) => {
            let bytes = read_bytes(path)?;
            config["warm_start"] = json!(hex_digest(&bytes));
            let doc: ParticleSetDocument = serde_json::from_slice(&bytes).map_err(|e| CliError::input(path, e))?;
            if doc.dims != dims {
                return Err(CliError::input(
                    path,
                    format!("particle dims {:?} do not match the scenario {:?}", doc.dims, dims),
                ));
            }
            let particles = doc.particles().map_err(|e| CliError::input(path, e))?;
            let filter = ardent_core::FilterConfig {
                n_particles: particles.n_particles(),
                ..args.filter.config()
            };
            Some(System::Assisted(MetaPolicyState::ardent_from(filter, particles, None)?))
        }
    };
    let (series, _, records) = run_recorded(&scenario, system, &spec)?;

    let (dir, hash) = run_dir(&args.out.out, "simulate", &config)?;
    let csv = dir.join("metrics.csv");
    let f = File::create(&csv).map_err(CliError::io(&csv))?;
    let mut w = BufWriter::new(f);
    series.write_csv(&mut w).and_then(|_| w.flush()).map_err(CliError::io(&csv))?;

    if args.records {
        let path = dir.join("records.jsonl");
        let f = File::create(&path).map_err(CliError::io(&path))?;
        let mut w = BufWriter::new(f);
        for r in &records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(CliError::io(&path))?;
        }
        w.flush().map_err(CliError::io(&path))?;
    }

    let post = series.post_burn_in();
    let per_context: Vec<_> = (0..dims.n_contexts)
        .map(|x| {
            json!({
                "context": x,
                "post_burn_in_accuracy": series.accuracy(Some(x), post.clone()),
                "post_burn_in_mean_views": series.mean_views(Some(x), post.clone()),
                "terminal_rolling_accuracy": series.terminal_rolling_accuracy(Some(x)),
            })
        })
        .collect();
    write_manifest(&dir, "simulate", args.seed, &hash, &config, json!({ "contexts": per_context }))?;
    println!("{}", dir.display());
    Ok(())
}
