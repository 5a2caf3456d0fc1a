use std::path::PathBuf;

use ardent_core::persist::{hex_digest, ParticleSetDocument};
use ardent_core::rng::seeded;
use ardent_core::warmstart::run_warm_start;
use ardent_core::{Dims, HumanPolicyEstimate, InteractionRecord, WarmStartConfig};
use clap::Args;
use serde_json::json;

use crate::error::CliError;
use crate::output::{read_bytes, run_dir, write_manifest};
use crate::scenario::{parse_dims, ScenarioArgs};
use crate::{FilterArgs, OutArgs};

#[derive(Clone, Debug, Args)]
pub struct WarmstartArgs {
    /// JSONL file with one interaction record per line.
    pub log: PathBuf,
    /// Explainers, contexts and actions as E,X,A. Defaults to the scenario's.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<Dims>,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Discarded sweeps before the first retained state.
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    /// Sweeps between retained states.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(10..))]
    pub thin: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

pub fn parse_records(text: &str, path: &std::path::Path) -> Result<Vec<InteractionRecord>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::input(path, format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn run(args: WarmstartArgs) -> Result<(), CliError> {
    let bytes = read_bytes(&args.log)?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| CliError::input(&args.log, e))?;
    let logs = parse_records(&text, &args.log)?;
    let dims = match args.dims {
        Some(d) => d,
        None => args.scenario.resolve()?.dims,
    };
    for (i, r) in logs.iter().enumerate() {
        r.validate(&dims)
            .map_err(|e| CliError::input(&args.log, format!("record {}: {e}", i + 1)))?;
    }
    let filter = args.filter.config();
    let mcmc = WarmStartConfig {
        burn_in: args.burn_in,
        thin: args.thin as usize,
        ..Default::default()
    };
    let mut human = HumanPolicyEstimate::for_dims(&dims, filter.human_policy_smoothing)?;
    for r in &logs {
        human.observe(r.context, r.intended)?;
    }

    let config = json!({
        "log": hex_digest(&bytes),
        "n_records": logs.len(),
        "dims": dims,
        "filter": filter,
        "mcmc": mcmc,
        "seed": args.seed,
    });
    let outcome = run_warm_start(&filter, &mcmc, dims, &logs, &human.to_policy(), &mut seeded(args.seed, 7))?;

    let (dir, hash) = run_dir(&args.out.out, "warmstart", &config)?;
    let path = dir.join("particles.json");
    ParticleSetDocument::new(&outcome.particles, filter.alpha, None).save(&path)?;
    write_manifest(
        &dir,
        "warmstart",
        args.seed,
        &hash,
        &config,
        json!({ "acceptance_rate": outcome.acceptance_rate }),
    )?;
    eprintln!("acceptance rate {:.3}", outcome.acceptance_rate);
    println!("{}", path.display());
    Ok(())
}
