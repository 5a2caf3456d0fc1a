use std::path::PathBuf;
use std::str::FromStr;

use ardent_core::sim::{binary_validation_scenario, randomized_scenario, ScenarioSpec};
use ardent_core::{Dims, FinalActionRule};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use crate::error::CliError;

/// `binary`, `random:E,X,A:SEED`, or a path to a scenario JSON file.
#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioArg {
    Binary,
    Random { dims: Dims, seed: u64 },
    File(PathBuf),
}

pub fn parse_dims(s: &str) -> Result<Dims, String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [e, x, a] = parts.as_slice() else {
        return Err(format!("expected E,X,A, got {s:?}"));
    };
    let n = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Dims::new(n(e)?, n(x)?, n(a)?).map_err(|e| e.to_string())
}

impl FromStr for ScenarioArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "binary" {
            return Ok(ScenarioArg::Binary);
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let (dims, seed) = rest
                .rsplit_once(':')
                .ok_or_else(|| format!("expected random:E,X,A:SEED, got {s:?}"))?;
            let seed = seed.parse().map_err(|e| format!("seed {seed:?}: {e}"))?;
            return Ok(ScenarioArg::Random {
                dims: parse_dims(dims)?,
                seed,
            });
        }
        Ok(ScenarioArg::File(PathBuf::from(s)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Sample,
    Argmax,
}

impl From<RuleArg> for FinalActionRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Sample => FinalActionRule::Sample,
            RuleArg::Argmax => FinalActionRule::ArgmaxTieUniform,
        }
    }
}

#[derive(Clone, Debug, Args)]
pub struct ScenarioArgs {
    /// binary, random:E,X,A:SEED, or a scenario JSON file.
    #[arg(long, default_value = "binary")]
    pub scenario: ScenarioArg,
    /// Most explanations the synthetic human views per interaction.
    #[arg(long)]
    pub max_views: Option<usize>,
    /// Stop viewing once the belief's largest entry reaches this value.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// How the final action is drawn from the updated belief.
    #[arg(long, value_enum)]
    pub final_rule: Option<RuleArg>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<ScenarioSpec, CliError> {
        let mut s = match &self.scenario {
            ScenarioArg::Binary => binary_validation_scenario(),
            ScenarioArg::Random { dims, seed } => randomized_scenario(*dims, *seed)?,
            ScenarioArg::File(p) => ScenarioSpec::load(p).map_err(|e| CliError::input(p, e))?,
        };
        if let Some(v) = self.max_views {
            s.human.max_views = v;
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t <= 1.0) {
                return Err(CliError::Usage(format!("--threshold must lie in (0, 1], got {t}")));
            }
            s.human.confidence_threshold = Some(t);
        }
        if let Some(r) = self.final_rule {
            s.human.final_rule = r.into();
        }
        s.validate()?;
        Ok(s)
    }

    /// Identity of the scenario for config hashing. Files are hashed by
    /// their resolved content so that edits change the run directory.
    pub fn describe(&self, resolved: &ScenarioSpec) -> Result<Value, CliError> {
        Ok(json!({
            "source": match &self.scenario {
                ScenarioArg::Binary => "binary".to_string(),
                ScenarioArg::Random { dims, seed } => format!(
                    "random:{},{},{}:{seed}",
                    dims.n_explainers, dims.n_contexts, dims.n_actions
                ),
                ScenarioArg::File(p) => p.display().to_string(),
            },
            "spec": serde_json::to_value(resolved)?,
        }))
    }
}
