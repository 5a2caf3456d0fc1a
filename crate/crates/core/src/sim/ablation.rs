use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::episode::{run_experiment, ArmSpec, ExperimentSpec};
use super::metrics::MetricSeries;
use super::oracle::{closed_form_accuracy, OrderingRule, Strategy};
use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::filter::FilterConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    /// Ardent across discount factors.
    AlphaSweep,
    /// Ardent across particle counts, plus a random baseline.
    ParticleSweep,
    /// Ardent against a random baseline over time.
    Convergence,
}

impl std::str::FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha_sweep" => Ok(AblationKind::AlphaSweep),
            "particle_sweep" => Ok(AblationKind::ParticleSweep),
            "convergence" => Ok(AblationKind::Convergence),
            other => Err(Error::InvalidConfig(format!("unknown ablation kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub kind: AblationKind,
    /// α values or particle counts; ignored by `Convergence`.
    pub grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Episodes per run.
    pub budget: usize,
    pub window: usize,
    pub scenario: ScenarioSpec,
    pub base: FilterConfig,
    /// Context whose accuracy is tracked; `None` pools all contexts.
    pub focus_context: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRun {
    pub label: String,
    pub param: f64,
    pub seed: u64,
    pub series: MetricSeries,
    /// Rolling accuracy of the focus context at the last episode.
    pub terminal_accuracy: Option<f64>,
    /// Closed-form oracle accuracy minus `terminal_accuracy`.
    pub terminal_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub label: String,
    pub param: f64,
    pub n_seeds: usize,
    pub mean_terminal_accuracy: f64,
    pub mean_terminal_error: f64,
    pub mean_post_burn_in_accuracy: f64,
    pub mean_post_burn_in_agreement: f64,
    pub mean_post_burn_in_views: f64,
}

/// Runs every `(grid point or arm, seed)` pair. Runs are independent and
/// seeded, so the output does not depend on how they are scheduled.
pub fn run_ablation(spec: &AblationSpec) -> Result<Vec<AblationRun>> {
    if spec.seeds.is_empty() {
        return Err(Error::InvalidConfig("ablation needs at least one seed".into()));
    }
    if spec.kind != AblationKind::Convergence && spec.grid.is_empty() {
        return Err(Error::InvalidConfig("ablation grid is empty".into()));
    }
    spec.scenario.validate()?;
    if let Some(c) = spec.focus_context {
        spec.scenario.dims.check_context(c)?;
    }
    let oracle = oracle_accuracy(spec)?;

    let mut arms: Vec<(String, f64, ArmSpec)> = Vec::new();
    match spec.kind {
        AblationKind::AlphaSweep => {
            for &alpha in &spec.grid {
                let filter = FilterConfig {
                    alpha,
                    ..spec.base.clone()
                };
                filter.validate()?;
                arms.push(("ardent".into(), alpha, ArmSpec::Ardent { filter }));
            }
        }
        AblationKind::ParticleSweep => {
            for &n in &spec.grid {
                if !(n >= 1.0 && n.fract() == 0.0) {
                    return Err(Error::InvalidConfig(format!("particle count {n} is not a positive integer")));
                }
                let filter = FilterConfig {
                    n_particles: n as usize,
                    ..spec.base.clone()
                };
                arms.push(("ardent".into(), n, ArmSpec::Ardent { filter }));
            }
            arms.push(("random".into(), 0.0, ArmSpec::Random));
        }
        AblationKind::Convergence => {
            arms.push((
                "ardent".into(),
                spec.base.n_particles as f64,
                ArmSpec::Ardent {
                    filter: spec.base.clone(),
                },
            ));
            arms.push(("random".into(), 0.0, ArmSpec::Random));
        }
    }

    let jobs: Vec<(String, f64, ArmSpec, u64)> = arms
        .into_iter()
        .flat_map(|(label, param, arm)| {
            spec.seeds
                .iter()
                .map(move |&seed| (label.clone(), param, arm.clone(), seed))
        })
        .collect();

    jobs.into_par_iter()
        .map(|(label, param, arm, seed)| {
            let exp = ExperimentSpec {
                arm,
                n_episodes: spec.budget,
                seed,
                window: spec.window,
            };
            let series = run_experiment(&spec.scenario, &exp)?;
            let terminal_accuracy = series.terminal_rolling_accuracy(spec.focus_context);
            Ok(AblationRun {
                label,
                param,
                seed,
                terminal_error: terminal_accuracy.map(|a| oracle - a),
                terminal_accuracy,
                series,
            })
        })
        .collect()
}

fn oracle_accuracy(spec: &AblationSpec) -> Result<f64> {
    let per_context = closed_form_accuracy(&spec.scenario, &Strategy::Explain(OrderingRule::Oracle))?;
    Ok(match spec.focus_context {
        Some(c) => per_context[c],
        None => per_context
            .iter()
            .zip(&spec.scenario.context_dist)
            .map(|(a, p)| a * p)
            .sum(),
    })
}

/// Seed-averaged summaries per `(label, param)`, in first-seen order.
pub fn summarize(runs: &[AblationRun], focus_context: Option<usize>) -> Vec<AblationSummary> {
    let mut keys: Vec<(String, f64)> = Vec::new();
    for r in runs {
        if !keys.iter().any(|(l, p)| *l == r.label && p.to_bits() == r.param.to_bits()) {
            keys.push((r.label.clone(), r.param));
        }
    }
    keys.into_iter()
        .map(|(label, param)| {
            let group: Vec<&AblationRun> = runs
                .iter()
                .filter(|r| r.label == label && r.param.to_bits() == param.to_bits())
                .collect();
            let mean = |f: &dyn Fn(&AblationRun) -> Option<f64>| {
                let vals: Vec<f64> = group.iter().filter_map(|r| f(r)).collect();
                if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                }
            };
            AblationSummary {
                n_seeds: group.len(),
                mean_terminal_accuracy: mean(&|r| r.terminal_accuracy),
                mean_terminal_error: mean(&|r| r.terminal_error),
                mean_post_burn_in_accuracy: mean(&|r| r.series.accuracy(focus_context, r.series.post_burn_in())),
                mean_post_burn_in_agreement: mean(&|r| r.series.agreement(focus_context, r.series.post_burn_in())),
                mean_post_burn_in_views: mean(&|r| r.series.mean_views(focus_context, r.series.post_burn_in())),
                label,
                param,
            }
        })
        .collect()
}
