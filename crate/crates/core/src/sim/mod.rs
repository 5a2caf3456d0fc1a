//! Synthetic humans, experiment runners and an exact enumeration oracle.

mod ablation;
mod episode;
mod metrics;
mod oracle;
mod scenario;

pub use ablation::{run_ablation, summarize, AblationKind, AblationRun, AblationSpec, AblationSummary};
pub use episode::{run_experiment, run_recorded, run_with_system, simulate_episode, ArmSpec, EpisodeResult, ExperimentSpec, System};
pub use metrics::{MetricSeries, CSV_HEADER};
pub use oracle::{closed_form_accuracy, OrderingRule, Strategy, MAX_ENUMERABLE_EXPLAINERS};
pub use scenario::{
    binary_validation_scenario, randomized_scenario, BeliefPrototype, HumanBehaviorConfig, ScenarioSpec,
};
