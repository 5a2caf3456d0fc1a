use rand::Rng;
use serde::{Deserialize, Serialize};

use super::metrics::MetricSeries;
use super::scenario::ScenarioSpec;
use crate::error::Result;
use crate::filter::FilterConfig;
use crate::model::{categorical_from_uniform, draw_action, update_belief, Belief, InteractionRecord};
use crate::policy::{next_explainer, MetaPolicyState};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub record: InteractionRecord,
    /// Final action equals the scenario's optimal action.
    pub correct: bool,
    /// Final action equals the proposed action.
    pub agreed: bool,
    pub views: usize,
}

/// Who decides in an experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum System {
    /// The human acts on their intended action.
    HumanAlone,
    /// The support policy's proposal is taken as final.
    MachineAlone,
    /// The human sees the proposal and explanations ordered by a meta-policy.
    Assisted(MetaPolicyState),
}

/// Serializable description of an experiment arm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "arm", rename_all = "lowercase")]
pub enum ArmSpec {
    Human,
    Machine,
    Ardent {
        #[serde(default)]
        filter: FilterConfig,
    },
    Random,
    Oracle,
    Fixed {
        favourite: usize,
    },
}

impl ArmSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ArmSpec::Human => "human",
            ArmSpec::Machine => "machine",
            ArmSpec::Ardent { .. } => "ardent",
            ArmSpec::Random => "random",
            ArmSpec::Oracle => "oracle",
            ArmSpec::Fixed { .. } => "fixed",
        }
    }

    pub fn build<R: Rng + ?Sized>(&self, scenario: &ScenarioSpec, rng: &mut R) -> Result<System> {
        let dims = scenario.dims;
        Ok(match self {
            ArmSpec::Human => System::HumanAlone,
            ArmSpec::Machine => System::MachineAlone,
            ArmSpec::Ardent { filter } => System::Assisted(MetaPolicyState::ardent(filter.clone(), dims, rng)?),
            ArmSpec::Random => System::Assisted(MetaPolicyState::Random { dims }),
            ArmSpec::Oracle => System::Assisted(MetaPolicyState::Oracle {
                q_true: scenario.q_true.clone(),
            }),
            ArmSpec::Fixed { favourite } => System::Assisted(MetaPolicyState::fixed(dims, *favourite)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(flatten)]
    pub arm: ArmSpec,
    pub n_episodes: usize,
    pub seed: u64,
    /// Rolling-accuracy window, in episodes.
    pub window: usize,
}

struct Draws {
    context: usize,
    b1: Belief,
    intended: usize,
    proposed: usize,
}

fn draw_situation<R: Rng + ?Sized>(scenario: &ScenarioSpec, rng: &mut R) -> Draws {
    let context = categorical_from_uniform(&scenario.context_dist, rng.random());
    let protos = &scenario.belief_prototypes[context];
    let weights: Vec<f64> = protos.iter().map(|p| p.weight).collect();
    let b1 = protos[categorical_from_uniform(&weights, rng.random())].belief.clone();
    let intended = draw_action(&b1, scenario.human.intended_rule, rng);
    let proposed = categorical_from_uniform(scenario.support_policy.row(context).probs(), rng.random());
    Draws {
        context,
        b1,
        intended,
        proposed,
    }
}

/// One pass through the interaction loop with a synthetic human.
///
/// `env_rng` drives the world (context, human, support, final choice) and
/// `policy_rng` drives the meta-policy, so different policies can be compared
/// on identical worlds.
pub fn simulate_episode<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    scenario: &ScenarioSpec,
    state: MetaPolicyState,
    env_rng: &mut R1,
    policy_rng: &mut R2,
) -> Result<(EpisodeResult, MetaPolicyState)> {
    let Draws {
        context,
        b1,
        intended,
        proposed,
    } = draw_situation(scenario, env_rng);
    let human = &scenario.human;
    let ordering = state.rank_explainers(context, proposed, policy_rng)?;

    let mut belief = b1;
    let mut shown = Vec::new();
    if human.always_show || intended != proposed {
        while shown.len() < human.max_views {
            if human.confidence_threshold.is_some_and(|t| belief.max_prob() >= t) {
                break;
            }
            let Some(e) = next_explainer(&ordering, &shown) else {
                break;
            };
            belief = update_belief(&belief, scenario.q_true.row(e, context), shown.len() + 1)?;
            shown.push(e);
        }
    }
    let final_action = draw_action(&belief, human.final_rule, env_rng);
    let record = InteractionRecord {
        context,
        intended,
        proposed,
        shown,
        final_action,
    };
    let state = state.record_feedback(&record, policy_rng)?;
    Ok((result(scenario, record), state))
}

fn result(scenario: &ScenarioSpec, record: InteractionRecord) -> EpisodeResult {
    EpisodeResult {
        correct: record.final_action == scenario.optimal[record.context],
        agreed: record.final_action == record.proposed,
        views: record.shown.len(),
        record,
    }
}

impl System {
    pub fn step<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        self,
        scenario: &ScenarioSpec,
        env_rng: &mut R1,
        policy_rng: &mut R2,
    ) -> Result<(EpisodeResult, System)> {
        match self {
            System::Assisted(state) => {
                let (r, state) = simulate_episode(scenario, state, env_rng, policy_rng)?;
                Ok((r, System::Assisted(state)))
            }
            unassisted => {
                let d = draw_situation(scenario, env_rng);
                let final_action = match unassisted {
                    System::HumanAlone => d.intended,
                    _ => d.proposed,
                };
                // keep the env stream aligned with assisted episodes
                let _: f64 = env_rng.random();
                let record = InteractionRecord {
                    context: d.context,
                    intended: d.intended,
                    proposed: d.proposed,
                    shown: Vec::new(),
                    final_action,
                };
                Ok((result(scenario, record), unassisted))
            }
        }
    }
}

/// Runs `spec.n_episodes` episodes with a persistent meta-policy.
pub fn run_experiment(scenario: &ScenarioSpec, spec: &ExperimentSpec) -> Result<MetricSeries> {
    scenario.validate()?;
    let mut policy_rng = seeded(spec.seed, 1);
    let system = spec.arm.build(scenario, &mut policy_rng)?;
    run_loop(scenario, system, spec, policy_rng, None).map(|(m, _)| m)
}

/// Like [`run_experiment`] but starting from an existing system, for example
/// a warm-started Ardent state.
pub fn run_with_system(scenario: &ScenarioSpec, system: System, spec: &ExperimentSpec) -> Result<(MetricSeries, System)> {
    scenario.validate()?;
    run_loop(scenario, system, spec, seeded(spec.seed, 1), None)
}

/// Runs an experiment and also returns every interaction record, for
/// example to warm-start another policy from them. With `system` set this
/// behaves like [`run_with_system`], otherwise like [`run_experiment`].
pub fn run_recorded(
    scenario: &ScenarioSpec,
    system: Option<System>,
    spec: &ExperimentSpec,
) -> Result<(MetricSeries, System, Vec<InteractionRecord>)> {
    scenario.validate()?;
    let mut policy_rng = seeded(spec.seed, 1);
    let system = match system {
        Some(s) => s,
        None => spec.arm.build(scenario, &mut policy_rng)?,
    };
    let mut records = Vec::with_capacity(spec.n_episodes);
    let (series, system) = run_loop(scenario, system, spec, policy_rng, Some(&mut records))?;
    Ok((series, system, records))
}

fn run_loop(
    scenario: &ScenarioSpec,
    mut system: System,
    spec: &ExperimentSpec,
    mut policy_rng: crate::rng::SimRng,
    mut records: Option<&mut Vec<InteractionRecord>>,
) -> Result<(MetricSeries, System)> {
    let mut env_rng = seeded(spec.seed, 0);
    let config = serde_json::to_value(spec)?;
    let mut series = MetricSeries::new(scenario.dims.n_contexts, spec.window, spec.seed, config);
    for _ in 0..spec.n_episodes {
        let (r, next) = system.step(scenario, &mut env_rng, &mut policy_rng)?;
        series.push(&r);
        if let Some(out) = records.as_deref_mut() {
            out.push(r.record);
        }
        system = next;
    }
    Ok((series, system))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dims, FinalActionRule};
    use crate::sim::scenario::binary_validation_scenario;

    #[test]
    fn zero_views_means_final_is_intended() {
        let mut s = binary_validation_scenario();
        s.human.max_views = 0;
        let mut state = MetaPolicyState::Random { dims: s.dims };
        let mut env = seeded(1, 0);
        let mut pol = seeded(1, 1);
        let (mut n1, mut ones) = (0usize, 0usize);
        for _ in 0..2000 {
            let (r, next) = simulate_episode(&s, state, &mut env, &mut pol).unwrap();
            state = next;
            assert!(r.record.shown.is_empty());
            assert_eq!(r.views, 0);
            if r.record.context == 0 {
                assert_eq!(r.record.final_action, r.record.intended);
            } else {
                n1 += 1;
                ones += r.record.final_action;
            }
        }
        // Undecided belief: the final draw is a fresh fair tie break.
        let rate = ones as f64 / n1 as f64;
        assert!((rate - 0.5).abs() < 4.0 * (0.25 / n1 as f64).sqrt(), "{rate}");
    }

    #[test]
    fn certain_humans_are_unpersuadable() {
        let s = binary_validation_scenario();
        for arm in [ArmSpec::Oracle, ArmSpec::Random, ArmSpec::Fixed { favourite: 1 }] {
            let mut pol = seeded(2, 1);
            let mut system = arm.build(&s, &mut pol).unwrap();
            let mut env = seeded(2, 0);
            for _ in 0..500 {
                let (r, next) = system.step(&s, &mut env, &mut pol).unwrap();
                system = next;
                if r.record.context == 0 {
                    assert_eq!(r.record.final_action, r.record.intended);
                }
            }
        }
    }

    #[test]
    fn episodes_are_deterministic() {
        let s = binary_validation_scenario();
        let cfg = FilterConfig {
            n_particles: 50,
            ..Default::default()
        };
        let run = || {
            let state = MetaPolicyState::ardent(cfg.clone(), s.dims, &mut seeded(3, 1)).unwrap();
            simulate_episode(&s, state, &mut seeded(3, 0), &mut seeded(3, 2)).unwrap()
        };
        let (a, sa) = run();
        let (b, sb) = run();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn threshold_stops_viewing() {
        let mut s = binary_validation_scenario();
        s.human.max_views = 2;
        s.human.confidence_threshold = Some(0.9);
        let state = MetaPolicyState::Oracle { q_true: s.q_true.clone() };
        let mut env = seeded(4, 0);
        let mut pol = seeded(4, 1);
        let mut state = state;
        for _ in 0..500 {
            let (r, next) = simulate_episode(&s, state, &mut env, &mut pol).unwrap();
            state = next;
            match (r.record.context, r.record.proposed) {
                (0, _) => assert_eq!(r.views, 0),
                (1, 1) => assert_eq!(r.record.shown, vec![1]),
                (1, _) => assert_eq!(r.record.shown, vec![0, 1]),
                _ => unreachable!(),
            }
            assert!(r.views <= s.human.max_views && r.views <= s.dims.n_explainers);
        }
    }

    #[test]
    fn agreement_gate_skips_explanations() {
        let mut s = binary_validation_scenario();
        s.human.always_show = false;
        let mut state = MetaPolicyState::Random { dims: s.dims };
        let mut env = seeded(5, 0);
        let mut pol = seeded(5, 1);
        for _ in 0..300 {
            let (r, next) = simulate_episode(&s, state, &mut env, &mut pol).unwrap();
            state = next;
            if r.record.intended == r.record.proposed {
                assert!(r.record.shown.is_empty());
            } else {
                assert_eq!(r.views, 1);
            }
        }
    }

    #[test]
    fn machine_alone_takes_the_proposal() {
        let s = binary_validation_scenario();
        let spec = ExperimentSpec {
            arm: ArmSpec::Machine,
            n_episodes: 200,
            seed: 0,
            window: 50,
        };
        let m = run_experiment(&s, &spec).unwrap();
        assert!(m.agreed().iter().all(|&a| a));
    }

    #[test]
    fn sample_rule_runs() {
        let mut s = binary_validation_scenario();
        s.human.final_rule = FinalActionRule::Sample;
        let dims = Dims::new(2, 2, 2).unwrap();
        assert_eq!(s.dims, dims);
        let spec = ExperimentSpec {
            arm: ArmSpec::Oracle,
            n_episodes: 100,
            seed: 1,
            window: 10,
        };
        assert_eq!(run_experiment(&s, &spec).unwrap().len(), 100);
    }
}
