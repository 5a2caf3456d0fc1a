use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Belief, Dims, FinalActionRule, PropensityTensor, TabularPolicy, SUM_TOLERANCE};
use crate::rng::seeded;

/// How a synthetic human consumes explanations and picks actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanBehaviorConfig {
    /// Most explanations viewed per interaction.
    pub max_views: usize,
    /// Stop early once the largest belief entry reaches this value.
    #[serde(default)]
    pub confidence_threshold: Option<f64>,
    pub final_rule: FinalActionRule,
    /// How the intended action is drawn from the initial belief.
    pub intended_rule: FinalActionRule,
    /// When false, no explanations are shown if intended and proposed agree.
    #[serde(default = "default_true")]
    pub always_show: bool,
}

fn default_true() -> bool {
    true
}

impl HumanBehaviorConfig {
    /// One explanation per interaction, argmax choices.
    pub fn single_view() -> Self {
        HumanBehaviorConfig {
            max_views: 1,
            confidence_threshold: None,
            final_rule: FinalActionRule::ArgmaxTieUniform,
            intended_rule: FinalActionRule::ArgmaxTieUniform,
            always_show: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefPrototype {
    pub weight: f64,
    pub belief: Belief,
}

/// A fully specified synthetic world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub dims: Dims,
    /// Probability of each context.
    pub context_dist: Vec<f64>,
    /// Correct action per context.
    pub optimal: Vec<usize>,
    /// Per context, a mixture of initial beliefs sampled each interaction.
    pub belief_prototypes: Vec<Vec<BeliefPrototype>>,
    pub support_policy: TabularPolicy,
    pub q_true: PropensityTensor,
    pub human: HumanBehaviorConfig,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidScenario(m));
        let d = self.dims;
        d.validate()?;
        if self.context_dist.len() != d.n_contexts {
            return bad(format!("context_dist has {} entries", self.context_dist.len()));
        }
        if Belief::new(self.context_dist.clone()).is_err() {
            return bad("context_dist is not a distribution".into());
        }
        if self.optimal.len() != d.n_contexts {
            return bad(format!("optimal has {} entries", self.optimal.len()));
        }
        for &a in &self.optimal {
            d.check_action(a)?;
        }
        if self.belief_prototypes.len() != d.n_contexts {
            return bad("need one prototype list per context".into());
        }
        for (x, protos) in self.belief_prototypes.iter().enumerate() {
            if protos.is_empty() {
                return bad(format!("context {x} has no belief prototypes"));
            }
            if protos.iter().any(|p| p.belief.len() != d.n_actions || !(p.weight >= 0.0)) {
                return bad(format!("context {x} has a malformed prototype"));
            }
            let total: f64 = protos.iter().map(|p| p.weight).sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return bad(format!("context {x} prototype weights sum to {total}"));
            }
        }
        if self.support_policy.n_contexts() != d.n_contexts || self.support_policy.n_actions() != d.n_actions {
            return bad("support policy shape mismatch".into());
        }
        if self.q_true.dims() != d {
            return bad("q_true shape mismatch".into());
        }
        if self.human.max_views > d.n_explainers {
            return bad(format!(
                "max_views {} exceeds the {} explainers",
                self.human.max_views, d.n_explainers
            ));
        }
        if let Some(t) = self.human.confidence_threshold {
            if !(t > 0.5 && t <= 1.0) {
                return bad(format!("confidence_threshold {t} not in (0.5, 1]"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: ScenarioSpec = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        ScenarioSpec::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn with_human(mut self, human: HumanBehaviorConfig) -> Self {
        self.human = human;
        self
    }
}

/// Two contexts, two actions, two explainers (`e₋ = 0`, `e₊ = 1`).
///
/// At `x = 0` the human is certain: 90% of the time of the correct action,
/// 10% of the wrong one, and certainty cannot be moved. At `x = 1` the human
/// is undecided and only `e₊` moves them, toward action 1. The support
/// policy is a coin at `x = 0` and 90% correct at `x = 1`. Humans view one
/// explanation and pick the argmax of their belief, breaking ties uniformly.
pub fn binary_validation_scenario() -> ScenarioSpec {
    let dims = Dims::new(2, 2, 2).expect("static dims");
    let mut q_true = PropensityTensor::ones(dims);
    q_true.set(1, 1, 1, 10.0).expect("positive");
    let proto = |weight: f64, probs: [f64; 2]| BeliefPrototype {
        weight,
        belief: Belief::new(probs.to_vec()).expect("static belief"),
    };
    ScenarioSpec {
        dims,
        context_dist: vec![0.5, 0.5],
        optimal: vec![0, 1],
        belief_prototypes: vec![
            vec![proto(0.9, [1.0, 0.0]), proto(0.1, [0.0, 1.0])],
            vec![proto(1.0, [0.5, 0.5])],
        ],
        support_policy: TabularPolicy::from_rows(vec![vec![0.5, 0.5], vec![0.1, 0.9]]).expect("static policy"),
        q_true,
        human: HumanBehaviorConfig::single_view(),
    }
}

/// Random world: policies are softmaxes of standard-normal logits, log
/// propensities are standard normal, optimal actions uniform, contexts
/// uniform. The human's initial belief is their policy row.
pub fn randomized_scenario(dims: Dims, seed: u64) -> Result<ScenarioSpec> {
    dims.validate()?;
    let mut rng = seeded(seed, 0);
    let softmax_rows = |rng: &mut crate::rng::SimRng| -> Result<TabularPolicy> {
        let rows = (0..dims.n_contexts)
            .map(|_| {
                let logits: Vec<f64> = (0..dims.n_actions).map(|_| StandardNormal.sample(rng)).collect();
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
                Belief::from_weights(&w)
            })
            .collect::<Result<Vec<_>>>()?;
        TabularPolicy::new(rows)
    };
    let human = softmax_rows(&mut rng)?;
    let support = softmax_rows(&mut rng)?;
    let log_q: Vec<f64> = (0..dims.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
    let q_true = PropensityTensor::from_log(dims, &log_q)?;
    let optimal = (0..dims.n_contexts).map(|_| rng.random_range(0..dims.n_actions)).collect();
    let scenario = ScenarioSpec {
        dims,
        context_dist: vec![1.0 / dims.n_contexts as f64; dims.n_contexts],
        optimal,
        belief_prototypes: human
            .rows()
            .iter()
            .map(|b| {
                vec![BeliefPrototype {
                    weight: 1.0,
                    belief: b.clone(),
                }]
            })
            .collect(),
        support_policy: support,
        q_true,
        human: HumanBehaviorConfig::single_view(),
    };
    scenario.validate()?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_scenario_values() {
        let s = binary_validation_scenario();
        s.validate().unwrap();
        // marginal P(intended correct | x = 0) under argmax of the prototypes
        let acc0: f64 = s.belief_prototypes[0]
            .iter()
            .filter(|p| p.belief.argmax_set() == vec![s.optimal[0]])
            .map(|p| p.weight)
            .sum();
        assert!((acc0 - 0.9).abs() < 1e-15);
        assert_eq!(s.q_true.get(1, 1, 1), 10.0);
        let others = s.q_true.values().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(others, 7);
        assert_eq!(s.support_policy.row(1).probs()[1], 0.9);
    }

    #[test]
    fn randomized_scenario_is_seeded_and_positive() {
        let dims = Dims::new(2, 3, 4).unwrap();
        let a = randomized_scenario(dims, 7).unwrap();
        let b = randomized_scenario(dims, 7).unwrap();
        let c = randomized_scenario(dims, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.q_true.values().iter().all(|&v| v > 0.0 && v.is_finite()));
    }

    #[test]
    fn randomized_log_propensities_are_standard_normal() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let dims = Dims::new(2, 3, 4).unwrap();
        let mut pooled: Vec<f64> = (0..200)
            .flat_map(|seed| randomized_scenario(dims, seed).unwrap().q_true.log_values())
            .collect();
        pooled.sort_by(f64::total_cmp);
        let n = pooled.len() as f64;
        let norm = Normal::new(0.0, 1.0).unwrap();
        let d = pooled
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let f = norm.cdf(v);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov limiting distribution: P(D·√n > 1.628) ≈ 0.01.
        assert!(d * n.sqrt() < 1.628, "KS statistic {}", d * n.sqrt());
    }

    #[test]
    fn scenario_json_round_trip_and_validation() {
        let s = binary_validation_scenario();
        let json = serde_json::to_string_pretty(&s).unwrap();
        assert_eq!(ScenarioSpec::from_json(&json).unwrap(), s);

        let mut bad = s.clone();
        bad.human.max_views = 3;
        assert!(bad.validate().is_err());
        let mut bad = s.clone();
        bad.belief_prototypes[1][0].weight = 0.5;
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.human.confidence_threshold = Some(0.4);
        assert!(bad.validate().is_err());
    }
}
