//! Exact expected accuracy by exhaustive enumeration.
//!
//! Enumerates context, belief prototype, intended action, proposal, and
//! ordering; the viewing sequence under the stopping rule is then
//! deterministic, and the final choice is integrated exactly (tie coin for
//! the argmax rule, the belief itself for the sampling rule). Beliefs are
//! recomputed from the closed-form product on each prefix rather than folded
//! step by step, so this does not share the simulator's update path.

use itertools::Itertools;

use super::scenario::ScenarioSpec;
use crate::error::{Error, Result};
use crate::model::{Belief, FinalActionRule};

pub const MAX_ENUMERABLE_EXPLAINERS: usize = 6;

/// Fixed (non-learning) rule mapping `(x, a_target)` to orderings.
#[derive(Clone, Debug, PartialEq)]
pub enum OrderingRule {
    /// Descending ground-truth propensity, ties by ascending id.
    Oracle,
    /// Every permutation equally likely.
    UniformRandom,
    Fixed(usize),
    IdAscending,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Strategy {
    HumanAlone,
    MachineAlone,
    Explain(OrderingRule),
}

/// Expected accuracy conditional on each context.
pub fn closed_form_accuracy(scenario: &ScenarioSpec, strategy: &Strategy) -> Result<Vec<f64>> {
    scenario.validate()?;
    let dims = scenario.dims;
    if dims.n_explainers > MAX_ENUMERABLE_EXPLAINERS {
        return Err(Error::TooLarge(format!(
            "{} explainers; enumeration supports at most {MAX_ENUMERABLE_EXPLAINERS}",
            dims.n_explainers
        )));
    }
    let human = &scenario.human;
    let mut out = Vec::with_capacity(dims.n_contexts);
    for x in 0..dims.n_contexts {
        let target = scenario.optimal[x];
        let support = scenario.support_policy.row(x).probs();
        let mut acc = 0.0;
        for proto in &scenario.belief_prototypes[x] {
            if proto.weight == 0.0 {
                continue;
            }
            let b1 = &proto.belief;
            for (intended, p_int) in choice_distribution(b1, human.intended_rule) {
                for (proposed, &p_sup) in support.iter().enumerate() {
                    if p_sup == 0.0 {
                        continue;
                    }
                    let w = proto.weight * p_int * p_sup;
                    let p_correct = match strategy {
                        Strategy::HumanAlone => (intended == target) as u8 as f64,
                        Strategy::MachineAlone => (proposed == target) as u8 as f64,
                        Strategy::Explain(rule) => {
                            let mut sum = 0.0;
                            for (p_order, order) in orderings(scenario, rule, x, proposed) {
                                let show = human.always_show || intended != proposed;
                                let belief = viewed_belief(scenario, b1, x, &order, show);
                                let p_final = choice_distribution(&belief, human.final_rule)
                                    .into_iter()
                                    .filter(|(a, _)| *a == target)
                                    .map(|(_, p)| p)
                                    .sum::<f64>();
                                sum += p_order * p_final;
                            }
                            sum
                        }
                    };
                    acc += w * p_correct;
                }
            }
        }
        out.push(acc);
    }
    Ok(out)
}

fn choice_distribution(b: &Belief, rule: FinalActionRule) -> Vec<(usize, f64)> {
    match rule {
        FinalActionRule::Sample => b.probs().iter().copied().enumerate().filter(|(_, p)| *p > 0.0).collect(),
        FinalActionRule::ArgmaxTieUniform => {
            let ties = b.argmax_set();
            let p = 1.0 / ties.len() as f64;
            ties.into_iter().map(|a| (a, p)).collect()
        }
    }
}

fn orderings(scenario: &ScenarioSpec, rule: &OrderingRule, x: usize, a_target: usize) -> Vec<(f64, Vec<usize>)> {
    let n = scenario.dims.n_explainers;
    match rule {
        OrderingRule::Oracle => {
            let mut order: Vec<usize> = (0..n).collect();
            let q = &scenario.q_true;
            order.sort_by(|&i, &j| q.get(j, x, a_target).total_cmp(&q.get(i, x, a_target)).then(i.cmp(&j)));
            vec![(1.0, order)]
        }
        OrderingRule::UniformRandom => {
            let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
            let p = 1.0 / perms.len() as f64;
            perms.into_iter().map(|o| (p, o)).collect()
        }
        OrderingRule::Fixed(fav) => {
            let mut order = vec![*fav];
            order.extend((0..n).filter(|e| e != fav));
            vec![(1.0, order)]
        }
        OrderingRule::IdAscending => vec![(1.0, (0..n).collect())],
    }
}

/// Belief after the human stops viewing `order`.
fn viewed_belief(scenario: &ScenarioSpec, b1: &Belief, x: usize, order: &[usize], show: bool) -> Belief {
    let human = &scenario.human;
    let limit = if show { human.max_views.min(order.len()) } else { 0 };
    let mut belief = b1.clone();
    for t in 0..limit {
        if human.confidence_threshold.is_some_and(|tau| belief.max_prob() >= tau) {
            break;
        }
        belief = product_belief(scenario, b1, x, &order[..=t]);
    }
    belief
}

fn product_belief(scenario: &ScenarioSpec, b1: &Belief, x: usize, shown: &[usize]) -> Belief {
    let weights: Vec<f64> = (0..scenario.dims.n_actions)
        .map(|a| {
            shown
                .iter()
                .fold(b1.probs()[a], |acc, &e| acc * scenario.q_true.get(e, x, a))
        })
        .collect();
    Belief::from_weights(&weights).expect("positive propensities keep some mass")
}
