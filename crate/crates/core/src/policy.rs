//! Explainer orderings: Thompson-sampled (Ardent) plus baselines.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{
    init_particles, posterior_update, sample_particle, FilterConfig, HumanPolicyEstimate,
    ParticleSet,
};
use crate::model::{Dims, InteractionRecord, PropensityTensor};

/// A permutation of all explainer ids, best first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct ExplainerOrdering(Vec<usize>);

impl ExplainerOrdering {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &e in &order {
            if e >= order.len() || std::mem::replace(&mut seen[e], true) {
                return Err(Error::ProtocolViolation(format!(
                    "{order:?} is not a permutation"
                )));
            }
        }
        Ok(ExplainerOrdering(order))
    }

    pub fn identity(n: usize) -> Self {
        ExplainerOrdering((0..n).collect())
    }

    /// Descending by score; ties go to the smaller id.
    pub fn by_scores_desc(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
        ExplainerOrdering(order)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<usize>> for ExplainerOrdering {
    type Error = Error;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        ExplainerOrdering::new(v)
    }
}

impl From<ExplainerOrdering> for Vec<usize> {
    fn from(o: ExplainerOrdering) -> Self {
        o.0
    }
}

/// First explainer of `ordering` not yet viewed, or `None` when exhausted.
pub fn next_explainer(ordering: &ExplainerOrdering, viewed: &[usize]) -> Option<usize> {
    ordering.0.iter().copied().find(|e| !viewed.contains(e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Ardent,
    Random,
    Oracle,
    Fixed,
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ardent" => Ok(PolicyKind::Ardent),
            "random" => Ok(PolicyKind::Random),
            "oracle" => Ok(PolicyKind::Oracle),
            "fixed" | "favourite" => Ok(PolicyKind::Fixed),
            other => Err(Error::InvalidConfig(format!("unknown policy kind {other:?}"))),
        }
    }
}

/// State of one meta-policy instance.
#[derive(Clone, Debug, PartialEq)]
pub enum MetaPolicyState {
    Ardent {
        particles: ParticleSet,
        human: HumanPolicyEstimate,
        config: FilterConfig,
    },
    Random {
        dims: Dims,
    },
    /// Ranks by known ground-truth propensities.
    Oracle {
        q_true: PropensityTensor,
    },
    /// Always shows `favourite` first, then the rest by ascending id.
    Fixed {
        dims: Dims,
        favourite: usize,
    },
}

impl MetaPolicyState {
    /// Cold-start Ardent with particles drawn from the prior.
    pub fn ardent<R: Rng + ?Sized>(config: FilterConfig, dims: Dims, rng: &mut R) -> Result<Self> {
        let particles = init_particles(&config, dims, rng)?;
        let human = HumanPolicyEstimate::for_dims(&dims, config.human_policy_smoothing)?;
        Ok(MetaPolicyState::Ardent {
            particles,
            human,
            config,
        })
    }

    /// Ardent starting from given particles (for example a warm start).
    pub fn ardent_from(config: FilterConfig, particles: ParticleSet, human: Option<HumanPolicyEstimate>) -> Result<Self> {
        config.validate()?;
        let dims = particles.dims();
        let human = match human {
            Some(h) => {
                if h.n_contexts() != dims.n_contexts || h.belief(0).len() != dims.n_actions {
                    return Err(Error::InvalidDims("human estimate does not match particles".into()));
                }
                h
            }
            None => HumanPolicyEstimate::for_dims(&dims, config.human_policy_smoothing)?,
        };
        Ok(MetaPolicyState::Ardent {
            particles,
            human,
            config,
        })
    }

    pub fn fixed(dims: Dims, favourite: usize) -> Result<Self> {
        dims.check_explainer(favourite)?;
        Ok(MetaPolicyState::Fixed { dims, favourite })
    }

    pub fn kind(&self) -> PolicyKind {
        match self {
            MetaPolicyState::Ardent { .. } => PolicyKind::Ardent,
            MetaPolicyState::Random { .. } => PolicyKind::Random,
            MetaPolicyState::Oracle { .. } => PolicyKind::Oracle,
            MetaPolicyState::Fixed { .. } => PolicyKind::Fixed,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            MetaPolicyState::Ardent { particles, .. } => particles.dims(),
            MetaPolicyState::Random { dims } | MetaPolicyState::Fixed { dims, .. } => *dims,
            MetaPolicyState::Oracle { q_true } => q_true.dims(),
        }
    }

    pub fn particles(&self) -> Option<&ParticleSet> {
        match self {
            MetaPolicyState::Ardent { particles, .. } => Some(particles),
            _ => None,
        }
    }

    /// Ordering for one interaction at context `x` arguing for `a_target`.
    ///
    /// Ardent samples one particle and sorts by its propensities for
    /// `(·, x, a_target)`, which is the iterated argmax without replacement.
    pub fn rank_explainers<R: Rng + ?Sized>(&self, x: usize, a_target: usize, rng: &mut R) -> Result<ExplainerOrdering> {
        let dims = self.dims();
        dims.check_context(x)?;
        dims.check_action(a_target)?;
        let slice = |values: &[f64]| -> Vec<f64> {
            (0..dims.n_explainers)
                .map(|e| values[dims.index(e, x, a_target)])
                .collect()
        };
        Ok(match self {
            MetaPolicyState::Ardent { particles, .. } => {
                let k = sample_particle(particles, rng)?;
                // exp is monotone, so sorting log-propensities gives the same order.
                ExplainerOrdering::by_scores_desc(&slice(particles.theta(k)))
            }
            MetaPolicyState::Oracle { q_true } => ExplainerOrdering::by_scores_desc(&slice(q_true.values())),
            MetaPolicyState::Random { dims } => {
                let mut order: Vec<usize> = (0..dims.n_explainers).collect();
                order.shuffle(rng);
                ExplainerOrdering(order)
            }
            MetaPolicyState::Fixed { dims, favourite } => {
                let mut order = vec![*favourite];
                order.extend((0..dims.n_explainers).filter(|e| e != favourite));
                ExplainerOrdering(order)
            }
        })
    }

    /// Routes a completed interaction into the posterior. Non-learning kinds
    /// only validate the record.
    pub fn record_feedback<R: Rng + ?Sized>(self, record: &InteractionRecord, rng: &mut R) -> Result<Self> {
        record.validate(&self.dims())?;
        match self {
            MetaPolicyState::Ardent {
                particles,
                mut human,
                config,
            } => {
                human.observe(record.context, record.intended)?;
                let b1 = human.belief(record.context);
                let particles = posterior_update(&particles, record, &b1, &config, rng)?;
                Ok(MetaPolicyState::Ardent {
                    particles,
                    human,
                    config,
                })
            }
            other => Ok(other),
        }
    }
}
