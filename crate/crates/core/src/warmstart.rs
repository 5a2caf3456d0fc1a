//! Initial particles from logged interactions.
//!
//! A Metropolis-within-Gibbs chain targets `prior(θ)·∏ P(final | θ)` over the
//! logged records. Each coordinate has its own Gaussian random-walk step,
//! adapted during burn-in only. Records are grouped by
//! `(context, shown set, final)` because the likelihood does not depend on the
//! order in which explainers were shown.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterConfig, ParticleSet};
use crate::model::{log_choice_probability, Dims, InteractionRecord, TabularPolicy};

/// Acceptance rates outside this range after tuning are reported as failures.
pub const ACCEPTANCE_BOUNDS: (f64, f64) = (0.01, 0.95);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WarmStartConfig {
    pub burn_in: usize,
    /// Sweeps between retained states; at least 10.
    pub thin: usize,
    /// Starting per-coordinate proposal standard deviation.
    pub initial_step: f64,
    pub adapt: bool,
    pub adapt_batch: usize,
    pub target_acceptance: f64,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig {
            burn_in: 1000,
            thin: 10,
            initial_step: 0.5,
            adapt: true,
            adapt_batch: 50,
            target_acceptance: 0.44,
        }
    }
}

impl WarmStartConfig {
    fn validate(&self) -> Result<()> {
        if self.thin < 10 {
            return Err(Error::InvalidConfig(format!("thin must be at least 10, got {}", self.thin)));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return Err(Error::InvalidConfig("initial_step must be positive".into()));
        }
        if self.adapt_batch == 0 {
            return Err(Error::InvalidConfig("adapt_batch must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct WarmStartOutcome {
    pub particles: ParticleSet,
    /// Acceptance rate over the post-burn-in sweeps.
    pub acceptance_rate: f64,
    pub step_sizes: Vec<f64>,
}

/// Equally weighted particles drawn by MCMC from the posterior given `logs`.
pub fn warm_start_particles<R: Rng + ?Sized>(
    config: &FilterConfig,
    dims: Dims,
    logs: &[InteractionRecord],
    b1_per_context: &TabularPolicy,
    rng: &mut R,
) -> Result<ParticleSet> {
    run_warm_start(config, &WarmStartConfig::default(), dims, logs, b1_per_context, rng)
        .map(|o| o.particles)
}

pub fn run_warm_start<R: Rng + ?Sized>(
    config: &FilterConfig,
    mcmc: &WarmStartConfig,
    dims: Dims,
    logs: &[InteractionRecord],
    b1_per_context: &TabularPolicy,
    rng: &mut R,
) -> Result<WarmStartOutcome> {
    config.validate()?;
    mcmc.validate()?;
    dims.validate()?;
    if b1_per_context.n_contexts() != dims.n_contexts || b1_per_context.n_actions() != dims.n_actions {
        return Err(Error::InvalidDims(format!(
            "b1 policy is {}x{}, expected {}x{}",
            b1_per_context.n_contexts(),
            b1_per_context.n_actions(),
            dims.n_contexts,
            dims.n_actions
        )));
    }
    for r in logs {
        r.validate(&dims)?;
    }

    let target = Target::new(dims, config, logs, b1_per_context);
    let d = dims.len();
    let prior = Normal::new(config.prior_log_mean, config.prior_log_std)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut theta: Vec<f64> = (0..d).map(|_| prior.sample(rng)).collect();
    let mut ll: Vec<f64> = target.groups.iter().map(|g| g.log_lik(&dims, &theta, &target.log_b1)).collect();
    if ll.contains(&f64::NEG_INFINITY) {
        return Err(Error::InvalidScenario(
            "a logged final action has zero probability under b1".into(),
        ));
    }
    let mut steps = vec![mcmc.initial_step; d];

    let mut batch_accepts = vec![0usize; d];
    for sweep in 1..=mcmc.burn_in {
        target.sweep(&mut theta, &mut ll, &steps, &mut batch_accepts, rng);
        if mcmc.adapt && sweep % mcmc.adapt_batch == 0 {
            for (step, acc) in steps.iter_mut().zip(&mut batch_accepts) {
                let rate = *acc as f64 / mcmc.adapt_batch as f64;
                *step *= (2.0 * (rate - mcmc.target_acceptance)).exp();
                *acc = 0;
            }
        }
    }

    let n = config.n_particles;
    let mut accepts = vec![0usize; d];
    let mut thetas = Vec::with_capacity(n * d);
    for _ in 0..n {
        for _ in 0..mcmc.thin {
            target.sweep(&mut theta, &mut ll, &steps, &mut accepts, rng);
        }
        thetas.extend_from_slice(&theta);
    }
    let proposals = (n * mcmc.thin * d) as f64;
    let rate = accepts.iter().sum::<usize>() as f64 / proposals;
    let (min, max) = ACCEPTANCE_BOUNDS;
    if !(min..=max).contains(&rate) {
        return Err(Error::TuningFailure { rate, min, max });
    }
    Ok(WarmStartOutcome {
        particles: ParticleSet::uniform(dims, thetas)?,
        acceptance_rate: rate,
        step_sizes: steps,
    })
}

struct Group {
    context: usize,
    shown: Vec<usize>,
    final_action: usize,
    count: f64,
}

impl Group {
    fn log_lik(&self, dims: &Dims, theta: &[f64], log_b1: &[Vec<f64>]) -> f64 {
        log_choice_probability(
            dims,
            theta,
            &log_b1[self.context],
            self.context,
            &self.shown,
            self.final_action,
        )
    }
}

struct Target {
    dims: Dims,
    prior_mean: f64,
    prior_var: f64,
    log_b1: Vec<Vec<f64>>,
    groups: Vec<Group>,
    /// Groups whose likelihood depends on each coordinate.
    touching: Vec<Vec<usize>>,
}

impl Target {
    fn new(dims: Dims, config: &FilterConfig, logs: &[InteractionRecord], b1: &TabularPolicy) -> Self {
        let mut grouped: BTreeMap<(usize, Vec<usize>, usize), usize> = BTreeMap::new();
        for r in logs {
            let mut shown = r.shown.clone();
            shown.sort_unstable();
            *grouped.entry((r.context, shown, r.final_action)).or_default() += 1;
        }
        let groups: Vec<Group> = grouped
            .into_iter()
            .map(|((context, shown, final_action), count)| Group {
                context,
                shown,
                final_action,
                count: count as f64,
            })
            .collect();
        let mut touching = vec![Vec::new(); dims.len()];
        for (gi, g) in groups.iter().enumerate() {
            for &e in &g.shown {
                for a in 0..dims.n_actions {
                    touching[dims.index(e, g.context, a)].push(gi);
                }
            }
        }
        Target {
            dims,
            prior_mean: config.prior_log_mean,
            prior_var: config.prior_log_std * config.prior_log_std,
            log_b1: b1.rows().iter().map(|b| b.log_probs()).collect(),
            groups,
            touching,
        }
    }

    fn sweep<R: Rng + ?Sized>(
        &self,
        theta: &mut [f64],
        ll: &mut [f64],
        steps: &[f64],
        accepts: &mut [usize],
        rng: &mut R,
    ) {
        let mut proposed_ll = Vec::new();
        for c in 0..theta.len() {
            let old = theta[c];
            let z: f64 = StandardNormal.sample(rng);
            let new = old + steps[c] * z;
            let mut delta = ((old - self.prior_mean).powi(2) - (new - self.prior_mean).powi(2))
                / (2.0 * self.prior_var);
            theta[c] = new;
            proposed_ll.clear();
            for &gi in &self.touching[c] {
                let g = &self.groups[gi];
                let v = g.log_lik(&self.dims, theta, &self.log_b1);
                delta += g.count * (v - ll[gi]);
                proposed_ll.push(v);
            }
            let u: f64 = rng.random();
            if u.ln() < delta {
                for (&gi, &v) in self.touching[c].iter().zip(&proposed_ll) {
                    ll[gi] = v;
                }
                accepts[c] += 1;
            } else {
                theta[c] = old;
            }
        }
    }
}
