//! Sequential Monte Carlo posterior over propensities.
//!
//! Particles are log-propensities `θ = log q`, one flat vector of length
//! `|E|·|X|·|A|` each. The update is a Liu–West style auxiliary filter:
//! particles are shrunk toward the weighted mean by `α`, reweighted by the
//! likelihood at the shrunk locations, resampled, then jittered with a
//! Gaussian kernel of covariance `(1 − α²)Σ`. Working in log space keeps
//! every propensity positive.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    log_choice_probability, Belief, Dims, InteractionRecord, PropensityTensor, TabularPolicy,
    SUM_TOLERANCE,
};
use crate::rng::substream;

/// Above this many propensity entries the kernel covariance is diagonal.
pub const DENSE_COVARIANCE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Shrinkage (discount) factor, strictly inside `(0, 1)`.
    pub alpha: f64,
    pub prior_log_mean: f64,
    pub prior_log_std: f64,
    /// Added to the kernel covariance diagonal before factorization.
    pub cov_jitter: f64,
    /// Laplace count for the human-policy estimate.
    pub human_policy_smoothing: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            n_particles: 1000,
            alpha: 0.98,
            prior_log_mean: 0.0,
            prior_log_std: 1.0,
            cov_jitter: 1e-6,
            human_policy_smoothing: 1.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_particles == 0 {
            return bad("n_particles must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !self.prior_log_mean.is_finite() {
            return bad("prior_log_mean must be finite".into());
        }
        if !(self.prior_log_std > 0.0 && self.prior_log_std.is_finite()) {
            return bad(format!("prior_log_std must be positive, got {}", self.prior_log_std));
        }
        if !(self.cov_jitter > 0.0 && self.cov_jitter.is_finite()) {
            return bad(format!("cov_jitter must be positive, got {}", self.cov_jitter));
        }
        if !(self.human_policy_smoothing > 0.0 && self.human_policy_smoothing.is_finite()) {
            return bad("human_policy_smoothing must be positive".into());
        }
        Ok(())
    }
}

/// Weighted particles over log-propensities.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    dims: Dims,
    thetas: Vec<f64>,
    weights: Vec<f64>,
}

impl ParticleSet {
    /// `thetas` is row-major: particle `i` occupies `[i·d, (i+1)·d)`.
    pub fn new(dims: Dims, thetas: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        let d = dims.len();
        if weights.is_empty() || thetas.len() != weights.len() * d {
            return Err(Error::InvalidConfig(format!(
                "{} theta values do not match {} particles of dimension {d}",
                thetas.len(),
                weights.len()
            )));
        }
        if thetas.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvariantViolation("non-finite theta".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvariantViolation("negative or non-finite weight".into()));
        }
        check_weight_sum(&weights)?;
        Ok(ParticleSet {
            dims,
            thetas,
            weights,
        })
    }

    /// Equally weighted particles.
    pub fn uniform(dims: Dims, thetas: Vec<f64>) -> Result<Self> {
        let n = thetas.len() / dims.len().max(1);
        ParticleSet::new(dims, thetas, vec![1.0 / n as f64; n])
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_particles(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn theta(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.thetas[i * d..(i + 1) * d]
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weighted mean and covariance of the thetas (row-major `d×d`).
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let d = self.dim();
        let mean = self.weighted_mean();
        let mut cov = vec![0.0; d * d];
        let mut diff = vec![0.0; d];
        for (theta, &w) in self.thetas.chunks_exact(d).zip(&self.weights) {
            if w == 0.0 {
                continue;
            }
            for (k, v) in diff.iter_mut().enumerate() {
                *v = theta[k] - mean[k];
            }
            for i in 0..d {
                let wi = w * diff[i];
                for j in 0..=i {
                    cov[i * d + j] += wi * diff[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                cov[j * d + i] = cov[i * d + j];
            }
        }
        (mean, cov)
    }

    fn weighted_mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut mean = vec![0.0; d];
        for (theta, &w) in self.thetas.chunks_exact(d).zip(&self.weights) {
            for (m, t) in mean.iter_mut().zip(theta) {
                *m += w * t;
            }
        }
        mean
    }

    fn weighted_variances(&self, mean: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut var = vec![0.0; d];
        for (theta, &w) in self.thetas.chunks_exact(d).zip(&self.weights) {
            for k in 0..d {
                let diff = theta[k] - mean[k];
                var[k] += w * diff * diff;
            }
        }
        var
    }
}

fn check_weight_sum(weights: &[f64]) -> Result<()> {
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::InvariantViolation(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Smoothed counts of intended actions per context; each row normalizes to
/// the initial belief `b1(x)` used by the likelihood.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HumanPolicyEstimate {
    smoothing: f64,
    n_actions: usize,
    counts: Vec<f64>,
}

impl HumanPolicyEstimate {
    pub fn new(n_contexts: usize, n_actions: usize, smoothing: f64) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidConfig("smoothing must be positive".into()));
        }
        if n_contexts == 0 || n_actions == 0 {
            return Err(Error::InvalidDims("empty human policy estimate".into()));
        }
        Ok(HumanPolicyEstimate {
            smoothing,
            n_actions,
            counts: vec![smoothing; n_contexts * n_actions],
        })
    }

    pub fn for_dims(dims: &Dims, smoothing: f64) -> Result<Self> {
        HumanPolicyEstimate::new(dims.n_contexts, dims.n_actions, smoothing)
    }

    pub fn n_contexts(&self) -> usize {
        self.counts.len() / self.n_actions
    }

    pub fn counts(&self, context: usize) -> &[f64] {
        &self.counts[context * self.n_actions..(context + 1) * self.n_actions]
    }

    pub fn observe(&mut self, context: usize, intended: usize) -> Result<()> {
        if context >= self.n_contexts() {
            return Err(Error::OutOfRange {
                kind: "context",
                id: context,
                bound: self.n_contexts(),
            });
        }
        if intended >= self.n_actions {
            return Err(Error::OutOfRange {
                kind: "action",
                id: intended,
                bound: self.n_actions,
            });
        }
        self.counts[context * self.n_actions + intended] += 1.0;
        Ok(())
    }

    pub fn belief(&self, context: usize) -> Belief {
        Belief::from_weights(self.counts(context)).expect("counts are positive")
    }

    pub fn to_policy(&self) -> TabularPolicy {
        TabularPolicy::new((0..self.n_contexts()).map(|x| self.belief(x)).collect())
            .expect("rows share a length")
    }
}

pub fn update_human_policy(
    mut est: HumanPolicyEstimate,
    context: usize,
    intended: usize,
) -> Result<HumanPolicyEstimate> {
    est.observe(context, intended)?;
    Ok(est)
}

/// `N` independent prior draws with uniform weights.
pub fn init_particles<R: Rng + ?Sized>(config: &FilterConfig, dims: Dims, rng: &mut R) -> Result<ParticleSet> {
    config.validate()?;
    dims.validate()?;
    let normal = Normal::new(config.prior_log_mean, config.prior_log_std)
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n = config.n_particles;
    let thetas = (0..n * dims.len()).map(|_| normal.sample(rng)).collect();
    ParticleSet::new(dims, thetas, vec![1.0 / n as f64; n])
}

/// Draws a particle index with probability proportional to its weight.
pub fn sample_particle<R: Rng + ?Sized>(ps: &ParticleSet, rng: &mut R) -> Result<usize> {
    check_weight_sum(&ps.weights)?;
    let u: f64 = rng.random();
    Ok(crate::model::categorical_from_uniform(&ps.weights, u))
}

/// Weighted mean of `exp(θ)`.
pub fn posterior_mean(ps: &ParticleSet) -> PropensityTensor {
    let d = ps.dim();
    let mut mean = vec![0.0; d];
    for (theta, &w) in ps.thetas.chunks_exact(d).zip(&ps.weights) {
        for (m, t) in mean.iter_mut().zip(theta) {
            *m += w * t.exp();
        }
    }
    // An all-underflow entry would be zero; clamp to the smallest positive value.
    for m in &mut mean {
        if *m <= 0.0 {
            *m = f64::MIN_POSITIVE;
        }
    }
    PropensityTensor::new(ps.dims, mean).expect("exp of finite thetas")
}

/// `1 / Σ w²`.
pub fn effective_sample_size(ps: &ParticleSet) -> f64 {
    let s: f64 = ps.weights.iter().map(|w| w * w).sum();
    (1.0 / s).clamp(1.0, ps.n_particles() as f64)
}

/// Normalized first-stage weights `p ∝ w·P(a | μ)` at the shrunk locations.
pub fn first_stage_weights(
    ps: &ParticleSet,
    record: &InteractionRecord,
    b1: &Belief,
    config: &FilterConfig,
) -> Result<Vec<f64>> {
    let prep = Prepared::new(ps, record, b1, config)?;
    let (_, shrunk_ll) = prep.shrink(ps);
    prep.first_stage(ps, &shrunk_ll)
}

/// One posterior update from a completed interaction. Returns a new set.
pub fn posterior_update<R: Rng + ?Sized>(
    ps: &ParticleSet,
    record: &InteractionRecord,
    b1: &Belief,
    config: &FilterConfig,
    rng: &mut R,
) -> Result<ParticleSet> {
    let prep = Prepared::new(ps, record, b1, config)?;
    let d = ps.dim();
    let n = ps.n_particles();

    let (shrunk, shrunk_ll) = prep.shrink(ps);
    let p = prep.first_stage(ps, &shrunk_ll)?;
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in &p {
        acc += v;
        cum.push(acc);
    }
    let kernel = Kernel::build(ps, &prep.mean, config)?;

    let mut key = [0u8; 32];
    rng.fill(&mut key);

    let mut thetas = vec![0.0; n * d];
    let mut log_w = vec![0.0; n];
    thetas
        .par_chunks_mut(d)
        .zip(log_w.par_iter_mut())
        .enumerate()
        .for_each(|(i, (theta, lw))| {
            let mut r = substream(key, i as u64);
            let u: f64 = r.random::<f64>() * acc;
            let k = cum.partition_point(|&c| c <= u).min(n - 1);
            let mu = &shrunk[k * d..(k + 1) * d];
            kernel.draw(mu, theta, &mut r);
            *lw = prep.log_lik(theta) - shrunk_ll[k];
        });

    let weights = normalize_log_weights(&log_w).ok_or_else(|| {
        Error::Numerical("all rejuvenated particles have zero likelihood".into())
    })?;
    ParticleSet::new(ps.dims, thetas, weights)
}

struct Prepared<'a> {
    dims: Dims,
    record: &'a InteractionRecord,
    log_b1: Vec<f64>,
    alpha: f64,
    mean: Vec<f64>,
}

impl<'a> Prepared<'a> {
    fn new(
        ps: &ParticleSet,
        record: &'a InteractionRecord,
        b1: &Belief,
        config: &FilterConfig,
    ) -> Result<Self> {
        config.validate()?;
        let dims = ps.dims;
        record.validate(&dims)?;
        if b1.len() != dims.n_actions {
            return Err(Error::InvalidDims(format!(
                "b1 has {} entries, expected {}",
                b1.len(),
                dims.n_actions
            )));
        }
        Ok(Prepared {
            dims,
            record,
            log_b1: b1.log_probs(),
            alpha: config.alpha,
            mean: ps.weighted_mean(),
        })
    }

    #[inline]
    fn log_lik(&self, theta: &[f64]) -> f64 {
        log_choice_probability(
            &self.dims,
            theta,
            &self.log_b1,
            self.record.context,
            &self.record.shown,
            self.record.final_action,
        )
    }

    /// Shrunk locations `αθ + (1 − α)θ̄` and their log-likelihoods.
    fn shrink(&self, ps: &ParticleSet) -> (Vec<f64>, Vec<f64>) {
        let d = ps.dim();
        let a = self.alpha;
        let shrunk: Vec<f64> = ps
            .thetas
            .chunks_exact(d)
            .flat_map(|theta| theta.iter().zip(&self.mean).map(move |(t, m)| a * t + (1.0 - a) * m))
            .collect();
        let ll = shrunk.chunks_exact(d).map(|mu| self.log_lik(mu)).collect();
        (shrunk, ll)
    }

    fn first_stage(&self, ps: &ParticleSet, shrunk_ll: &[f64]) -> Result<Vec<f64>> {
        let log_p: Vec<f64> = ps
            .weights
            .iter()
            .zip(shrunk_ll)
            .map(|(&w, &ll)| if w > 0.0 { w.ln() + ll } else { f64::NEG_INFINITY })
            .collect();
        normalize_log_weights(&log_p).ok_or_else(|| Error::DegenerateUpdate {
            record: self.record.clone(),
        })
    }
}

/// Exponentiates and normalizes log weights; `None` if all are `-inf`.
fn normalize_log_weights(log_w: &[f64]) -> Option<Vec<f64>> {
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut w: Vec<f64> = log_w.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = w.iter().sum();
    for v in &mut w {
        *v /= z;
    }
    Some(w)
}

enum Kernel {
    /// Row-major lower Cholesky factor.
    Dense { d: usize, lower: Vec<f64> },
    Diagonal { sd: Vec<f64> },
}

impl Kernel {
    fn build(ps: &ParticleSet, mean: &[f64], config: &FilterConfig) -> Result<Self> {
        let d = ps.dim();
        let scale = 1.0 - config.alpha * config.alpha;
        if d <= DENSE_COVARIANCE_LIMIT {
            let (_, cov) = ps.moments();
            let m = DMatrix::from_fn(d, d, |i, j| {
                scale * cov[i * d + j] + if i == j { config.cov_jitter } else { 0.0 }
            });
            let chol = m
                .cholesky()
                .ok_or_else(|| Error::Numerical("kernel covariance is not positive definite".into()))?;
            let l = chol.l();
            let lower = (0..d)
                .flat_map(|i| (0..d).map(move |j| (i, j)))
                .map(|(i, j)| l[(i, j)])
                .collect();
            Ok(Kernel::Dense { d, lower })
        } else {
            let var = ps.weighted_variances(mean);
            let sd = var
                .into_iter()
                .map(|v| (scale * v + config.cov_jitter).sqrt())
                .collect::<Vec<_>>();
            if sd.iter().any(|s| !s.is_finite()) {
                return Err(Error::Numerical("non-finite kernel variance".into()));
            }
            Ok(Kernel::Diagonal { sd })
        }
    }

    fn draw<R: Rng + ?Sized>(&self, mu: &[f64], out: &mut [f64], rng: &mut R) {
        match self {
            Kernel::Dense { d, lower } => {
                let mut z = [0.0f64; DENSE_COVARIANCE_LIMIT];
                for v in z.iter_mut().take(*d) {
                    *v = StandardNormal.sample(rng);
                }
                for i in 0..*d {
                    let row = &lower[i * d..i * d + i + 1];
                    let dot: f64 = row.iter().zip(&z[..=i]).map(|(l, z)| l * z).sum();
                    out[i] = mu[i] + dot;
                }
            }
            Kernel::Diagonal { sd } => {
                for ((o, m), s) in out.iter_mut().zip(mu).zip(sd) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + s * z;
                }
            }
        }
    }
}
