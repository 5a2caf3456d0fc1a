//! Discrete domain types and the belief/choice model.
//!
//! A human at context `x` starts from belief `b1` over actions. Each shown
//! explainer `e` multiplies the belief by the propensity row `q[e, x, ·]` and
//! renormalizes. The final action is chosen from the belief after the last
//! explanation. The per-step factor `t` that appears in the textbook form of
//! the update is constant across actions and cancels under normalization, so
//! it never enters the arithmetic here.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a probability vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance when collecting maximal entries for argmax tie-breaking.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Cardinalities of the explainer, context and action sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub n_explainers: usize,
    pub n_contexts: usize,
    pub n_actions: usize,
}

impl Dims {
    pub fn new(n_explainers: usize, n_contexts: usize, n_actions: usize) -> Result<Self> {
        let dims = Dims {
            n_explainers,
            n_contexts,
            n_actions,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_explainers == 0 || self.n_contexts == 0 {
            return Err(Error::InvalidDims(format!(
                "need at least one explainer and one context, got {self:?}"
            )));
        }
        if self.n_actions < 2 {
            return Err(Error::InvalidDims(format!(
                "need at least two actions, got {}",
                self.n_actions
            )));
        }
        Ok(())
    }

    /// Number of propensity entries, `|E|·|X|·|A|`.
    pub fn len(&self) -> usize {
        self.n_explainers * self.n_contexts * self.n_actions
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major position of `(e, x, a)`.
    #[inline]
    pub fn index(&self, explainer: usize, context: usize, action: usize) -> usize {
        (explainer * self.n_contexts + context) * self.n_actions + action
    }

    pub fn check_explainer(&self, id: usize) -> Result<()> {
        check_id("explainer", id, self.n_explainers)
    }

    pub fn check_context(&self, id: usize) -> Result<()> {
        check_id("context", id, self.n_contexts)
    }

    pub fn check_action(&self, id: usize) -> Result<()> {
        check_id("action", id, self.n_actions)
    }
}

fn check_id(kind: &'static str, id: usize, bound: usize) -> Result<()> {
    if id < bound {
        Ok(())
    } else {
        Err(Error::OutOfRange { kind, id, bound })
    }
}

/// Probability vector over actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty belief".into()));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::InvalidBelief(format!("entry {i} = {p} not in [0, 1]")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Belief(probs))
    }

    /// Normalizes nonnegative weights into a belief.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidBelief(format!(
                "weights must be nonnegative and finite: {weights:?}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::InvalidBelief("weights sum to zero".into()));
        }
        Belief::new(weights.iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n_actions: usize) -> Self {
        Belief(vec![1.0 / n_actions as f64; n_actions])
    }

    pub fn certain(n_actions: usize, action: usize) -> Self {
        let mut probs = vec![0.0; n_actions];
        probs[action] = 1.0;
        Belief(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_prob(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    /// Actions whose probability is within [`TIE_TOLERANCE`] of the maximum.
    pub fn argmax_set(&self) -> Vec<usize> {
        let max = self.max_prob();
        (0..self.0.len())
            .filter(|&a| max - self.0[a] <= TIE_TOLERANCE)
            .collect()
    }

    /// Natural logs of the entries; zero entries map to `-inf`.
    pub fn log_probs(&self) -> Vec<f64> {
        self.0.iter().map(|p| p.ln()).collect()
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.0
    }
}

/// Strictly positive tensor `q[e, x, a]`, stored row-major.
///
/// Serialized as nested arrays indexed `[explainer][context][action]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropensityTensor {
    dims: Dims,
    values: Vec<f64>,
}

impl PropensityTensor {
    pub fn new(dims: Dims, values: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        if values.len() != dims.len() {
            return Err(Error::InvalidDims(format!(
                "expected {} propensities, got {}",
                dims.len(),
                values.len()
            )));
        }
        check_positive(&values)?;
        Ok(PropensityTensor { dims, values })
    }

    pub fn ones(dims: Dims) -> Self {
        PropensityTensor {
            dims,
            values: vec![1.0; dims.len()],
        }
    }

    /// Entrywise exponential of log-propensities.
    pub fn from_log(dims: Dims, thetas: &[f64]) -> Result<Self> {
        PropensityTensor::new(dims, thetas.iter().map(|t| t.exp()).collect())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, explainer: usize, context: usize, action: usize) -> f64 {
        self.values[self.dims.index(explainer, context, action)]
    }

    pub fn set(&mut self, explainer: usize, context: usize, action: usize, value: f64) -> Result<()> {
        let i = self.dims.index(explainer, context, action);
        check_positive(&[value]).map_err(|_| Error::InvalidPropensity { index: i, value })?;
        self.values[i] = value;
        Ok(())
    }

    /// The action row `q[e, x, ·]`.
    pub fn row(&self, explainer: usize, context: usize) -> &[f64] {
        let start = self.dims.index(explainer, context, 0);
        &self.values[start..start + self.dims.n_actions]
    }

    pub fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

fn check_positive(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && **v > 0.0))
    {
        Some((index, &value)) => Err(Error::InvalidPropensity { index, value }),
        None => Ok(()),
    }
}

impl Serialize for PropensityTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.dims;
        let nested: Vec<Vec<&[f64]>> = (0..d.n_explainers)
            .map(|e| (0..d.n_contexts).map(|x| self.row(e, x)).collect())
            .collect();
        nested.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PropensityTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        let n_explainers = nested.len();
        let n_contexts = nested.first().map_or(0, Vec::len);
        let n_actions = nested
            .first()
            .and_then(|rows| rows.first())
            .map_or(0, Vec::len);
        let ragged = nested.iter().any(|rows| {
            rows.len() != n_contexts || rows.iter().any(|row| row.len() != n_actions)
        });
        if ragged {
            return Err(D::Error::custom("propensity tensor is ragged"));
        }
        let dims = Dims::new(n_explainers, n_contexts, n_actions).map_err(D::Error::custom)?;
        let values = nested.into_iter().flatten().flatten().collect();
        PropensityTensor::new(dims, values).map_err(D::Error::custom)
    }
}

/// A policy `Δ(A)^X`: one belief row per context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Belief>", into = "Vec<Belief>")]
pub struct TabularPolicy {
    rows: Vec<Belief>,
}

impl TabularPolicy {
    pub fn new(rows: Vec<Belief>) -> Result<Self> {
        let n_actions = rows.first().map(Belief::len).unwrap_or(0);
        if rows.is_empty() || rows.iter().any(|r| r.len() != n_actions) {
            return Err(Error::InvalidBelief(
                "policy needs at least one row and equal row lengths".into(),
            ));
        }
        Ok(TabularPolicy { rows })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        TabularPolicy::new(rows.into_iter().map(Belief::new).collect::<Result<_>>()?)
    }

    pub fn uniform(n_contexts: usize, n_actions: usize) -> Self {
        TabularPolicy {
            rows: vec![Belief::uniform(n_actions); n_contexts],
        }
    }

    pub fn row(&self, context: usize) -> &Belief {
        &self.rows[context]
    }

    pub fn rows(&self) -> &[Belief] {
        &self.rows
    }

    pub fn n_contexts(&self) -> usize {
        self.rows.len()
    }

    pub fn n_actions(&self) -> usize {
        self.rows[0].len()
    }
}

impl TryFrom<Vec<Belief>> for TabularPolicy {
    type Error = Error;

    fn try_from(rows: Vec<Belief>) -> Result<Self> {
        TabularPolicy::new(rows)
    }
}

impl From<TabularPolicy> for Vec<Belief> {
    fn from(p: TabularPolicy) -> Self {
        p.rows
    }
}

/// One completed interaction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub context: usize,
    /// The human's action before seeing the proposal.
    pub intended: usize,
    /// The support system's proposed action, which explanations argue for.
    pub proposed: usize,
    /// Explainers in the order they were shown.
    pub shown: Vec<usize>,
    #[serde(rename = "final")]
    pub final_action: usize,
}

impl InteractionRecord {
    pub fn validate(&self, dims: &Dims) -> Result<()> {
        dims.check_context(self.context)?;
        dims.check_action(self.intended)?;
        dims.check_action(self.proposed)?;
        dims.check_action(self.final_action)?;
        validate_shown(dims, &self.shown)
    }
}

fn validate_shown(dims: &Dims, shown: &[usize]) -> Result<()> {
    if shown.len() > dims.n_explainers {
        return Err(Error::ProtocolViolation(format!(
            "{} explainers shown but only {} exist",
            shown.len(),
            dims.n_explainers
        )));
    }
    let mut seen = vec![false; dims.n_explainers];
    for &e in shown {
        dims.check_explainer(e)?;
        if std::mem::replace(&mut seen[e], true) {
            return Err(Error::ProtocolViolation(format!(
                "explainer {e} shown twice"
            )));
        }
    }
    Ok(())
}

/// How an action is drawn from a belief.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalActionRule {
    /// Draw `a ~ b`.
    Sample,
    /// Uniform among the actions attaining the maximum within [`TIE_TOLERANCE`].
    #[default]
    ArgmaxTieUniform,
}

/// One multiplicative belief update: `b'[a] ∝ b[a]·q_row[a]`.
///
/// `step_index` is the 1-based position of the explanation in the sequence.
/// It scales every action equally and therefore has no effect on the result.
pub fn update_belief(b: &Belief, q_row: &[f64], step_index: usize) -> Result<Belief> {
    if step_index == 0 {
        return Err(Error::InvalidConfig("step index starts at 1".into()));
    }
    if q_row.len() != b.len() {
        return Err(Error::InvalidDims(format!(
            "propensity row has {} entries, belief has {}",
            q_row.len(),
            b.len()
        )));
    }
    check_positive(q_row)?;
    let unnorm: Vec<f64> = b.probs().iter().zip(q_row).map(|(p, q)| p * q).collect();
    let z: f64 = unnorm.iter().sum();
    if !(z > 0.0 && z.is_finite()) {
        return Err(Error::Internal(format!("belief normalizer is {z}")));
    }
    Ok(Belief(unnorm.into_iter().map(|v| v / z).collect()))
}

/// Belief after showing every explainer in `shown` at context `x`, computed
/// as `b1[a]·∏ q[e_t, x, a]` in the log domain.
pub fn final_belief(b1: &Belief, q: &PropensityTensor, x: usize, shown: &[usize]) -> Result<Belief> {
    let dims = q.dims();
    check_belief_len(b1, &dims)?;
    dims.check_context(x)?;
    validate_shown(&dims, shown)?;
    let log_q = q.log_values();
    let scores = action_scores(&dims, &log_q, &b1.log_probs(), x, shown);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(Belief(exps.into_iter().map(|v| v / z).collect()))
}

/// Probability that the human picks `record.final_action` given propensities
/// `q` and initial belief `b1`.
pub fn interaction_likelihood(record: &InteractionRecord, b1: &Belief, q: &PropensityTensor) -> Result<f64> {
    let dims = q.dims();
    record.validate(&dims)?;
    check_belief_len(b1, &dims)?;
    let log_q = q.log_values();
    Ok(log_choice_probability(
        &dims,
        &log_q,
        &b1.log_probs(),
        record.context,
        &record.shown,
        record.final_action,
    )
    .exp())
}

fn check_belief_len(b: &Belief, dims: &Dims) -> Result<()> {
    if b.len() != dims.n_actions {
        return Err(Error::InvalidDims(format!(
            "belief has {} entries, expected {}",
            b.len(),
            dims.n_actions
        )));
    }
    Ok(())
}

fn action_scores(dims: &Dims, theta: &[f64], log_b1: &[f64], x: usize, shown: &[usize]) -> Vec<f64> {
    (0..dims.n_actions)
        .map(|a| score(dims, theta, log_b1, x, shown, a))
        .collect()
}

#[inline]
fn score(dims: &Dims, theta: &[f64], log_b1: &[f64], x: usize, shown: &[usize], a: usize) -> f64 {
    let lb = log_b1[a];
    if lb == f64::NEG_INFINITY {
        return lb;
    }
    lb + shown.iter().map(|&e| theta[dims.index(e, x, a)]).sum::<f64>()
}

/// Log choice probability under log-propensities `theta`.
///
/// Inputs are not validated; this is the hot path of the particle filter.
/// Returns `-inf` iff `log_b1[final_action]` is `-inf`.
pub fn log_choice_probability(
    dims: &Dims,
    theta: &[f64],
    log_b1: &[f64],
    x: usize,
    shown: &[usize],
    final_action: usize,
) -> f64 {
    // streaming log-sum-exp
    let mut max = f64::NEG_INFINITY;
    let mut acc = 0.0;
    for a in 0..dims.n_actions {
        let s = score(dims, theta, log_b1, x, shown, a);
        if s == f64::NEG_INFINITY {
            continue;
        }
        if s > max {
            acc = acc * (max - s).exp() + 1.0;
            max = s;
        } else {
            acc += (s - max).exp();
        }
    }
    let chosen = score(dims, theta, log_b1, x, shown, final_action);
    if chosen == f64::NEG_INFINITY {
        return chosen;
    }
    chosen - max - acc.ln()
}

/// Draws an action from `b` under `rule`. Consumes exactly one uniform draw.
pub fn draw_action<R: Rng + ?Sized>(b: &Belief, rule: FinalActionRule, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    match rule {
        FinalActionRule::Sample => categorical_from_uniform(b.probs(), u),
        FinalActionRule::ArgmaxTieUniform => {
            let ties = b.argmax_set();
            let i = ((u * ties.len() as f64) as usize).min(ties.len() - 1);
            ties[i]
        }
    }
}

/// Inverts the CDF of `probs` at `u ∈ [0, 1)`, never returning a
/// zero-probability index.
pub(crate) fn categorical_from_uniform(probs: &[f64], u: f64) -> usize {
    let mut cum = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last_positive = i;
            if u < cum {
                return i;
            }
        }
    }
    last_positive
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_q() -> PropensityTensor {
        let dims = Dims::new(2, 2, 2).unwrap();
        let mut q = PropensityTensor::ones(dims);
        q.set(1, 1, 1, 10.0).unwrap();
        q
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn update_belief_examples() {
        let b = Belief::uniform(2);
        let out = update_belief(&b, &[1.0, 10.0], 1).unwrap();
        assert!(close(out.probs(), &[1.0 / 11.0, 10.0 / 11.0], 1e-15));

        let b = Belief::new(vec![0.2, 0.3, 0.5]).unwrap();
        let out = update_belief(&b, &[1.0, 1.0, 1.0], 4).unwrap();
        assert!(close(out.probs(), b.probs(), 1e-15));

        let b = Belief::certain(2, 0);
        let out = update_belief(&b, &[1.0, 10.0], 1).unwrap();
        assert_eq!(out.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn update_belief_ignores_step_index() {
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        let a = update_belief(&b, &[2.0, 3.0], 1).unwrap();
        let c = update_belief(&b, &[2.0, 3.0], 17).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn update_belief_rejects_nonpositive_propensity() {
        let b = Belief::uniform(2);
        assert!(matches!(
            update_belief(&b, &[1.0, 0.0], 1),
            Err(Error::InvalidPropensity { index: 1, .. })
        ));
        assert!(update_belief(&b, &[-1.0, 2.0], 1).is_err());
        assert!(update_belief(&b, &[f64::NAN, 2.0], 1).is_err());
    }

    #[test]
    fn final_belief_examples() {
        let q = binary_q();
        let b1 = Belief::uniform(2);
        assert_eq!(final_belief(&b1, &q, 1, &[]).unwrap(), b1);

        let expected = [1.0 / 11.0, 10.0 / 11.0];
        for shown in [[0, 1], [1, 0]] {
            let fb = final_belief(&b1, &q, 1, &shown).unwrap();
            assert!(close(fb.probs(), &expected, 1e-15), "{shown:?} -> {fb:?}");
        }

        let single = final_belief(&b1, &q, 1, &[1]).unwrap();
        let stepped = update_belief(&b1, q.row(1, 1), 1).unwrap();
        assert!(close(single.probs(), stepped.probs(), 1e-15));
    }

    #[test]
    fn final_belief_rejects_duplicates() {
        let q = binary_q();
        let err = final_belief(&Belief::uniform(2), &q, 1, &[1, 1]).unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
        assert!(final_belief(&Belief::uniform(2), &q, 1, &[2]).is_err());
    }

    #[test]
    fn likelihood_examples() {
        let q = binary_q();
        let b1 = Belief::uniform(2);
        let rec = InteractionRecord {
            context: 1,
            intended: 0,
            proposed: 1,
            shown: vec![1],
            final_action: 1,
        };
        let l = interaction_likelihood(&rec, &b1, &q).unwrap();
        assert!((l - 10.0 / 11.0).abs() < 1e-15);

        let b1 = Belief::new(vec![0.3, 0.7]).unwrap();
        let rec = InteractionRecord {
            shown: vec![],
            final_action: 0,
            ..rec
        };
        let l = interaction_likelihood(&rec, &b1, &q).unwrap();
        assert!((l - 0.3).abs() < 1e-15);
    }

    #[test]
    fn likelihood_zero_iff_prior_zero() {
        let q = binary_q();
        let b1 = Belief::certain(2, 1);
        let rec = InteractionRecord {
            context: 1,
            intended: 1,
            proposed: 1,
            shown: vec![0, 1],
            final_action: 0,
        };
        assert_eq!(interaction_likelihood(&rec, &b1, &q).unwrap(), 0.0);
        let rec = InteractionRecord {
            final_action: 1,
            ..rec
        };
        assert_eq!(interaction_likelihood(&rec, &b1, &q).unwrap(), 1.0);
    }

    #[test]
    fn likelihood_survives_long_sequences() {
        // 40 factors of 1e10 would overflow a direct product.
        let dims = Dims::new(40, 1, 2).unwrap();
        let mut values = Vec::new();
        for _ in 0..40 {
            values.extend([1e-10, 1e10]);
        }
        let q = PropensityTensor::new(dims, values).unwrap();
        let rec = InteractionRecord {
            context: 0,
            intended: 0,
            proposed: 1,
            shown: (0..40).collect(),
            final_action: 0,
        };
        let l = interaction_likelihood(&rec, &Belief::uniform(2), &q).unwrap();
        assert!(l >= 0.0 && l < 1e-300);
        let l1 = interaction_likelihood(
            &InteractionRecord {
                final_action: 1,
                ..rec
            },
            &Belief::uniform(2),
            &q,
        )
        .unwrap();
        assert_eq!(l1, 1.0);
    }

    #[test]
    fn argmax_rule_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        for _ in 0..100 {
            assert_eq!(draw_action(&b, FinalActionRule::ArgmaxTieUniform, &mut rng), 1);
        }
        let b = Belief::certain(2, 0);
        for _ in 0..100 {
            assert_eq!(draw_action(&b, FinalActionRule::Sample, &mut rng), 0);
        }
    }

    #[test]
    fn argmax_tie_is_uniform() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let b = Belief::uniform(2);
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| draw_action(&b, FinalActionRule::ArgmaxTieUniform, &mut rng) == 1)
            .count() as f64;
        let e = n as f64 / 2.0;
        let chi2 = (ones - e).powi(2) / e + (n as f64 - ones - e).powi(2) / e;
        let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
        assert!(p > 0.01, "chi2 = {chi2}, p = {p}");
    }

    #[test]
    fn sample_rule_follows_belief() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = Belief::new(vec![0.2, 0.8]).unwrap();
        let n = 20_000;
        let ones = (0..n)
            .filter(|_| draw_action(&b, FinalActionRule::Sample, &mut rng) == 1)
            .count() as f64
            / n as f64;
        assert!((ones - 0.8).abs() < 4.0 * (0.16f64 / n as f64).sqrt());
    }

    #[test]
    fn belief_validation() {
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![]).is_err());
        assert!(Belief::new(vec![0.25, 0.75]).is_ok());
        let b: Belief = serde_json::from_str("[0.5, 0.5]").unwrap();
        assert_eq!(b, Belief::uniform(2));
        assert!(serde_json::from_str::<Belief>("[0.5, 0.4]").is_err());
    }

    #[test]
    fn record_validation() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let rec = InteractionRecord {
            context: 0,
            intended: 0,
            proposed: 1,
            shown: vec![1, 0],
            final_action: 1,
        };
        rec.validate(&dims).unwrap();
        let bad = InteractionRecord {
            shown: vec![0, 0],
            ..rec.clone()
        };
        assert!(matches!(bad.validate(&dims), Err(Error::ProtocolViolation(_))));
        let bad = InteractionRecord {
            context: 2,
            ..rec.clone()
        };
        assert!(matches!(bad.validate(&dims), Err(Error::OutOfRange { .. })));
        let json = serde_json::to_string(&rec).unwrap();
        assert!(json.contains("\"final\":1"));
    }

    #[test]
    fn tensor_json_is_nested() {
        let q = binary_q();
        let json = serde_json::to_string(&q).unwrap();
        assert_eq!(json, "[[[1.0,1.0],[1.0,1.0]],[[1.0,1.0],[1.0,10.0]]]");
        let back: PropensityTensor = serde_json::from_str(&json).unwrap();
        assert_eq!(back, q);
        assert!(serde_json::from_str::<PropensityTensor>("[[[1.0,0.0],[1.0,1.0]]]").is_err());
        assert!(serde_json::from_str::<PropensityTensor>("[[[1.0,1.0],[1.0]]]").is_err());
    }

    #[test]
    fn dims_validation() {
        assert!(Dims::new(0, 1, 2).is_err());
        assert!(Dims::new(1, 1, 1).is_err());
        let d = Dims::new(2, 3, 4).unwrap();
        assert_eq!(d.len(), 24);
        assert_eq!(d.index(1, 2, 3), 23);
    }
}
