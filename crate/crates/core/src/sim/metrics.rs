use std::io::Write;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::episode::EpisodeResult;

pub const CSV_HEADER: &str = "episode,context,correct,views,rolling_acc";

/// Per-episode outcomes of one run.
///
/// Rolling accuracy at episode `t` for context `c` is the fraction correct
/// among the episodes with context `c` inside the last `window` episodes. It
/// is undefined until `window` episodes have been played.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub seed: u64,
    pub window: usize,
    pub n_contexts: usize,
    pub config: serde_json::Value,
    contexts: Vec<usize>,
    correct: Vec<bool>,
    agreed: Vec<bool>,
    views: Vec<usize>,
}

impl MetricSeries {
    pub fn new(n_contexts: usize, window: usize, seed: u64, config: serde_json::Value) -> Self {
        MetricSeries {
            seed,
            window: window.max(1),
            n_contexts,
            config,
            contexts: Vec::new(),
            correct: Vec::new(),
            agreed: Vec::new(),
            views: Vec::new(),
        }
    }

    pub fn push(&mut self, r: &EpisodeResult) {
        self.contexts.push(r.record.context);
        self.correct.push(r.correct);
        self.agreed.push(r.agreed);
        self.views.push(r.views);
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn contexts(&self) -> &[usize] {
        &self.contexts
    }

    pub fn correct(&self) -> &[bool] {
        &self.correct
    }

    pub fn agreed(&self) -> &[bool] {
        &self.agreed
    }

    pub fn views(&self) -> &[usize] {
        &self.views
    }

    /// First episode index after the 25% burn-in.
    pub fn burn_in_end(&self) -> usize {
        self.len() / 4
    }

    fn matching(&self, context: Option<usize>, range: Range<usize>) -> impl Iterator<Item = usize> + '_ {
        range
            .filter(move |&t| t < self.len())
            .filter(move |&t| context.is_none_or(|c| self.contexts[t] == c))
    }

    fn mean_over<F: Fn(usize) -> f64>(&self, context: Option<usize>, range: Range<usize>, f: F) -> Option<f64> {
        let (sum, n) = self
            .matching(context, range)
            .fold((0.0, 0usize), |(s, n), t| (s + f(t), n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    pub fn accuracy(&self, context: Option<usize>, range: Range<usize>) -> Option<f64> {
        self.mean_over(context, range, |t| self.correct[t] as u8 as f64)
    }

    /// Fraction of episodes whose final action equals the proposal.
    pub fn agreement(&self, context: Option<usize>, range: Range<usize>) -> Option<f64> {
        self.mean_over(context, range, |t| self.agreed[t] as u8 as f64)
    }

    pub fn mean_views(&self, context: Option<usize>, range: Range<usize>) -> Option<f64> {
        self.mean_over(context, range, |t| self.views[t] as f64)
    }

    /// Number of episodes with `context` in `range`.
    pub fn count(&self, context: Option<usize>, range: Range<usize>) -> usize {
        self.matching(context, range).count()
    }

    pub fn post_burn_in(&self) -> Range<usize> {
        self.burn_in_end()..self.len()
    }

    pub fn rolling_accuracy(&self, context: Option<usize>) -> Vec<Option<f64>> {
        let w = self.window;
        let mut hits = 0usize;
        let mut total = 0usize;
        let mut out = Vec::with_capacity(self.len());
        for t in 0..self.len() {
            if context.is_none_or(|c| self.contexts[t] == c) {
                total += 1;
                hits += self.correct[t] as usize;
            }
            if t >= w {
                let old = t - w;
                if context.is_none_or(|c| self.contexts[old] == c) {
                    total -= 1;
                    hits -= self.correct[old] as usize;
                }
            }
            out.push((t + 1 >= w && total > 0).then(|| hits as f64 / total as f64));
        }
        out
    }

    /// Interaction count (1-based) at which rolling accuracy first reaches
    /// `threshold`.
    pub fn first_reaching(&self, context: Option<usize>, threshold: f64) -> Option<usize> {
        self.rolling_accuracy(context)
            .iter()
            .position(|v| v.is_some_and(|a| a >= threshold))
            .map(|t| t + 1)
    }

    pub fn terminal_rolling_accuracy(&self, context: Option<usize>) -> Option<f64> {
        self.rolling_accuracy(context).last().copied().flatten()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        let rolling: Vec<Vec<Option<f64>>> = (0..self.n_contexts).map(|c| self.rolling_accuracy(Some(c))).collect();
        for t in 0..self.len() {
            let c = self.contexts[t];
            let roll = rolling[c][t].map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(w, "{},{},{},{},{}", t + 1, c, self.correct[t] as u8, self.views[t], roll)?;
        }
        Ok(())
    }
}
