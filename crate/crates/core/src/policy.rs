//! Replay-driven learner.
//!
//! The policy is a tabular softmax over actions, with one row of logits per
//! position or, by default, per (position, sum of the earlier actions). It is
//! trained off-policy by advantage-weighted likelihood: each replayed
//! trajectory gets weight `max(r - b, floor)` (never negative), weights are
//! scaled by the batch size or by their total, and the logits take one
//! ascent step on `sum_k w_k log pi(tau_k)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, ActionSequence, EnvConfig};
use crate::error::{Error, Result};
use crate::replay::BufferItem;
use crate::util::mean_std;

const WEIGHT_EPS: f64 = 1e-8;

/// What a row of logits is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyContext {
    /// One row per position; positions are independent.
    Position,
    /// One row per (position, sum of the earlier actions).
    PrefixSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalPolicy {
    positions: usize,
    arity: usize,
    context: PolicyContext,
    /// Rows per position: 1, or the number of reachable prefix sums.
    contexts: usize,
    /// Row-major `(positions * contexts) x arity`.
    logits: Vec<f64>,
}

impl CategoricalPolicy {
    /// All-zero logits, i.e. the uniform policy.
    pub fn uniform(env: &EnvConfig, context: PolicyContext) -> Self {
        let contexts = Self::contexts_for(env.length, env.arity(), context);
        Self::from_logits(
            env.length,
            env.arity(),
            context,
            vec![0.0; env.length * contexts * env.arity()],
        )
    }

    fn contexts_for(positions: usize, arity: usize, context: PolicyContext) -> usize {
        match context {
            PolicyContext::Position => 1,
            PolicyContext::PrefixSum => (positions.saturating_sub(1)) * (arity - 1) + 1,
        }
    }

    pub fn from_logits(
        positions: usize,
        arity: usize,
        context: PolicyContext,
        logits: Vec<f64>,
    ) -> Self {
        let contexts = Self::contexts_for(positions, arity, context);
        assert_eq!(
            logits.len(),
            positions * contexts * arity,
            "logit matrix shape mismatch"
        );
        assert!(
            logits.iter().all(|x| x.is_finite()),
            "logits must be finite"
        );
        CategoricalPolicy {
            positions,
            arity,
            context,
            contexts,
            logits,
        }
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn context(&self) -> PolicyContext {
        self.context
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    fn row_index(&self, position: usize, prefix_sum: usize) -> usize {
        match self.context {
            PolicyContext::Position => position,
            PolicyContext::PrefixSum => position * self.contexts + prefix_sum,
        }
    }

    fn row_at(&self, index: usize) -> &[f64] {
        &self.logits[index * self.arity..(index + 1) * self.arity]
    }

    /// Action distribution at `position` after earlier actions summing to
    /// `prefix_sum` (ignored for [`PolicyContext::Position`]).
    pub fn probs(&self, position: usize, prefix_sum: usize) -> Vec<f64> {
        softmax(self.row_at(self.row_index(position, prefix_sum)))
    }

    /// Row indices visited by `seq`, one per position.
    fn rows_of<'a>(&'a self, actions: &'a [u32]) -> impl Iterator<Item = (usize, u32)> + 'a {
        actions
            .iter()
            .enumerate()
            .scan(0usize, move |prefix, (i, &a)| {
                let row = self.row_index(i, *prefix);
                *prefix += a as usize;
                Some((row, a))
            })
    }

    pub fn log_prob(&self, seq: &ActionSequence) -> f64 {
        self.rows_of(seq.actions())
            .map(|(row, a)| {
                let logits = self.row_at(row);
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
                logits[a as usize] - lse
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ActionSequence {
        let mut prefix = 0usize;
        let actions = (0..self.positions)
            .map(|i| {
                let a = draw_categorical(&self.probs(i, prefix), rng);
                prefix += a as usize;
                a
            })
            .collect();
        ActionSequence::from_vec_unchecked(actions)
    }

    /// Greedy rollout: the most likely action at each position.
    pub fn mode(&self) -> ActionSequence {
        let mut prefix = 0usize;
        let actions = (0..self.positions)
            .map(|i| {
                let row = self.row_at(self.row_index(i, prefix));
                let a = (0..self.arity)
                    .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                    .unwrap_or(0) as u32;
                prefix += a as usize;
                a
            })
            .collect();
        ActionSequence::from_vec_unchecked(actions)
    }
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

fn draw_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a as u32;
        }
    }
    // u landed in the rounding gap above the last cumulative sum
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1) as u32
}

/// Exponential moving average of observed reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub value: f64,
    pub decay: f64,
    pub initialized: bool,
}

impl Baseline {
    /// Starts from `prior`, as if it had already been observed.
    pub fn with_prior(prior: f64, decay: f64) -> Self {
        Baseline {
            value: prior,
            decay,
            initialized: true,
        }
    }

    /// No prior: the first observation becomes the value.
    pub fn uninformed(decay: f64) -> Self {
        Baseline {
            value: 0.0,
            decay,
            initialized: false,
        }
    }
}

pub fn td_error(reward: f64, baseline: &Baseline) -> f64 {
    reward - baseline.value
}

pub fn update_baseline(baseline: Baseline, reward: f64) -> Baseline {
    if baseline.initialized {
        Baseline {
            value: baseline.decay * baseline.value + (1.0 - baseline.decay) * reward,
            ..baseline
        }
    } else {
        Baseline {
            value: reward,
            initialized: true,
            ..baseline
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub advantage_floor: f64,
    pub baseline_decay: f64,
    pub context: PolicyContext,
    pub normalization: WeightNormalization,
}

/// How advantage weights are scaled before the ascent step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightNormalization {
    /// Divide by the weight total, so every non-zero batch takes a full step.
    Sum,
    /// Divide by the batch size, so the step shrinks with the advantage.
    BatchMean,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            learning_rate: 0.04,
            batch_size: 32,
            advantage_floor: 0.0,
            baseline_decay: 0.99,
            context: PolicyContext::PrefixSum,
            normalization: WeightNormalization::BatchMean,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(
                "learn.learning_rate",
                "must be finite and > 0",
            ));
        }
        if self.batch_size == 0 {
            return Err(Error::config("learn.batch_size", "must be at least 1"));
        }
        if !self.advantage_floor.is_finite() {
            return Err(Error::config("learn.advantage_floor", "must be finite"));
        }
        if !(self.baseline_decay > 0.0 && self.baseline_decay < 1.0) {
            return Err(Error::config("learn.baseline_decay", "must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Non-negative advantage weights, normalised to sum to (almost) one.
pub fn advantage_weights(
    minibatch: &[BufferItem],
    baseline: &Baseline,
    floor: f64,
    normalization: WeightNormalization,
) -> Vec<f64> {
    let raw: Vec<f64> = minibatch
        .iter()
        .map(|it| (it.reward - baseline.value).max(floor).max(0.0))
        .collect();
    let scale = match normalization {
        WeightNormalization::Sum => raw.iter().sum::<f64>() + WEIGHT_EPS,
        WeightNormalization::BatchMean => raw.len() as f64,
    };
    raw.into_iter().map(|w| w / scale).collect()
}

/// One ascent step on the weighted log-likelihood of `minibatch`.
///
/// Returns the negative weighted log-likelihood before the step. When every
/// weight is zero the logits are left untouched and the loss is 0.
pub fn update(
    policy: &mut CategoricalPolicy,
    minibatch: &[BufferItem],
    baseline: &Baseline,
    cfg: &LearnConfig,
) -> Result<f64> {
    if minibatch.is_empty() {
        return Err(Error::EmptyMinibatch);
    }
    let weights = advantage_weights(minibatch, baseline, cfg.advantage_floor, cfg.normalization);
    if weights.iter().all(|&w| w == 0.0) {
        return Ok(0.0);
    }
    let loss = -minibatch
        .iter()
        .zip(&weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(it, w)| w * policy.log_prob(&it.trajectory))
        .sum::<f64>();
    let grad = weighted_loglik_gradient(policy, minibatch, &weights);
    for (l, g) in policy.logits.iter_mut().zip(grad) {
        *l += cfg.learning_rate * g;
    }
    Ok(loss)
}

/// Gradient of `sum_k w_k log pi(tau_k)` with respect to the logits:
/// `w_k (1[a = tau_k,i] - pi(a|i))` summed over items.
pub fn weighted_loglik_gradient(
    policy: &CategoricalPolicy,
    minibatch: &[BufferItem],
    weights: &[f64],
) -> Vec<f64> {
    let arity = policy.arity;
    let mut grad = vec![0.0; policy.logits.len()];
    for (item, &w) in minibatch.iter().zip(weights) {
        if w == 0.0 {
            continue;
        }
        for (row, taken) in policy.rows_of(item.trajectory.actions()) {
            let probs = softmax(policy.row_at(row));
            let g = &mut grad[row * arity..(row + 1) * arity];
            for (a, (g, p)) in g.iter_mut().zip(probs).enumerate() {
                let indicator = if a == taken as usize { 1.0 } else { 0.0 };
                *g += w * (indicator - p);
            }
        }
    }
    grad
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mean: f64,
    pub std: f64,
}

/// Monte Carlo reward of fresh samples from `policy`. The deviation is the
/// sample standard deviation, and 0 for a single sample.
pub fn evaluate_policy<R: Rng + ?Sized>(
    policy: &CategoricalPolicy,
    env: &EnvConfig,
    n: usize,
    rng: &mut R,
) -> EvalSummary {
    assert!(n >= 1, "evaluation needs at least one sample");
    let rewards: Vec<f64> = (0..n)
        .map(|_| env::reward_unchecked(&policy.sample(rng), env))
        .collect();
    let (mean, std) = mean_std(&rewards);
    EvalSummary { mean, std }
}
