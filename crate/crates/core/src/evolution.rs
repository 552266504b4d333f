//! Evolutionary update of the replay buffer.
//!
//! Every item is scored by fitness `r + alpha*e + beta*c + gamma*s`, the top
//! fraction survives as parents, each parent contributes one mutated
//! offspring that is re-evaluated and re-tagged, and the buffer becomes
//! parents plus offspring before affective pruning.
//!
//! The enterprise signals are toy proxies computed from the action sequence
//! alone: `e` rewards uniform sequences, `c` is 0 when a forbidden action
//! appears, and `s` is the share of non-decreasing adjacent pairs.

use std::cmp::Ordering;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::affect::{self, AffectConfig};
use crate::env::{self, ActionSequence, EnvConfig};
use crate::error::{Error, Result};
use crate::replay::{BufferItem, ReplayBuffer};
use crate::util::{ceil_fraction, substream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitnessWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl FitnessWeights {
    /// Weights used by the enterprise-fitness ablation runs.
    pub const ENTERPRISE_PRESET: FitnessWeights = FitnessWeights {
        alpha: 0.3,
        beta: 0.3,
        gamma: 0.3,
    };

    pub fn is_zero(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.0 && self.gamma == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnterpriseSignals {
    pub efficiency: f64,
    pub compliance: f64,
    pub scalability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoConfig {
    pub period: u64,
    pub mutation_rate: f64,
    pub parent_fraction: f64,
    pub weights: FitnessWeights,
    pub forbidden_action: Option<u32>,
}

impl Default for EvoConfig {
    fn default() -> Self {
        EvoConfig {
            period: 10,
            mutation_rate: 0.2,
            parent_fraction: 0.5,
            weights: FitnessWeights::default(),
            forbidden_action: Some(0),
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.period == 0 {
            return Err(Error::config("evo.period", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::config(
                "evo.mutation_rate",
                format!("{} is outside the allowed range [0, 1]", self.mutation_rate),
            ));
        }
        if !(self.parent_fraction > 0.0 && self.parent_fraction <= 1.0) {
            return Err(Error::config("evo.parent_fraction", "must lie in (0, 1]"));
        }
        for (key, w) in [
            ("evo.alpha", self.weights.alpha),
            ("evo.beta", self.weights.beta),
            ("evo.gamma", self.weights.gamma),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::config(key, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

pub fn fitness(reward: f64, signals: EnterpriseSignals, w: &FitnessWeights) -> f64 {
    reward
        + w.alpha * signals.efficiency
        + w.beta * signals.compliance
        + w.gamma * signals.scalability
}

pub fn enterprise_signals(
    seq: &ActionSequence,
    cfg: &EvoConfig,
    env: &EnvConfig,
) -> EnterpriseSignals {
    let actions = seq.actions();
    let mut seen = vec![false; env.arity()];
    let mut distinct = 0usize;
    for &a in actions {
        let slot = &mut seen[a as usize];
        if !*slot {
            *slot = true;
            distinct += 1;
        }
    }
    let efficiency = if env.action_max == 0 {
        1.0
    } else {
        1.0 - distinct.saturating_sub(1) as f64 / f64::from(env.action_max)
    };
    let compliance = match cfg.forbidden_action {
        Some(f) if actions.contains(&f) => 0.0,
        _ => 1.0,
    };
    let pairs = actions.len().saturating_sub(1);
    let scalability = if pairs == 0 {
        1.0
    } else {
        actions.windows(2).filter(|w| w[0] <= w[1]).count() as f64 / pairs as f64
    };
    EnterpriseSignals {
        efficiency,
        compliance,
        scalability,
    }
}

fn by_fitness(a: &BufferItem, b: &BufferItem) -> Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then_with(|| b.priority.total_cmp(&a.priority))
        .then_with(|| a.id.cmp(&b.id))
}

/// The best `ceil(parent_fraction * len)` items by stored fitness (ties by
/// priority, then age).
pub fn select_parents(buffer: &ReplayBuffer, parent_fraction: f64) -> Result<Vec<BufferItem>> {
    let n = buffer.len();
    if n <= 1 {
        return Err(Error::BufferTooSmall(n));
    }
    let mut ranked = buffer.items().to_vec();
    ranked.sort_by(by_fitness);
    ranked.truncate(ceil_fraction(parent_fraction, n).max(1));
    Ok(ranked)
}

/// Resamples each position with probability `rate`, always to a different
/// action. With a single available action the sequence is returned as is.
pub fn mutate<R: Rng + ?Sized>(
    seq: &ActionSequence,
    rate: f64,
    rng: &mut R,
    env: &EnvConfig,
) -> ActionSequence {
    let actions = seq
        .actions()
        .iter()
        .map(|&a| {
            if rng.gen::<f64>() < rate && env.action_max > 0 {
                let pick = rng.gen_range(0..env.action_max);
                if pick >= a {
                    pick + 1
                } else {
                    pick
                }
            } else {
                a
            }
        })
        .collect();
    ActionSequence::from_vec_unchecked(actions)
}

/// Summary of one evolutionary update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoStats {
    pub step: u64,
    pub size_before: usize,
    pub parents: usize,
    pub offspring: usize,
    pub pruned: usize,
    pub evicted: usize,
    pub size_after: usize,
    pub best_offspring_reward: f64,
    pub max_fitness_before: f64,
    pub max_fitness_after: f64,
}

/// Runs one selection/mutation round on `buffer`.
///
/// Stored rewards are re-evaluated against `env` first, so that after a
/// target shift selection works on current rewards; items whose reward
/// changed get a fresh TD (against `baseline`), tag and priority. Offspring
/// draw from independent substreams keyed on a value taken from `rng` and
/// the parent id, so their order of evaluation does not matter.
#[allow(clippy::too_many_arguments)]
pub fn evolutionary_update<R: Rng + ?Sized>(
    buffer: &mut ReplayBuffer,
    env: &EnvConfig,
    evo: &EvoConfig,
    affect_cfg: &AffectConfig,
    baseline: f64,
    step: u64,
    rng: &mut R,
) -> Result<EvoStats> {
    let size_before = buffer.len();
    if size_before <= 1 {
        return Err(Error::BufferTooSmall(size_before));
    }

    for item in buffer.items_mut() {
        let r = env::reward_unchecked(&item.trajectory, env);
        if r != item.reward {
            item.reward = r;
            item.td = r - baseline;
            item.tag = affect::tag(r, item.td, affect_cfg);
            item.priority = affect::priority(item.td, item.tag, affect_cfg.lambda);
        }
        item.fitness = fitness(
            r,
            enterprise_signals(&item.trajectory, evo, env),
            &evo.weights,
        );
    }
    let max_fitness_before = max_fitness(buffer.items());

    let parents = select_parents(buffer, evo.parent_fraction)?;
    let elite = parents[0].id;
    let key: u64 = rng.gen();
    let offspring: Vec<BufferItem> = parents
        .iter()
        .map(|parent| {
            let mut sub: ChaCha8Rng = substream(key, parent.id);
            let child = mutate(&parent.trajectory, evo.mutation_rate, &mut sub, env);
            let r = env::reward_unchecked(&child, env);
            let mut item = BufferItem::new(child, r, r - baseline, affect_cfg, step);
            item.fitness = fitness(
                r,
                enterprise_signals(&item.trajectory, evo, env),
                &evo.weights,
            );
            item.generation = parent.generation + 1;
            item
        })
        .collect();

    let best_offspring_reward = offspring
        .iter()
        .map(|it| it.reward)
        .fold(f64::NEG_INFINITY, f64::max);
    let n_parents = parents.len();
    let n_offspring = offspring.len();
    buffer.replace_contents(parents, offspring);
    let pruned = buffer.prune_protecting(affect_cfg, Some(elite));
    let evicted = buffer.enforce_capacity(Some(elite));

    Ok(EvoStats {
        step,
        size_before,
        parents: n_parents,
        offspring: n_offspring,
        pruned,
        evicted,
        size_after: buffer.len(),
        best_offspring_reward,
        max_fitness_before,
        max_fitness_after: max_fitness(buffer.items()),
    })
}

fn max_fitness(items: &[BufferItem]) -> f64 {
    items
        .iter()
        .map(|it| it.fitness)
        .fold(f64::NEG_INFINITY, f64::max)
}
