//! Toy program-synthesis environment.
//!
//! A trajectory is a fixed-length vector of small integer actions and its
//! reward is `reward_base - |sum(actions) - target|`. The state space is tiny
//! at the defaults (6^5 = 7776 sequences), so every ground-truth constant used
//! elsewhere in the crate can be obtained by exhaustive enumeration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of sequences [`oracle_enumerate`] will visit.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// A trajectory of the toy task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSequence(Vec<u32>);

impl ActionSequence {
    /// Builds a sequence after checking it against `cfg`.
    pub fn new(actions: Vec<u32>, cfg: &EnvConfig) -> Result<Self> {
        let seq = ActionSequence(actions);
        seq.validate(cfg)?;
        Ok(seq)
    }

    pub(crate) fn from_vec_unchecked(actions: Vec<u32>) -> Self {
        ActionSequence(actions)
    }

    pub fn validate(&self, cfg: &EnvConfig) -> Result<()> {
        if self.0.len() != cfg.length {
            return Err(Error::InvalidSequence(format!(
                "length {} does not match configured length {}",
                self.0.len(),
                cfg.length
            )));
        }
        if let Some((pos, a)) = self.0.iter().enumerate().find(|(_, &a)| a > cfg.action_max) {
            return Err(Error::InvalidSequence(format!(
                "action {a} at position {pos} exceeds action_max {}",
                cfg.action_max
            )));
        }
        Ok(())
    }

    pub fn actions(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> i64 {
        self.0.iter().map(|&a| i64::from(a)).sum()
    }

    /// Number of positions at which the two sequences differ.
    pub fn hamming(&self, other: &ActionSequence) -> usize {
        self.0.iter().zip(&other.0).filter(|(a, b)| a != b).count()
            + self.0.len().abs_diff(other.0.len())
    }

    pub fn into_inner(self) -> Vec<u32> {
        self.0
    }
}

impl std::fmt::Display for ActionSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub length: usize,
    pub action_max: u32,
    pub target: i64,
    pub reward_base: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            length: 5,
            action_max: 5,
            target: 15,
            reward_base: 10.0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::config("env.length", "must be at least 1"));
        }
        if !self.reward_base.is_finite() {
            return Err(Error::config("env.reward_base", "must be finite"));
        }
        Ok(())
    }

    /// Number of distinct actions per position.
    pub fn arity(&self) -> usize {
        self.action_max as usize + 1
    }

    /// `(action_max + 1)^length`, or `None` on overflow.
    pub fn sequence_count(&self) -> Option<u64> {
        let arity = u64::from(self.action_max) + 1;
        let exp = u32::try_from(self.length).ok()?;
        arity.checked_pow(exp)
    }
}

/// Reward of a sequence; rejects sequences that violate `cfg`.
pub fn reward(seq: &ActionSequence, cfg: &EnvConfig) -> Result<f64> {
    seq.validate(cfg)?;
    Ok(reward_unchecked(seq, cfg))
}

/// Reward for a sequence already known to be valid.
#[inline]
pub fn reward_unchecked(seq: &ActionSequence, cfg: &EnvConfig) -> f64 {
    reward_from_sum(seq.sum(), cfg)
}

#[inline]
fn reward_from_sum(sum: i64, cfg: &EnvConfig) -> f64 {
    cfg.reward_base - (sum - cfg.target).abs() as f64
}

pub fn sample_random<R: Rng + ?Sized>(rng: &mut R, cfg: &EnvConfig) -> ActionSequence {
    let actions = (0..cfg.length)
        .map(|_| rng.gen_range(0..=cfg.action_max))
        .collect();
    ActionSequence(actions)
}

/// Exact statistics of the task under a uniform random policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub expected_random_reward: f64,
    pub optimal_reward: f64,
    pub optimal_count: u64,
    pub total_sequences: u64,
}

/// Visits every sequence of the action space and reports the mean reward,
/// the maximum reward and how many sequences attain it.
pub fn oracle_enumerate(cfg: &EnvConfig) -> Result<OracleReport> {
    cfg.validate()?;
    let total = match cfg.sequence_count() {
        Some(n) if n <= ENUMERATION_LIMIT => n,
        other => {
            return Err(Error::EnumerationTooLarge {
                count: other.map_or_else(
                    || format!("{}^{}", u64::from(cfg.action_max) + 1, cfg.length),
                    |n| n.to_string(),
                ),
                limit: ENUMERATION_LIMIT,
            })
        }
    };

    let mut digits = vec![0u32; cfg.length];
    let mut sum: i64 = 0;
    let mut total_reward = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut best_count = 0u64;
    for _ in 0..total {
        let r = reward_from_sum(sum, cfg);
        total_reward += r;
        if r > best {
            best = r;
            best_count = 1;
        } else if r == best {
            best_count += 1;
        }
        // odometer increment, keeping the running sum in step
        for d in digits.iter_mut() {
            if *d < cfg.action_max {
                *d += 1;
                sum += 1;
                break;
            }
            sum -= i64::from(*d);
            *d = 0;
        }
    }

    Ok(OracleReport {
        expected_random_reward: total_reward / total as f64,
        optimal_reward: best,
        optimal_count: best_count,
        total_sequences: total,
    })
}

/// Sampled counterpart of [`OracleReport::expected_random_reward`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
}

pub fn monte_carlo_random<R: Rng + ?Sized>(
    cfg: &EnvConfig,
    samples: u64,
    rng: &mut R,
) -> MonteCarloEstimate {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let r = reward_unchecked(&sample_random(rng, cfg), cfg);
        let delta = r - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (r - mean);
    }
    let std_error = if samples > 1 {
        (m2 / (samples - 1) as f64).sqrt() / (samples as f64).sqrt()
    } else {
        0.0
    };
    MonteCarloEstimate {
        samples,
        mean,
        std_error,
    }
}

/// Target changes keyed by the step at which they take effect.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftSchedule(Vec<ShiftEntry>);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftEntry {
    pub activation_step: u64,
    pub new_target: i64,
}

impl ShiftSchedule {
    pub fn new(entries: Vec<ShiftEntry>) -> Result<Self> {
        if entries
            .windows(2)
            .any(|w| w[0].activation_step >= w[1].activation_step)
        {
            return Err(Error::config(
                "shift",
                "activation steps must be strictly increasing",
            ));
        }
        Ok(ShiftSchedule(entries))
    }

    pub fn none() -> Self {
        ShiftSchedule(Vec::new())
    }

    pub fn entries(&self) -> &[ShiftEntry] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first_activation(&self) -> Option<u64> {
        self.0.first().map(|e| e.activation_step)
    }
}

/// Environment in force at `step`: the target of the latest entry whose
/// activation step has been reached, or `cfg` unchanged.
pub fn apply_shift(cfg: &EnvConfig, step: u64, schedule: &ShiftSchedule) -> EnvConfig {
    let mut out = cfg.clone();
    if let Some(entry) = schedule
        .entries()
        .iter()
        .rev()
        .find(|e| e.activation_step <= step)
    {
        out.target = entry.new_target;
    }
    out
}
