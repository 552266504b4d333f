//! A single seeded run of the collect / prune / evolve / replay loop.
//!
//! Steps `1..=n_collect` each collect one trajectory from the policy, insert
//! it, run any scheduled maintenance, and (once the buffer holds a full
//! batch) take one policy update. Steps `n_collect+1..=n_collect+n_batches`
//! skip collection but otherwise behave the same. Pruning fires on steps
//! divisible by `prune_period`, evolution on steps divisible by
//! `evo.period` while the buffer holds more than one item, and evaluation on
//! steps divisible by `eval_every` and at the final step.

use std::collections::HashSet;
use std::time::Instant;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{self, apply_shift, ActionSequence, EnvConfig};
use crate::error::Result;
use crate::evolution::{self, EvoStats};
use crate::policy::{self, Baseline, CategoricalPolicy};
use crate::replay::{BufferItem, BufferSnapshot, ReplayBuffer};
use crate::util::substream;

use super::config::{RunConfig, Variant};

// Independent random streams of a run.
const STREAM_COLLECT: u64 = 1;
const STREAM_REPLAY: u64 = 2;
const STREAM_EVOLVE: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_NOVELTY: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub buffer_size: usize,
    pub mean_priority: f64,
    pub distinct_near_optimal: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub step: u64,
    pub removed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvoLogEntry {
    #[serde(flatten)]
    pub stats: EvoStats,
    /// Highest reward of any trajectory seen so far in the run.
    pub running_max_reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitsCheckpoint {
    pub step: u64,
    pub positions: usize,
    pub arity: usize,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub variant: Variant,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub final_mean_reward: f64,
    /// Distinct trajectories with reward >= `reward_base - 1` seen anywhere.
    pub distinct_near_optimal: usize,
    pub optimal_count: u64,
    pub prune_log: Vec<PruneEvent>,
    pub evo_log: Vec<EvoLogEntry>,
    pub total_steps: u64,
    pub duration_secs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<LogitsCheckpoint>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer: Option<BufferSnapshot>,
}

impl RunRecord {
    /// Distinct near-optimal coverage normalised by the optimum count.
    pub fn novelty_score(&self) -> f64 {
        novelty_ratio(self.distinct_near_optimal, self.optimal_count)
    }
}

fn novelty_ratio(distinct: usize, optimal_count: u64) -> f64 {
    if optimal_count == 0 {
        0.0
    } else {
        distinct as f64 / optimal_count as f64
    }
}

/// Novelty score of a finished run: distinct trajectories with reward at
/// least `reward_base - 1` ever observed, divided by the number of optimal
/// sequences of `env`.
pub fn novelty_score(record: &RunRecord, env: &EnvConfig) -> Result<f64> {
    let oracle = env::oracle_enumerate(env)?;
    Ok(novelty_ratio(
        record.distinct_near_optimal,
        oracle.optimal_count,
    ))
}

/// Optional extras captured during a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub capture_logits: bool,
    pub capture_buffer: bool,
}

/// Tracks the distinct near-optimal trajectories observed.
struct Coverage {
    seen: HashSet<ActionSequence>,
    running_max: f64,
}

impl Coverage {
    fn observe(&mut self, seq: &ActionSequence, reward: f64, env: &EnvConfig) {
        if reward > self.running_max {
            self.running_max = reward;
        }
        if reward >= env.reward_base - 1.0 && !self.seen.contains(seq) {
            self.seen.insert(seq.clone());
        }
    }
}

pub fn run_single(config: &RunConfig) -> Result<RunRecord> {
    run_single_with(config, RunOptions::default())
}

pub fn run_single_with(config: &RunConfig, options: RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let started = Instant::now();
    let oracle = env::oracle_enumerate(&config.env)?;
    let evo_cfg = config.effective_evo();
    let sample_spec = config.effective_sample();
    let affect_cfg = &config.affect;

    let mut collect_rng: ChaCha8Rng = substream(config.seed, STREAM_COLLECT);
    let mut replay_rng: ChaCha8Rng = substream(config.seed, STREAM_REPLAY);
    let mut evolve_rng: ChaCha8Rng = substream(config.seed, STREAM_EVOLVE);
    let mut eval_rng: ChaCha8Rng = substream(config.seed, STREAM_EVAL);

    let mut buffer = ReplayBuffer::with_novelty(
        config.capacity,
        sample_spec.novelty_mu,
        substream_seed(config.seed, STREAM_NOVELTY),
    );
    let mut learner = CategoricalPolicy::uniform(&config.env, config.learn.context);
    let mut baseline =
        Baseline::with_prior(oracle.expected_random_reward, config.learn.baseline_decay);
    let mut coverage = Coverage {
        seen: HashSet::new(),
        running_max: f64::NEG_INFINITY,
    };

    let mut curve = Vec::new();
    let mut prune_log = Vec::new();
    let mut evo_log = Vec::new();
    let mut logits = options.capture_logits.then(Vec::new);
    let total = config.total_steps();

    for step in 1..=total {
        let env_now = apply_shift(&config.env, step, &config.shift);

        if step <= config.n_collect {
            let traj = learner.sample(&mut collect_rng);
            let r = env::reward_unchecked(&traj, &env_now);
            coverage.observe(&traj, r, &env_now);
            let td = policy::td_error(r, &baseline);
            buffer.insert(BufferItem::new(traj, r, td, affect_cfg, step));
            baseline = policy::update_baseline(baseline, r);
        }

        if step % config.prune_period == 0 {
            let removed = buffer.prune(affect_cfg);
            prune_log.push(PruneEvent { step, removed });
        }

        if config.evolution_enabled && step % evo_cfg.period == 0 && buffer.len() > 1 {
            let stats = evolution::evolutionary_update(
                &mut buffer,
                &env_now,
                &evo_cfg,
                affect_cfg,
                baseline.value,
                step,
                &mut evolve_rng,
            )?;
            for it in buffer
                .items()
                .iter()
                .filter(|it| it.birth_step == step && it.generation > 0)
            {
                coverage.observe(&it.trajectory, it.reward, &env_now);
            }
            evo_log.push(EvoLogEntry {
                stats,
                running_max_reward: coverage.running_max,
            });
        }

        if buffer.len() >= sample_spec.batch_size {
            let batch = buffer.sample_minibatch(&sample_spec, &mut replay_rng)?;
            for it in &batch {
                let r = env::reward_unchecked(&it.trajectory, &env_now);
                coverage.observe(&it.trajectory, r, &env_now);
            }
            policy::update(&mut learner, &batch, &baseline, &config.learn)?;
        }

        if step % config.eval_every == 0 || step == total {
            let eval =
                policy::evaluate_policy(&learner, &env_now, config.eval_samples, &mut eval_rng);
            curve.push(CurvePoint {
                step,
                mean_reward: eval.mean,
                std_reward: eval.std,
                buffer_size: buffer.len(),
                mean_priority: buffer.mean_priority(),
                distinct_near_optimal: coverage.seen.len(),
            });
            if let Some(l) = logits.as_mut() {
                l.push(LogitsCheckpoint {
                    step,
                    positions: learner.positions(),
                    arity: learner.arity(),
                    logits: learner.logits().to_vec(),
                });
            }
        }
    }

    let final_mean_reward = match curve.last() {
        Some(p) => p.mean_reward,
        None => {
            let env_now = apply_shift(&config.env, 0, &config.shift);
            policy::evaluate_policy(&learner, &env_now, config.eval_samples, &mut eval_rng).mean
        }
    };

    Ok(RunRecord {
        config_hash: config.config_hash(),
        variant: config.variant,
        seed: config.seed,
        curve,
        final_mean_reward,
        distinct_near_optimal: coverage.seen.len(),
        optimal_count: oracle.optimal_count,
        prune_log,
        evo_log,
        total_steps: total,
        duration_secs: started.elapsed().as_secs_f64(),
        logits,
        buffer: options.capture_buffer.then(|| buffer.snapshot()),
    })
}

fn substream_seed(seed: u64, stream: u64) -> u64 {
    use rand::Rng;
    substream(seed, stream).gen()
}
