//! Multi-seed experiments built on [`super::run_single`]: variant comparison,
//! component ablations, target-shift adaptation and the mutation-rate sweep.
//!
//! Seeds run in parallel on a dedicated thread pool; results are always
//! collected in seed order, so reports do not depend on the job count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::ShiftSchedule;
use crate::error::{Error, Result};
use crate::evolution::FitnessWeights;
use crate::util::mean_std;

use super::config::{RunConfig, Variant};
use super::run::{run_single_with, CurvePoint, RunOptions, RunRecord};

/// Number of pre-shift evaluation points averaged into the plateau.
pub const PLATEAU_WINDOW: usize = 10;
/// Fraction of the plateau a run must regain to count as adapted.
pub const RECOVERY_FRACTION: f64 = 0.9;

/// Runs `config` once per seed on `jobs` worker threads.
pub fn run_seeds(config: &RunConfig, seeds: &[u64], jobs: usize) -> Result<Vec<RunRecord>> {
    let configs: Vec<RunConfig> = seeds.iter().map(|&s| config.clone().with_seed(s)).collect();
    run_configs(&configs, jobs)
}

/// Runs every config on `jobs` worker threads, returning records in input
/// order.
pub fn run_configs(configs: &[RunConfig], jobs: usize) -> Result<Vec<RunRecord>> {
    run_configs_with(configs, RunOptions::default(), jobs)
}

/// [`run_configs`] with optional captures (logits, final buffer).
pub fn run_configs_with(
    configs: &[RunConfig],
    options: RunOptions,
    jobs: usize,
) -> Result<Vec<RunRecord>> {
    if jobs == 0 {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    for cfg in configs {
        cfg.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Precondition(format!("could not start worker pool: {e}")))?;
    pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_single_with(c, options))
            .collect()
    })
}

fn require_seeds(seeds: &[u64], min: usize) -> Result<()> {
    if seeds.len() < min {
        return Err(Error::Precondition(format!(
            "need at least {min} seeds, got {}",
            seeds.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantStats {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub finals: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub novelty: Vec<f64>,
    pub novelty_mean: f64,
}

impl VariantStats {
    pub fn from_records(variant: Variant, records: &[RunRecord]) -> Self {
        let finals: Vec<f64> = records.iter().map(|r| r.final_mean_reward).collect();
        let novelty: Vec<f64> = records.iter().map(RunRecord::novelty_score).collect();
        let (mean, std) = mean_std(&finals);
        VariantStats {
            variant,
            seeds: records.iter().map(|r| r.seed).collect(),
            mean,
            std,
            novelty_mean: mean_std(&novelty).0,
            finals,
            novelty,
        }
    }
}

/// Final-reward statistics of one config over `seeds` (at least two).
pub fn run_variant(config: &RunConfig, seeds: &[u64], jobs: usize) -> Result<VariantStats> {
    require_seeds(seeds, 2)?;
    let records = run_seeds(config, seeds, jobs)?;
    Ok(VariantStats::from_records(config.variant, &records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanGap {
    pub higher: Variant,
    pub lower: Variant,
    /// `mean(higher) - mean(lower)`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub variants: Vec<VariantStats>,
    pub gaps: Vec<MeanGap>,
}

impl SummaryStats {
    pub fn get(&self, variant: Variant) -> Option<&VariantStats> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    pub fn gap(&self, higher: Variant, lower: Variant) -> Option<f64> {
        Some(self.get(higher)?.mean - self.get(lower)?.mean)
    }
}

/// Runs all three variants derived from `base` over the same seeds.
pub fn compare_variants(base: &RunConfig, seeds: &[u64], jobs: usize) -> Result<SummaryStats> {
    require_seeds(seeds, 2)?;
    let variants = Variant::ALL
        .into_iter()
        .map(|v| run_variant(&base.as_variant(v), seeds, jobs))
        .collect::<Result<Vec<_>>>()?;
    let mut gaps = Vec::new();
    for (i, hi) in variants.iter().enumerate().rev() {
        for lo in variants[..i].iter().rev() {
            gaps.push(MeanGap {
                higher: hi.variant,
                lower: lo.variant,
                gap: hi.mean - lo.mean,
            });
        }
    }
    Ok(SummaryStats { variants, gaps })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Full,
    WithoutMutation,
    WithoutEnterpriseFitness,
    WithoutNoveltyBonus,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::WithoutMutation,
        Ablation::WithoutEnterpriseFitness,
        Ablation::WithoutNoveltyBonus,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::WithoutMutation => "w/o mutation",
            Ablation::WithoutEnterpriseFitness => "w/o enterprise fitness",
            Ablation::WithoutNoveltyBonus => "w/o novelty priority bonus",
        }
    }

    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut cfg = base.clone();
        match self {
            Ablation::Full => {}
            Ablation::WithoutMutation => cfg.mutation_enabled = false,
            Ablation::WithoutEnterpriseFitness => cfg.enterprise_fitness_enabled = false,
            Ablation::WithoutNoveltyBonus => cfg.novelty_bonus_enabled = false,
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub ablation: Ablation,
    pub stats: VariantStats,
    /// The ablated component was already inactive in the base config, so
    /// this row repeats the full run.
    pub degenerate: bool,
    /// Per seed, full final reward minus this row's final reward.
    pub paired_drop: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, ablation: Ablation) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.ablation == ablation)
    }

    /// For each seed, the ablation with the largest drop from the full run
    /// (ties go to the earlier row).
    pub fn largest_drop_per_seed(&self) -> Vec<Ablation> {
        (0..self.seeds.len())
            .map(|k| {
                let mut best = (Ablation::WithoutMutation, f64::NEG_INFINITY);
                for row in self.rows.iter().filter(|r| r.ablation != Ablation::Full) {
                    if row.paired_drop[k] > best.1 {
                        best = (row.ablation, row.paired_drop[k]);
                    }
                }
                best.0
            })
            .collect()
    }
}

/// Full run plus one run per disabled component, all on the same seeds.
pub fn run_ablations(base: &RunConfig, seeds: &[u64], jobs: usize) -> Result<AblationReport> {
    if base.variant != Variant::CosmocoreEvo || !base.evolution_enabled {
        return Err(Error::Precondition(
            "ablations need a cosmocore-evo base config with evolution enabled".into(),
        ));
    }
    require_seeds(seeds, 2)?;
    let full_evo = base.effective_evo();
    let full_sample = base.effective_sample();
    let mut rows: Vec<AblationRow> = Vec::new();
    for ablation in Ablation::ALL {
        let cfg = ablation.apply(base);
        let records = run_seeds(&cfg, seeds, jobs)?;
        let stats = VariantStats::from_records(cfg.variant, &records);
        let degenerate = ablation != Ablation::Full
            && cfg.effective_evo() == full_evo
            && cfg.effective_sample() == full_sample;
        let paired_drop = match rows.first() {
            Some(full) => full
                .stats
                .finals
                .iter()
                .zip(&stats.finals)
                .map(|(f, x)| f - x)
                .collect(),
            None => vec![0.0; seeds.len()],
        };
        rows.push(AblationRow {
            ablation,
            stats,
            degenerate,
            paired_drop,
        });
    }
    Ok(AblationReport {
        seeds: seeds.to_vec(),
        rows,
    })
}

/// Canonical ablation base: the evo variant with every ablatable component
/// switched on.
pub fn ablation_base() -> RunConfig {
    let mut cfg = RunConfig::for_variant(Variant::CosmocoreEvo);
    cfg.evo.weights = FitnessWeights::ENTERPRISE_PRESET;
    cfg.sample.novelty_mu = 0.1;
    cfg
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Adaptation {
    pub seed: u64,
    /// Mean of the last pre-shift evaluation points, if there were any.
    pub plateau: Option<f64>,
    /// Environment steps from the shift to recovery; when censored, the
    /// number of steps the run had left after the shift.
    pub steps: u64,
    pub censored: bool,
}

/// Steps after `shift_step` until the evaluation mean first reaches
/// [`RECOVERY_FRACTION`] of the pre-shift plateau.
pub fn adaptation_steps(
    curve: &[CurvePoint],
    shift_step: u64,
    total_steps: u64,
) -> (Option<f64>, u64, bool) {
    let remaining = total_steps.saturating_sub(shift_step);
    let pre: Vec<f64> = curve
        .iter()
        .filter(|p| p.step < shift_step)
        .map(|p| p.mean_reward)
        .collect();
    if pre.is_empty() {
        return (None, remaining, true);
    }
    let window = &pre[pre.len().saturating_sub(PLATEAU_WINDOW)..];
    let plateau = mean_std(window).0;
    let threshold = RECOVERY_FRACTION * plateau;
    match curve
        .iter()
        .find(|p| p.step >= shift_step && p.mean_reward >= threshold)
    {
        Some(p) => (Some(plateau), p.step - shift_step, false),
        None => (Some(plateau), remaining, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftVariantReport {
    pub variant: Variant,
    pub runs: Vec<Adaptation>,
    pub mean_steps: f64,
    pub censored_runs: usize,
    pub final_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub shift_step: u64,
    pub schedule: ShiftSchedule,
    pub variants: Vec<ShiftVariantReport>,
}

impl ShiftReport {
    pub fn get(&self, variant: Variant) -> Option<&ShiftVariantReport> {
        self.variants.iter().find(|v| v.variant == variant)
    }
}

/// Runs every variant derived from `base` under `schedule` and measures how
/// long each takes to recover after the first shift.
pub fn run_shift(
    base: &RunConfig,
    seeds: &[u64],
    schedule: &ShiftSchedule,
    jobs: usize,
) -> Result<ShiftReport> {
    let shift_step = schedule
        .first_activation()
        .ok_or_else(|| Error::Precondition("shift experiment needs a non-empty schedule".into()))?;
    require_seeds(seeds, 1)?;
    let mut variants = Vec::new();
    for v in Variant::ALL {
        let mut cfg = base.as_variant(v);
        cfg.shift = schedule.clone();
        let records = run_seeds(&cfg, seeds, jobs)?;
        let runs: Vec<Adaptation> = records
            .iter()
            .map(|r| {
                let (plateau, steps, censored) =
                    adaptation_steps(&r.curve, shift_step, r.total_steps);
                Adaptation {
                    seed: r.seed,
                    plateau,
                    steps,
                    censored,
                }
            })
            .collect();
        let steps: Vec<f64> = runs.iter().map(|a| a.steps as f64).collect();
        let finals: Vec<f64> = records.iter().map(|r| r.final_mean_reward).collect();
        variants.push(ShiftVariantReport {
            variant: v,
            mean_steps: mean_std(&steps).0,
            censored_runs: runs.iter().filter(|a| a.censored).count(),
            final_mean: mean_std(&finals).0,
            runs,
        });
    }
    Ok(ShiftReport {
        shift_step,
        schedule: schedule.clone(),
        variants,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub mutation_rate: f64,
    pub stats: VariantStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Rate with the highest mean final reward (first on ties).
    pub best_rate: f64,
}

pub fn run_mutation_sweep(
    config: &RunConfig,
    seeds: &[u64],
    rates: &[f64],
    jobs: usize,
) -> Result<SweepReport> {
    if rates.is_empty() {
        return Err(Error::config(
            "rates",
            "at least one mutation rate is required",
        ));
    }
    if let Some(bad) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::config(
            "rates",
            format!("{bad} is outside the allowed range [0, 1]"),
        ));
    }
    let mut rows = Vec::with_capacity(rates.len());
    for &rate in rates {
        let mut cfg = config.clone();
        cfg.evo.mutation_rate = rate;
        rows.push(SweepRow {
            mutation_rate: rate,
            stats: run_variant(&cfg, seeds, jobs)?,
        });
    }
    let best_rate = rows
        .iter()
        .fold(None::<&SweepRow>, |best, row| match best {
            Some(b) if b.stats.mean >= row.stats.mean => Some(b),
            _ => Some(row),
        })
        .map(|r| r.mutation_rate)
        .unwrap_or(rates[0]);
    Ok(SweepReport { rows, best_rate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(step: u64, mean_reward: f64) -> CurvePoint {
        CurvePoint {
            step,
            mean_reward,
            std_reward: 0.0,
            buffer_size: 0,
            mean_priority: 0.0,
            distinct_near_optimal: 0,
        }
    }

    fn small(variant: Variant) -> RunConfig {
        let mut cfg = RunConfig::for_variant(variant);
        cfg.n_collect = 120;
        cfg.n_batches = 20;
        cfg.eval_samples = 64;
        cfg
    }

    #[test]
    fn adaptation_from_curve() {
        let curve: Vec<CurvePoint> = (1..=30)
            .map(|i| {
                let step = i * 10;
                let r = if step < 150 {
                    9.0
                } else if step < 250 {
                    4.0
                } else {
                    8.5
                };
                point(step, r)
            })
            .collect();
        let (plateau, steps, censored) = adaptation_steps(&curve, 150, 300);
        assert_eq!(plateau, Some(9.0));
        assert_eq!(steps, 100);
        assert!(!censored);
    }

    #[test]
    fn adaptation_plateau_uses_last_window() {
        let mut curve: Vec<CurvePoint> = (1..=20).map(|i| point(i * 10, 2.0)).collect();
        for p in curve.iter_mut().skip(10) {
            p.mean_reward = 6.0;
        }
        curve.push(point(210, 5.5));
        let (plateau, steps, censored) = adaptation_steps(&curve, 205, 210);
        assert_eq!(plateau, Some(6.0));
        assert_eq!((steps, censored), (5, false));
    }

    #[test]
    fn adaptation_censored_when_never_recovered() {
        let curve = vec![point(10, 9.0), point(20, 1.0), point(30, 1.0)];
        assert_eq!(adaptation_steps(&curve, 15, 30), (Some(9.0), 15, true));
    }

    #[test]
    fn shift_at_step_zero_is_censored() {
        let curve = vec![point(10, 9.0), point(20, 9.0)];
        assert_eq!(adaptation_steps(&curve, 0, 20), (None, 20, true));
    }

    #[test]
    fn empty_schedule_is_rejected() {
        let err = run_shift(
            &small(Variant::Cosmocore),
            &[0, 1],
            &ShiftSchedule::none(),
            1,
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn variant_needs_two_seeds() {
        assert!(matches!(
            run_variant(&small(Variant::Cosmocore), &[3], 1),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            run_variant(&small(Variant::Cosmocore), &[3, 4], 0),
            Err(Error::InvalidConfig { .. })
        ));
    }

    #[test]
    fn seed_order_and_job_count_do_not_matter() {
        let cfg = small(Variant::CosmocoreEvo);
        let one = run_variant(&cfg, &[5, 1, 9], 1).unwrap();
        let three = run_variant(&cfg, &[5, 1, 9], 3).unwrap();
        assert_eq!(one, three);
        assert_eq!(one.seeds, vec![5, 1, 9]);
    }

    #[test]
    fn ablation_rows_and_degenerate_flag() {
        // weights left at zero: the fitness ablation is a no-op
        let mut base = small(Variant::CosmocoreEvo);
        base.sample.novelty_mu = 0.1;
        let report = run_ablations(&base, &[0, 1], 2).unwrap();
        assert_eq!(report.rows.len(), 4);
        let fit = report.row(Ablation::WithoutEnterpriseFitness).unwrap();
        assert!(fit.degenerate);
        assert_eq!(
            fit.stats.finals,
            report.row(Ablation::Full).unwrap().stats.finals
        );
        assert!(!report.row(Ablation::WithoutMutation).unwrap().degenerate);
        assert!(
            !report
                .row(Ablation::WithoutNoveltyBonus)
                .unwrap()
                .degenerate
        );
        for row in &report.rows {
            assert_eq!(row.paired_drop.len(), 2);
        }
        assert_eq!(
            report.row(Ablation::Full).unwrap().paired_drop,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn ablations_need_evo_base() {
        assert!(run_ablations(&small(Variant::Cosmocore), &[0, 1], 1).is_err());
    }

    #[test]
    fn sweep_rate_zero_matches_mutation_ablation() {
        let base = small(Variant::CosmocoreEvo);
        let sweep = run_mutation_sweep(&base, &[0, 1], &[0.0, 0.2], 2).unwrap();
        assert_eq!(sweep.rows.len(), 2);
        let mut off = base.clone();
        off.mutation_enabled = false;
        let ablated = run_variant(&off, &[0, 1], 1).unwrap();
        for (a, b) in sweep.rows[0].stats.finals.iter().zip(&ablated.finals) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert!(sweep.rows.iter().all(|r| r.stats.std >= 0.0));
    }

    #[test]
    fn sweep_rejects_bad_rates() {
        let base = small(Variant::CosmocoreEvo);
        assert!(run_mutation_sweep(&base, &[0, 1], &[], 1).is_err());
        let err = run_mutation_sweep(&base, &[0, 1], &[0.2, 1.5], 1).unwrap_err();
        assert!(err.to_string().contains("1.5"));
    }

    #[test]
    fn compare_reports_all_gaps() {
        let summary = compare_variants(&small(Variant::CosmocoreEvo), &[0, 1], 2).unwrap();
        assert_eq!(summary.variants.len(), 3);
        assert_eq!(summary.gaps.len(), 3);
        let g = summary
            .gap(Variant::CosmocoreEvo, Variant::UniformBaseline)
            .unwrap();
        assert!(summary
            .gaps
            .iter()
            .any(|m| m.higher == Variant::CosmocoreEvo
                && m.lower == Variant::UniformBaseline
                && m.gap == g));
    }
}
