//! Acceptance suite. Runs every criterion at its stated tolerance, prints
//! one PASS/FAIL line per criterion (with the sub-checks underneath) and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dream_evo::affect::AffectConfig;
use dream_evo::env::{self, ActionSequence, EnvConfig, ShiftEntry, ShiftSchedule};
use dream_evo::evolution::{self, EvoConfig};
use dream_evo::harness::{
    ablation_base, run_ablations, run_configs, run_seeds, run_shift, run_single, Ablation,
    RunConfig, Variant,
};
use dream_evo::io::render_curve_csv;
use dream_evo::policy::{
    self, advantage_weights, Baseline, CategoricalPolicy, LearnConfig, PolicyContext,
    WeightNormalization,
};
use dream_evo::replay::{BufferItem, ReplayBuffer, SampleSpec};
use dream_evo::util::mean_std;

type Criterion = fn() -> Vec<Sub>;

struct Sub {
    name: String,
    passed: bool,
    detail: String,
}

fn sub(name: &str, passed: bool, detail: String) -> Sub {
    Sub {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn mean_final(config: &RunConfig, seeds: &[u64]) -> f64 {
    let records = run_seeds(config, seeds, jobs()).expect("runs succeed");
    mean_std(
        &records
            .iter()
            .map(|r| r.final_mean_reward)
            .collect::<Vec<_>>(),
    )
    .0
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn criterion_1() -> Vec<Sub> {
    let s = seeds(20);
    let base = RunConfig::for_variant(Variant::CosmocoreEvo);
    let b = mean_final(&base.as_variant(Variant::UniformBaseline), &s);
    let c = mean_final(&base.as_variant(Variant::Cosmocore), &s);
    let e = mean_final(&base.as_variant(Variant::CosmocoreEvo), &s);
    vec![
        sub(
            "uniform-baseline mean in [5.8, 6.8]",
            (5.8..=6.8).contains(&b),
            format!("{b:.3}"),
        ),
        sub(
            "cosmocore exceeds baseline by >= 0.3",
            c - b >= 0.3,
            format!("{c:.3} - {b:.3} = {:+.3}", c - b),
        ),
        sub("cosmocore-evo mean >= 9.0", e >= 9.0, format!("{e:.3}")),
        sub(
            "cosmocore-evo exceeds cosmocore by >= 1.5",
            e - c >= 1.5,
            format!("{e:.3} - {c:.3} = {:+.3}", e - c),
        ),
    ]
}

fn criterion_2() -> Vec<Sub> {
    let mut base = ablation_base();
    base.shift = ShiftSchedule::new(vec![ShiftEntry {
        activation_step: 650,
        new_target: 10,
    }])
    .unwrap();
    let report = run_ablations(&base, &seeds(5), jobs()).expect("ablations run");
    let full = report.row(Ablation::Full).unwrap().stats.mean;
    let no_mut = report.row(Ablation::WithoutMutation).unwrap().stats.mean;
    let largest = report.largest_drop_per_seed();
    let count = largest
        .iter()
        .filter(|a| **a == Ablation::WithoutMutation)
        .count();
    let drops: Vec<String> = report
        .rows
        .iter()
        .skip(1)
        .map(|r| format!("{} {:+.3}", r.ablation.label(), mean_std(&r.paired_drop).0))
        .collect();
    vec![
        sub(
            "full beats w/o mutation",
            full > no_mut,
            format!("{full:.3} vs {no_mut:.3}"),
        ),
        sub(
            "w/o mutation is the largest drop in >= 4 of 5 seeds",
            count >= 4,
            format!("{count} of 5 (mean drops: {})", drops.join(", ")),
        ),
    ]
}

fn criterion_3() -> Vec<Sub> {
    let schedule = ShiftSchedule::new(vec![ShiftEntry {
        activation_step: 650,
        new_target: 10,
    }])
    .unwrap();
    let report = run_shift(
        &RunConfig::for_variant(Variant::CosmocoreEvo),
        &seeds(5),
        &schedule,
        jobs(),
    )
    .expect("shift runs");
    let steps = |v| report.get(v).unwrap().mean_steps;
    let (b, c, e) = (
        steps(Variant::UniformBaseline),
        steps(Variant::Cosmocore),
        steps(Variant::CosmocoreEvo),
    );
    vec![
        sub(
            "evo <= cosmocore <= baseline",
            e <= c && c <= b,
            format!("{e:.1} <= {c:.1} <= {b:.1}"),
        ),
        sub(
            "evo strictly below baseline",
            e < b,
            format!("{e:.1} < {b:.1}"),
        ),
    ]
}

/// Number of length-`n` sequences over `0..=m` with the given sum, by
/// inclusion-exclusion over positions forced above `m`.
fn compositions(n: i64, m: i64, sum: i64) -> i64 {
    fn binom(n: i64, k: i64) -> i64 {
        if k < 0 || n < k {
            return 0;
        }
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }
    (0..=n)
        .map(|k| {
            let rest = sum - k * (m + 1);
            if rest < 0 {
                0
            } else {
                let sign = if k % 2 == 0 { 1 } else { -1 };
                sign * binom(n, k) * binom(rest + n - 1, n - 1)
            }
        })
        .sum()
}

fn criterion_4() -> Vec<Sub> {
    let cfg = EnvConfig::default();
    let oracle = env::oracle_enumerate(&cfg).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000u64;
    let rewards: Vec<f64> = (0..n)
        .map(|_| {
            let seq: Vec<u32> = (0..5).map(|_| rng.gen_range(0..=5)).collect();
            10.0 - (seq.iter().map(|&a| a as i64).sum::<i64>() - 15).abs() as f64
        })
        .collect();
    let (mc, sd) = mean_std(&rewards);
    let se = sd / (n as f64).sqrt();

    // exact mean by convolving the per-position sum distribution
    let mut dist = vec![1.0f64];
    for _ in 0..5 {
        let mut next = vec![0.0; dist.len() + 5];
        for (s, p) in dist.iter().enumerate() {
            for a in 0..=5 {
                next[s + a] += p / 6.0;
            }
        }
        dist = next;
    }
    let convolved: f64 = dist
        .iter()
        .enumerate()
        .map(|(s, p)| p * (10.0 - (s as f64 - 15.0).abs()))
        .sum();

    let ie = compositions(5, 5, 15);
    vec![
        sub(
            "optimal reward is exactly 10.0",
            oracle.optimal_reward == 10.0,
            format!("{}", oracle.optimal_reward),
        ),
        sub(
            "expected random reward in [5.0, 6.0]",
            (5.0..=6.0).contains(&oracle.expected_random_reward),
            format!("{:.6}", oracle.expected_random_reward),
        ),
        sub(
            "enumeration agrees with sum convolution",
            (convolved - oracle.expected_random_reward).abs() < 1e-12,
            format!("{convolved:.10}"),
        ),
        sub(
            "10^5-sample Monte Carlo within 3 standard errors",
            (mc - oracle.expected_random_reward).abs() <= 3.0 * se,
            format!(
                "{mc:.4} vs {:.4} (se {se:.4})",
                oracle.expected_random_reward
            ),
        ),
        sub(
            "optimal count matches inclusion-exclusion",
            oracle.optimal_count as i64 == ie,
            format!("{} vs {ie}", oracle.optimal_count),
        ),
    ]
}

fn criterion_5() -> Vec<Sub> {
    // 1000 items with distinct priorities; the top set is the 10 best
    let affect = AffectConfig::default();
    let mut buffer = ReplayBuffer::new(1000);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..1000 {
        let seq = env::sample_random(&mut rng, &EnvConfig::default());
        buffer.insert(BufferItem::new(seq, 5.0, k as f64 * 0.01, &affect, k));
    }
    let spec = SampleSpec {
        batch_size: 5,
        high_fraction: 0.8,
        top_fraction: 0.01,
        novelty_mu: 0.0,
    };
    let top = buffer.top_set_ids(&spec);
    let draws = 100_000usize;
    let mut hits = 0usize;
    for _ in 0..draws / spec.batch_size {
        for it in buffer.sample_minibatch(&spec, &mut rng).unwrap() {
            if top.contains(&it.id) {
                hits += 1;
            }
        }
    }
    let freq = hits as f64 / draws as f64;

    let mut capacity_ok = true;
    let mut idempotent_ok = true;
    let mut unique_ok = true;
    let mut rng = ChaCha8Rng::seed_from_u64(55);
    for _ in 0..10_000 {
        let capacity = rng.gen_range(1..=12);
        let mut b = ReplayBuffer::new(capacity);
        for step in 0..rng.gen_range(1..40u64) {
            match rng.gen_range(0..3) {
                0 | 1 => {
                    let seq = env::sample_random(&mut rng, &EnvConfig::default());
                    let r = env::reward_unchecked(&seq, &EnvConfig::default());
                    let td = r - rng.gen_range(4.0..8.0);
                    b.insert(BufferItem::new(seq, r, td, &affect, step));
                }
                _ => {
                    let before_top = b
                        .items()
                        .iter()
                        .max_by(|x, y| x.priority.total_cmp(&y.priority).then(y.id.cmp(&x.id)))
                        .map(|it| it.id);
                    b.prune(&affect);
                    if b.prune(&affect) != 0 {
                        idempotent_ok = false;
                    }
                    if let Some(id) = before_top {
                        if b.get(id).is_none() {
                            idempotent_ok = false;
                        }
                    }
                }
            }
            if b.len() > capacity {
                capacity_ok = false;
            }
            let mut ids: Vec<u64> = b.items().iter().map(|it| it.id).collect();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != b.len() {
                unique_ok = false;
            }
        }
    }
    vec![
        sub(
            "top-set frequency within 1% of high_fraction",
            (freq - 0.8).abs() <= 0.01,
            format!("{freq:.4} over {draws} draws (top set 1% of buffer)"),
        ),
        sub(
            "capacity holds over 10^4 op sequences",
            capacity_ok,
            String::new(),
        ),
        sub(
            "prune idempotent and keeps the top item",
            idempotent_ok,
            String::new(),
        ),
        sub("ids stay unique", unique_ok, String::new()),
    ]
}

fn objective(logits: &[f64], context: PolicyContext, batch: &[BufferItem], w: &[f64]) -> f64 {
    let (positions, arity) = (3usize, 3usize);
    let contexts = match context {
        PolicyContext::Position => 1,
        PolicyContext::PrefixSum => (positions - 1) * (arity - 1) + 1,
    };
    batch
        .iter()
        .zip(w)
        .map(|(it, w)| {
            let mut prefix = 0;
            let mut ll = 0.0;
            for (i, &a) in it.trajectory.actions().iter().enumerate() {
                let ctx = if contexts == 1 { 0 } else { prefix };
                let row = &logits[(i * contexts + ctx) * arity..(i * contexts + ctx + 1) * arity];
                ll += row[a as usize] - row.iter().map(|x| x.exp()).sum::<f64>().ln();
                prefix += a as usize;
            }
            w * ll
        })
        .sum()
}

fn criterion_6() -> Vec<Sub> {
    let small = EnvConfig {
        length: 3,
        action_max: 2,
        target: 3,
        reward_base: 10.0,
    };
    let affect = AffectConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        for context in [PolicyContext::Position, PolicyContext::PrefixSum] {
            for norm in [WeightNormalization::Sum, WeightNormalization::BatchMean] {
                let size = CategoricalPolicy::uniform(&small, context).logits().len();
                let logits: Vec<f64> = (0..size).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let policy = CategoricalPolicy::from_logits(3, 3, context, logits.clone());
                let batch: Vec<BufferItem> = (0..5)
                    .map(|_| {
                        let seq = env::sample_random(&mut rng, &small);
                        BufferItem::new(seq, rng.gen_range(0.0..10.0), 0.0, &affect, 0)
                    })
                    .collect();
                let w = advantage_weights(&batch, &Baseline::with_prior(5.0, 0.99), 0.0, norm);
                let analytic = policy::weighted_loglik_gradient(&policy, &batch, &w);
                let h = 1e-5;
                for j in 0..size {
                    let mut up = logits.clone();
                    let mut down = logits.clone();
                    up[j] += h;
                    down[j] -= h;
                    let numeric = (objective(&up, context, &batch, &w)
                        - objective(&down, context, &batch, &w))
                        / (2.0 * h);
                    let rel = (analytic[j] - numeric).abs()
                        / analytic[j].abs().max(numeric.abs()).max(1e-3);
                    worst = worst.max(rel);
                }
            }
        }
    }

    let cfg = EnvConfig::default();
    let evo = EvoConfig::default();
    let mut identity = true;
    for _ in 0..2000 {
        let seq = env::sample_random(&mut rng, &cfg);
        if evolution::mutate(&seq, 0.0, &mut rng, &cfg) != seq {
            identity = false;
        }
    }
    let mut buffer = ReplayBuffer::new(64);
    for k in 0..40 {
        let seq = env::sample_random(&mut rng, &cfg);
        let r = env::reward_unchecked(&seq, &cfg);
        buffer.insert(BufferItem::new(seq, r, r - 6.0, &affect, k));
    }
    let zero_rate = EvoConfig {
        mutation_rate: 0.0,
        ..evo
    };
    let parents: Vec<ActionSequence> = evolution::select_parents(&buffer, 0.5)
        .unwrap()
        .into_iter()
        .map(|p| p.trajectory)
        .collect();
    evolution::evolutionary_update(&mut buffer, &cfg, &zero_rate, &affect, 6.0, 50, &mut rng)
        .unwrap();
    let clones_only = buffer
        .items()
        .iter()
        .all(|it| parents.contains(&it.trajectory));

    let mut p = CategoricalPolicy::uniform(&cfg, PolicyContext::PrefixSum);
    let before = p.clone();
    let below: Vec<BufferItem> = (0..8)
        .map(|_| BufferItem::new(env::sample_random(&mut rng, &cfg), 2.0, 0.0, &affect, 0))
        .collect();
    let loss = policy::update(
        &mut p,
        &below,
        &Baseline::with_prior(6.0, 0.99),
        &LearnConfig::default(),
    )
    .unwrap();

    vec![
        sub(
            "analytic gradient within 1e-4 relative error",
            worst < 1e-4,
            format!("worst {worst:.2e}"),
        ),
        sub(
            "mutation_rate = 0 is the identity",
            identity && clones_only,
            String::new(),
        ),
        sub(
            "zero-advantage update is the identity",
            p == before && loss == 0.0,
            String::new(),
        ),
    ]
}

fn criterion_7() -> Vec<Sub> {
    let mut configs = Vec::new();
    for v in Variant::ALL {
        for seed in [3, 11] {
            configs.push(RunConfig::for_variant(v).with_seed(seed));
        }
    }
    let csv = |jobs| -> Vec<String> {
        run_configs(&configs, jobs)
            .unwrap()
            .iter()
            .map(|r| render_curve_csv(&r.curve).unwrap())
            .collect()
    };
    let first = csv(1);
    let again = csv(1);
    let parallel = csv(4);
    vec![
        sub(
            "two executions give byte-identical CSV",
            first == again,
            String::new(),
        ),
        sub(
            "job count does not change CSV",
            first == parallel,
            String::new(),
        ),
    ]
}

fn criterion_8() -> Vec<Sub> {
    let mut ok_evo = true;
    let mut ok_base = true;
    for seed in [0, 7, 19] {
        let mut stripped = RunConfig::for_variant(Variant::CosmocoreEvo).with_seed(seed);
        stripped.evolution_enabled = false;
        stripped.mutation_enabled = false;
        stripped.enterprise_fitness_enabled = false;
        stripped.novelty_bonus_enabled = false;
        let cosmo = RunConfig::for_variant(Variant::Cosmocore).with_seed(seed);
        let (a, b) = (run_single(&stripped).unwrap(), run_single(&cosmo).unwrap());
        ok_evo &=
            a.curve == b.curve && a.final_mean_reward.to_bits() == b.final_mean_reward.to_bits();

        let mut flat = RunConfig::for_variant(Variant::Cosmocore).with_seed(seed);
        flat.affect.lambda = 0.0;
        flat.sample.high_fraction = 0.0;
        let base = RunConfig::for_variant(Variant::UniformBaseline).with_seed(seed);
        let (a, b) = (run_single(&flat).unwrap(), run_single(&base).unwrap());
        ok_base &=
            a.curve == b.curve && a.final_mean_reward.to_bits() == b.final_mean_reward.to_bits();
    }
    vec![
        sub(
            "evo with evolution features off == cosmocore",
            ok_evo,
            String::new(),
        ),
        sub(
            "cosmocore with lambda=0, high_fraction=0 == uniform-baseline",
            ok_base,
            String::new(),
        ),
    ]
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 8] = [
        ("1 toy reproduction", criterion_1),
        ("2 ablation ordering", criterion_2),
        ("3 shift ordering", criterion_3),
        ("4 oracle consistency", criterion_4),
        ("5 buffer statistics", criterion_5),
        ("6 gradient and identity checks", criterion_6),
        ("7 determinism", criterion_7),
        ("8 equivalence degenerations", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let subs = run();
        let passed = subs.iter().all(|s| s.passed);
        if !passed {
            failed += 1;
        }
        println!("criterion {name}: {}", if passed { "PASS" } else { "FAIL" });
        for s in subs {
            let tag = if s.passed { "ok  " } else { "FAIL" };
            if s.detail.is_empty() {
                println!("    [{tag}] {}", s.name);
            } else {
                println!("    [{tag}] {}: {}", s.name, s.detail);
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
