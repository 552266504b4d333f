use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dream_evo::env::{self, EnvConfig};
use dream_evo::harness::{run_configs_with, run_single_with, RunOptions, VariantStats};
use dream_evo::io::summary::NamedStats;
use dream_evo::io::{
    self, load_manifest, read_curve_csv, render_curve_csv, render_evo_csv, render_svg, write_file,
    ExperimentId, ExperimentSummary, RunEntry, Series,
};
use dream_evo::{Error, Result};

const JOBS_ENV: &str = "COSMO_EVO_JOBS";

#[derive(Parser)]
#[command(
    name = "dream-evo",
    version,
    about = "Affective dream replay with evolutionary trajectory updates on a toy synthesis task"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment in a manifest and write curves plus a summary.
    Run(RunArgs),
    /// Run a bundled canonical experiment and compare with reference values.
    Reproduce(ReproduceArgs),
    /// Plot one or more curve CSVs into an SVG.
    Plot(PlotArgs),
    /// Print exact random-policy statistics of the task as JSON.
    Oracle(OracleArgs),
    /// Run one config and print the final replay buffer as JSON.
    DumpBuffer(DumpBufferArgs),
}

#[derive(Args)]
struct Parallel {
    /// Seeds: a list (`0,3,7`) or a half-open range (`0..20`).
    #[arg(long)]
    seeds: Option<String>,
    /// Runs executed in parallel (falls back to COSMO_EVO_JOBS, then the
    /// number of CPUs).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment manifest (TOML, flat dotted keys).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the manifest's `out_dir`, then
    /// `results/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    parallel: Parallel,
    /// Also write each run's final buffer as JSON.
    #[arg(long)]
    dump_buffer: bool,
    /// Also write each run's logits at every evaluation as JSON.
    #[arg(long)]
    dump_logits: bool,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of toy-table, ablations, shift, sweep.
    experiment: String,
    /// Output directory (defaults to `results/<experiment>`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    parallel: Parallel,
    /// Exit with status 1 when a pass/fail check fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct PlotArgs {
    /// Curve CSV files; each becomes one labelled band.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// Manifest whose first run supplies the task settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    length: Option<usize>,
    #[arg(long)]
    action_max: Option<u32>,
    #[arg(long)]
    target: Option<i64>,
    #[arg(long)]
    reward_base: Option<f64>,
    /// Also estimate the random-policy mean from this many samples.
    #[arg(long)]
    monte_carlo: Option<u64>,
    /// Seed for the Monte Carlo estimate.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DumpBufferArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run name inside the manifest (defaults to the first run).
    #[arg(long)]
    run: Option<String>,
    /// Seed (defaults to the run's first seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Write to this file instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Reproduce(a) => cmd_reproduce(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::DumpBuffer(a) => cmd_dump_buffer(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let bad = || {
        Error::config(
            "seeds",
            format!("cannot parse `{spec}` (use `0,1,2` or `0..20`)"),
        )
    };
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        (a..b).collect()
    } else {
        spec.split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::config("seeds", "no seeds selected"));
    }
    Ok(seeds)
}

fn resolve_jobs(flag: Option<usize>) -> Result<usize> {
    let jobs = match flag {
        Some(j) => j,
        None => match std::env::var(JOBS_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| Error::config(JOBS_ENV, format!("`{v}` is not a positive integer")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        },
    };
    if jobs == 0 {
        return Err(Error::config("jobs", "must be at least 1"));
    }
    Ok(jobs)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    write_file(path, &text)
}

fn cmd_run(args: RunArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let manifest = load_manifest(&args.config)?;
    let seed_override = args
        .parallel
        .seeds
        .as_deref()
        .map(parse_seeds)
        .transpose()?;
    let jobs = resolve_jobs(args.parallel.jobs)?;
    let out = args
        .out
        .or_else(|| manifest.out_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(&manifest.name));

    let mut jobs_list = Vec::new();
    for run in &manifest.runs {
        let seeds = seed_override.clone().unwrap_or_else(|| run.seeds.clone());
        for seed in seeds {
            jobs_list.push((run.name.clone(), run.config.clone().with_seed(seed)));
        }
    }
    let configs: Vec<_> = jobs_list.iter().map(|(_, c)| c.clone()).collect();
    let options = RunOptions {
        capture_logits: args.dump_logits,
        capture_buffer: args.dump_buffer,
    };
    let records = run_configs_with(&configs, options, jobs)?;

    let mut summary = ExperimentSummary::new(&manifest.name, "run");
    for ((name, cfg), record) in jobs_list.iter().zip(&records) {
        let stem = format!("seed-{}", record.seed);
        let curve_rel = format!("{name}/{stem}.csv");
        write_file(&out.join(&curve_rel), &render_curve_csv(&record.curve)?)?;
        let mut entry = RunEntry::from_record(name, record);
        entry.curve_csv = Some(curve_rel);
        if cfg.evolution_enabled {
            let evo_rel = format!("{name}/{stem}.evo.csv");
            write_file(&out.join(&evo_rel), &render_evo_csv(&record.evo_log)?)?;
            entry.evo_csv = Some(evo_rel);
        }
        if let Some(buffer) = &record.buffer {
            write_json(&out.join(format!("{name}/{stem}.buffer.json")), buffer)?;
        }
        if let Some(logits) = &record.logits {
            write_json(&out.join(format!("{name}/{stem}.logits.json")), logits)?;
        }
        summary.runs.push(entry);
    }

    println!(
        "{:<20} {:>6} {:>14} {:>9}",
        "run", "seed", "final reward", "novelty"
    );
    for e in &summary.runs {
        println!(
            "{:<20} {:>6} {:>14.3} {:>9.3}",
            e.name, e.seed, e.final_mean_reward, e.novelty_score
        );
    }
    for run in &manifest.runs {
        let mine: Vec<_> = jobs_list
            .iter()
            .zip(&records)
            .filter(|((n, _), _)| *n == run.name)
            .map(|(_, r)| r.clone())
            .collect();
        if mine.len() >= 2 {
            let stats = VariantStats::from_records(run.config.variant, &mine);
            println!(
                "{:<20} mean {:.3} ± {:.3} over {} seeds",
                run.name,
                stats.mean,
                stats.std,
                mine.len()
            );
            summary.variants.push(NamedStats {
                name: run.name.clone(),
                stats,
            });
        }
    }
    summary.wall_clock_duration_secs = started.elapsed().as_secs_f64();
    write_file(&out.join("summary.json"), &summary.to_json())?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_reproduce(args: ReproduceArgs) -> Result<ExitCode> {
    let started = Instant::now();
    let id: ExperimentId = args.experiment.parse()?;
    let seeds = args
        .parallel
        .seeds
        .as_deref()
        .map(parse_seeds)
        .transpose()?;
    let jobs = resolve_jobs(args.parallel.jobs)?;
    let out = args
        .out
        .unwrap_or_else(|| Path::new("results").join(id.as_str()));

    let repro = io::reproduce(id, seeds, jobs)?;
    println!("{} over {} seeds\n", id.as_str(), repro.seeds.len());
    print!("{}", repro.table);
    println!();
    print!("{}", repro.render_checks());

    let mut series = Vec::new();
    for (label, curve) in &repro.curves {
        write_file(&out.join(format!("{label}.csv")), &render_curve_csv(curve)?)?;
        series.push(Series {
            label: label.clone(),
            points: curve.clone(),
        });
    }
    if !series.is_empty() {
        write_file(
            &out.join(format!("{}.svg", id.as_str())),
            &render_svg(&series)?,
        )?;
    }
    let mut summary = ExperimentSummary::new(id.as_str(), "reproduce");
    summary.checks = repro.checks.clone();
    summary.report = repro.report.clone();
    summary.wall_clock_duration_secs = started.elapsed().as_secs_f64();
    write_file(&out.join("summary.json"), &summary.to_json())?;
    println!("\nwrote {}", out.display());

    if args.strict && !repro.all_passed() {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(args: PlotArgs) -> Result<ExitCode> {
    let mut series = Vec::new();
    for path in &args.csv {
        let points = read_curve_csv(path)?;
        if points.is_empty() {
            return Err(Error::parse(
                path.display().to_string(),
                Some(2),
                "no data rows after the header",
            ));
        }
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        series.push(Series { label, points });
    }
    write_file(&args.out, &render_svg(&series)?)?;
    println!("wrote {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(args: OracleArgs) -> Result<ExitCode> {
    let mut cfg = match &args.config {
        Some(path) => load_manifest(path)?
            .runs
            .first()
            .map(|r| r.config.env.clone())
            .unwrap_or_default(),
        None => EnvConfig::default(),
    };
    if let Some(v) = args.length {
        cfg.length = v;
    }
    if let Some(v) = args.action_max {
        cfg.action_max = v;
    }
    if let Some(v) = args.target {
        cfg.target = v;
    }
    if let Some(v) = args.reward_base {
        cfg.reward_base = v;
    }
    let report = env::oracle_enumerate(&cfg)?;
    let mut value = serde_json::to_value(&report).expect("report serializes");
    if let Some(n) = args.monte_carlo {
        if n == 0 {
            return Err(Error::config("monte-carlo", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        let mc = env::monte_carlo_random(&cfg, n, &mut rng);
        value["monte_carlo"] = serde_json::to_value(mc).expect("estimate serializes");
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&value).expect("json renders")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump_buffer(args: DumpBufferArgs) -> Result<ExitCode> {
    let manifest = load_manifest(&args.config)?;
    let run = match &args.run {
        Some(name) => manifest
            .runs
            .iter()
            .find(|r| &r.name == name)
            .ok_or_else(|| {
                Error::config("run", format!("no run named `{name}` in the manifest"))
            })?,
        None => &manifest.runs[0],
    };
    let seed = args.seed.unwrap_or(run.seeds[0]);
    let record = run_single_with(
        &run.config.clone().with_seed(seed),
        RunOptions {
            capture_buffer: true,
            capture_logits: false,
        },
    )?;
    let buffer = record.buffer.expect("buffer was captured");
    match &args.out {
        Some(path) => {
            write_json(path, &buffer)?;
            println!("wrote {}", path.display());
        }
        None => {
            let text = serde_json::to_string_pretty(&buffer).expect("buffer serializes");
            // a closed pipe (e.g. `| head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{text}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
