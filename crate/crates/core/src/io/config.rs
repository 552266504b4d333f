//! Experiment manifests.
//!
//! A manifest is a TOML document whose settings are addressed by flat dotted
//! keys (`evo.mutation_rate = 0.3`, or the same key inside an `[evo]` table).
//! Top-level settings apply to every run; each `[[run]]` table may override
//! them. Unknown keys are errors.
//!
//! ```toml
//! schema_version = 1
//! name = "toy"
//! seeds = [0, 1, 2]
//! n_batches = 300
//!
//! [[run]]
//! name = "evo"
//! variant = "cosmocore-evo"
//! evo.mutation_rate = 0.2
//!
//! [[run]]
//! name = "baseline"
//! variant = "uniform-baseline"
//! ```

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use toml::Value;

use crate::env::{ShiftEntry, ShiftSchedule};
use crate::error::{Error, Result};
use crate::harness::{RunConfig, Variant};
use crate::policy::{PolicyContext, WeightNormalization};

pub const SCHEMA_VERSION: i64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRun {
    pub name: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentManifest {
    pub name: String,
    pub out_dir: Option<PathBuf>,
    pub schema_version: i64,
    pub runs: Vec<ManifestRun>,
}

/// Keys a run accepts, in the order they are applied.
pub const RUN_KEYS: &[&str] = &[
    "variant",
    "seed",
    "seeds",
    "n_collect",
    "n_batches",
    "prune_period",
    "eval_every",
    "eval_samples",
    "capacity",
    "batch_size",
    "evolution_enabled",
    "mutation_enabled",
    "enterprise_fitness_enabled",
    "novelty_bonus_enabled",
    "env.length",
    "env.action_max",
    "env.target",
    "env.reward_base",
    "affect.lambda",
    "affect.valence_mid",
    "affect.valence_scale",
    "affect.arousal_scale",
    "affect.prune_v_max",
    "affect.prune_a_max",
    "evo.period",
    "evo.mutation_rate",
    "evo.parent_fraction",
    "evo.alpha",
    "evo.beta",
    "evo.gamma",
    "evo.forbidden_action",
    "learn.learning_rate",
    "learn.batch_size",
    "learn.advantage_floor",
    "learn.baseline_decay",
    "learn.context",
    "learn.normalization",
    "sample.batch_size",
    "sample.high_fraction",
    "sample.top_fraction",
    "sample.novelty_mu",
    "shift",
];

const MANIFEST_KEYS: &[&str] = &["schema_version", "name", "out_dir", "run"];

pub fn load_manifest(path: &Path) -> Result<ExperimentManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, &path.display().to_string())
}

/// Parses a manifest; `source` names the document in error messages.
pub fn parse_manifest(text: &str, source: &str) -> Result<ExperimentManifest> {
    let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let line = e
            .span()
            .map(|s| text[..s.start].matches('\n').count() as u64 + 1);
        Error::parse(source, line, e.message().to_string())
    })?;

    let mut shared = BTreeMap::new();
    flatten("", &doc, &mut shared, &["run"]);

    let schema_version = match shared.remove("schema_version") {
        Some(v) => as_int("schema_version", &v)?,
        None => return Err(Error::config("schema_version", "missing (expected 1)")),
    };
    if schema_version != SCHEMA_VERSION {
        return Err(Error::config(
            "schema_version",
            format!("unsupported version {schema_version} (expected {SCHEMA_VERSION})"),
        ));
    }
    let name = match shared.remove("name") {
        Some(v) => as_str("name", &v)?.to_string(),
        None => return Err(Error::config("name", "missing experiment name")),
    };
    let out_dir = match shared.remove("out_dir") {
        Some(v) => Some(PathBuf::from(as_str("out_dir", &v)?)),
        None => None,
    };
    check_keys(&shared)?;

    let tables: Vec<&toml::Table> = match doc.get("run") {
        None => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_table()
                    .ok_or_else(|| Error::config("run", "expected [[run]] tables"))
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(Error::config("run", "expected [[run]] tables")),
    };

    let mut runs = Vec::new();
    if tables.is_empty() {
        runs.push(build_run(name.clone(), &shared, &BTreeMap::new())?);
    }
    let mut names = HashSet::new();
    for (i, table) in tables.into_iter().enumerate() {
        let mut own = BTreeMap::new();
        flatten("", table, &mut own, &[]);
        let run_name = match own.remove("name") {
            Some(v) => as_str("run.name", &v)?.to_string(),
            None => return Err(Error::config(format!("run[{i}].name"), "missing run name")),
        };
        check_keys(&own).map_err(|e| prefix_key(e, &run_name))?;
        if !names.insert(run_name.clone()) {
            return Err(Error::config(
                "run.name",
                format!("duplicate run name `{run_name}`"),
            ));
        }
        runs.push(
            build_run(run_name.clone(), &shared, &own).map_err(|e| prefix_key(e, &run_name))?,
        );
    }

    Ok(ExperimentManifest {
        name,
        out_dir,
        schema_version,
        runs,
    })
}

fn prefix_key(err: Error, run: &str) -> Error {
    match err {
        Error::InvalidConfig { key, reason } => Error::InvalidConfig {
            key,
            reason: format!("{reason} (in run `{run}`)"),
        },
        other => other,
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>, skip: &[&str]) {
    for (k, v) in table {
        if prefix.is_empty() && skip.contains(&k.as_str()) {
            continue;
        }
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            // `shift` is a list of inline tables, not a section
            Value::Table(t) if key != "shift" => flatten(&key, t, out, &[]),
            _ => {
                out.insert(key, v.clone());
            }
        }
    }
}

fn check_keys(keys: &BTreeMap<String, Value>) -> Result<()> {
    for key in keys.keys() {
        if MANIFEST_KEYS.contains(&key.as_str()) {
            return Err(Error::config(
                key.clone(),
                "only allowed at the top level of the manifest",
            ));
        }
        if !RUN_KEYS.contains(&key.as_str()) {
            return Err(Error::config(key.clone(), "unknown key"));
        }
    }
    Ok(())
}

fn build_run(
    name: String,
    shared: &BTreeMap<String, Value>,
    own: &BTreeMap<String, Value>,
) -> Result<ManifestRun> {
    let lookup = |key: &str| own.get(key).or_else(|| shared.get(key));
    let variant = match lookup("variant") {
        Some(v) => as_str("variant", v)?.parse::<Variant>()?,
        None => {
            return Err(Error::config(
                "variant",
                "missing (uniform-baseline, cosmocore or cosmocore-evo)",
            ))
        }
    };
    let mut config = RunConfig::for_variant(variant);
    let mut seeds = None;
    for key in RUN_KEYS.iter().skip(1) {
        let Some(value) = lookup(key) else { continue };
        match *key {
            "seed" => seeds = Some(vec![as_u64(key, value)?]),
            "seeds" => {
                let list = value
                    .as_array()
                    .ok_or_else(|| Error::config(*key, "expected an array of integers"))?;
                let list = list
                    .iter()
                    .map(|v| as_u64(key, v))
                    .collect::<Result<Vec<_>>>()?;
                if list.is_empty() {
                    return Err(Error::config(*key, "must list at least one seed"));
                }
                seeds = Some(list);
            }
            _ => apply_key(&mut config, key, value)?,
        }
    }
    let seeds = seeds.unwrap_or_else(|| vec![0]);
    config.seed = seeds[0];
    config.validate()?;
    Ok(ManifestRun {
        name,
        config,
        seeds,
    })
}

/// Sets one dotted `key` of `config` from a TOML value.
pub fn apply_key(config: &mut RunConfig, key: &str, value: &Value) -> Result<()> {
    match key {
        "variant" => config.variant = as_str(key, value)?.parse()?,
        "seed" => config.seed = as_u64(key, value)?,
        "n_collect" => config.n_collect = as_u64(key, value)?,
        "n_batches" => config.n_batches = as_u64(key, value)?,
        "prune_period" => config.prune_period = as_u64(key, value)?,
        "eval_every" => config.eval_every = as_u64(key, value)?,
        "eval_samples" => config.eval_samples = as_usize(key, value)?,
        "capacity" => config.capacity = as_usize(key, value)?,
        "batch_size" => {
            let n = as_usize(key, value)?;
            config.learn.batch_size = n;
            config.sample.batch_size = n;
        }
        "evolution_enabled" => config.evolution_enabled = as_bool(key, value)?,
        "mutation_enabled" => config.mutation_enabled = as_bool(key, value)?,
        "enterprise_fitness_enabled" => config.enterprise_fitness_enabled = as_bool(key, value)?,
        "novelty_bonus_enabled" => config.novelty_bonus_enabled = as_bool(key, value)?,
        "env.length" => config.env.length = as_usize(key, value)?,
        "env.action_max" => {
            config.env.action_max =
                u32::try_from(as_u64(key, value)?).map_err(|_| Error::config(key, "too large"))?
        }
        "env.target" => config.env.target = as_int(key, value)?,
        "env.reward_base" => config.env.reward_base = as_f64(key, value)?,
        "affect.lambda" => config.affect.lambda = as_f64(key, value)?,
        "affect.valence_mid" => config.affect.valence_mid = as_f64(key, value)?,
        "affect.valence_scale" => config.affect.valence_scale = as_f64(key, value)?,
        "affect.arousal_scale" => config.affect.arousal_scale = as_f64(key, value)?,
        "affect.prune_v_max" => config.affect.prune_v_max = as_f64(key, value)?,
        "affect.prune_a_max" => config.affect.prune_a_max = as_f64(key, value)?,
        "evo.period" => config.evo.period = as_u64(key, value)?,
        "evo.mutation_rate" => config.evo.mutation_rate = as_f64(key, value)?,
        "evo.parent_fraction" => config.evo.parent_fraction = as_f64(key, value)?,
        "evo.alpha" => config.evo.weights.alpha = as_f64(key, value)?,
        "evo.beta" => config.evo.weights.beta = as_f64(key, value)?,
        "evo.gamma" => config.evo.weights.gamma = as_f64(key, value)?,
        "evo.forbidden_action" => {
            config.evo.forbidden_action = match value {
                Value::String(s) if s == "none" => None,
                _ => Some(
                    u32::try_from(as_u64(key, value)?)
                        .map_err(|_| Error::config(key, "too large"))?,
                ),
            }
        }
        "learn.learning_rate" => config.learn.learning_rate = as_f64(key, value)?,
        "learn.batch_size" => config.learn.batch_size = as_usize(key, value)?,
        "learn.advantage_floor" => config.learn.advantage_floor = as_f64(key, value)?,
        "learn.baseline_decay" => config.learn.baseline_decay = as_f64(key, value)?,
        "learn.context" => {
            config.learn.context = match as_str(key, value)? {
                "position" => PolicyContext::Position,
                "prefix-sum" => PolicyContext::PrefixSum,
                other => {
                    return Err(Error::config(
                        key,
                        format!("unknown context `{other}` (expected position or prefix-sum)"),
                    ))
                }
            }
        }
        "learn.normalization" => {
            config.learn.normalization = match as_str(key, value)? {
                "sum" => WeightNormalization::Sum,
                "batch-mean" => WeightNormalization::BatchMean,
                other => {
                    return Err(Error::config(
                        key,
                        format!("unknown normalization `{other}` (expected sum or batch-mean)"),
                    ))
                }
            }
        }
        "sample.batch_size" => config.sample.batch_size = as_usize(key, value)?,
        "sample.high_fraction" => config.sample.high_fraction = as_f64(key, value)?,
        "sample.top_fraction" => config.sample.top_fraction = as_f64(key, value)?,
        "sample.novelty_mu" => config.sample.novelty_mu = as_f64(key, value)?,
        "shift" => config.shift = as_shift(key, value)?,
        _ => return Err(Error::config(key, "unknown key")),
    }
    Ok(())
}

fn as_shift(key: &str, value: &Value) -> Result<ShiftSchedule> {
    let items = value
        .as_array()
        .ok_or_else(|| Error::config(key, "expected an array of { step, target } tables"))?;
    let mut entries = Vec::with_capacity(items.len());
    for item in items {
        let t = item
            .as_table()
            .ok_or_else(|| Error::config(key, "expected an array of { step, target } tables"))?;
        if let Some(extra) = t.keys().find(|k| *k != "step" && *k != "target") {
            return Err(Error::config(format!("{key}.{extra}"), "unknown key"));
        }
        let step = t
            .get("step")
            .ok_or_else(|| Error::config("shift.step", "missing"))?;
        let target = t
            .get("target")
            .ok_or_else(|| Error::config("shift.target", "missing"))?;
        entries.push(ShiftEntry {
            activation_step: as_u64("shift.step", step)?,
            new_target: as_int("shift.target", target)?,
        });
    }
    ShiftSchedule::new(entries)
}

fn as_int(key: &str, value: &Value) -> Result<i64> {
    value.as_integer().ok_or_else(|| {
        Error::config(
            key,
            format!("expected an integer, found {}", value.type_str()),
        )
    })
}

fn as_u64(key: &str, value: &Value) -> Result<u64> {
    u64::try_from(as_int(key, value)?).map_err(|_| Error::config(key, "must not be negative"))
}

fn as_usize(key: &str, value: &Value) -> Result<usize> {
    usize::try_from(as_u64(key, value)?).map_err(|_| Error::config(key, "too large"))
}

fn as_f64(key: &str, value: &Value) -> Result<f64> {
    match value {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        other => Err(Error::config(
            key,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

fn as_bool(key: &str, value: &Value) -> Result<bool> {
    value.as_bool().ok_or_else(|| {
        Error::config(
            key,
            format!("expected true or false, found {}", value.type_str()),
        )
    })
}

fn as_str<'a>(key: &str, value: &'a Value) -> Result<&'a str> {
    value.as_str().ok_or_else(|| {
        Error::config(
            key,
            format!("expected a string, found {}", value.type_str()),
        )
    })
}
