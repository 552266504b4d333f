//! Per-experiment JSON summaries.
//!
//! Shape (schema_version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "experiment": string,
//!   "kind": "run" | "reproduce",
//!   "runs": [ { "name", "variant", "seed", "config_hash", "final_mean_reward",
//!               "novelty_score", "distinct_near_optimal", "total_steps",
//!               "curve_csv", "evo_csv" } ],
//!   "variants": [ { "name", "stats" } ],
//!   "checks": [ { "name", "passed", "detail", "informational" } ],
//!   "report": object | null,
//!   "wall_clock_duration_secs": number
//! }
//! ```
//!
//! Everything except `wall_clock_duration_secs` is a function of the
//! inputs and seeds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{RunRecord, VariantStats};

use super::reproduce::Check;

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub name: String,
    pub variant: String,
    pub seed: u64,
    pub config_hash: String,
    pub final_mean_reward: f64,
    pub novelty_score: f64,
    pub distinct_near_optimal: usize,
    pub total_steps: u64,
    pub curve_csv: Option<String>,
    pub evo_csv: Option<String>,
}

impl RunEntry {
    pub fn from_record(name: &str, record: &RunRecord) -> Self {
        RunEntry {
            name: name.to_string(),
            variant: record.variant.to_string(),
            seed: record.seed,
            config_hash: record.config_hash.clone(),
            final_mean_reward: record.final_mean_reward,
            novelty_score: record.novelty_score(),
            distinct_near_optimal: record.distinct_near_optimal,
            total_steps: record.total_steps,
            curve_csv: None,
            evo_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedStats {
    pub name: String,
    pub stats: VariantStats,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub experiment: String,
    pub kind: String,
    pub runs: Vec<RunEntry>,
    pub variants: Vec<NamedStats>,
    pub checks: Vec<Check>,
    pub report: serde_json::Value,
    pub wall_clock_duration_secs: f64,
}

impl ExperimentSummary {
    pub fn new(experiment: &str, kind: &str) -> Self {
        ExperimentSummary {
            schema_version: SUMMARY_SCHEMA_VERSION,
            experiment: experiment.to_string(),
            kind: kind.to_string(),
            runs: Vec::new(),
            variants: Vec::new(),
            checks: Vec::new(),
            report: serde_json::Value::Null,
            wall_clock_duration_secs: 0.0,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }
}

/// Checks that `value` has the documented schema_version 1 shape.
pub fn validate_summary(value: &serde_json::Value) -> Result<()> {
    let bad = |what: &str| Error::parse("summary.json", None, what.to_string());
    let obj = value
        .as_object()
        .ok_or_else(|| bad("top level must be an object"))?;
    if obj.get("schema_version").and_then(|v| v.as_u64()) != Some(u64::from(SUMMARY_SCHEMA_VERSION))
    {
        return Err(bad("schema_version must be 1"));
    }
    for key in ["experiment", "kind"] {
        if !obj.get(key).is_some_and(|v| v.is_string()) {
            return Err(bad(&format!("`{key}` must be a string")));
        }
    }
    if !obj
        .get("wall_clock_duration_secs")
        .is_some_and(|v| v.is_number())
    {
        return Err(bad("`wall_clock_duration_secs` must be a number"));
    }
    let runs = obj
        .get("runs")
        .and_then(|v| v.as_array())
        .ok_or_else(|| bad("`runs` must be an array"))?;
    for run in runs {
        serde_json::from_value::<RunEntry>(run.clone())
            .map_err(|e| bad(&format!("bad run entry: {e}")))?;
    }
    for key in ["variants", "checks"] {
        if !obj.get(key).is_some_and(|v| v.is_array()) {
            return Err(bad(&format!("`{key}` must be an array")));
        }
    }
    for check in obj["checks"].as_array().into_iter().flatten() {
        let ok = check.get("name").is_some_and(|v| v.is_string())
            && check.get("passed").is_some_and(|v| v.is_boolean());
        if !ok {
            return Err(bad("checks need `name` and `passed`"));
        }
    }
    if !obj.contains_key("report") {
        return Err(bad("`report` is required (may be null)"));
    }
    Ok(())
}
