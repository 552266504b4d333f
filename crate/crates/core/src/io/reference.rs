//! Bundled reference values for `reproduce`, loaded from
//! `data/reference.toml`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUNDLED: &str = include_str!("../../data/reference.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedVariant {
    pub variant: String,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTableReference {
    pub seeds: usize,
    pub published: Vec<PublishedVariant>,
    pub baseline_band: [f64; 2],
    pub cosmocore_min_gain: f64,
    pub evo_min: f64,
    pub evo_min_gain_over_cosmocore: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedAblation {
    pub row: String,
    pub pass_at_1: f64,
    pub novelty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReference {
    pub seeds: usize,
    pub shift_step: u64,
    pub shift_target: i64,
    pub largest_drop_min_seeds: usize,
    pub published: Vec<PublishedAblation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedAdaptation {
    pub variant: String,
    pub adaptation_steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReference {
    pub seeds: usize,
    pub shift_step: u64,
    pub shift_target: i64,
    pub published: Vec<PublishedAdaptation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReference {
    pub seeds: usize,
    pub rates: Vec<f64>,
    pub expected_best: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub toy_table: ToyTableReference,
    pub ablations: AblationReference,
    pub shift: ShiftReference,
    pub sweep: SweepReference,
}

impl ReferenceValues {
    pub fn bundled() -> Result<Self> {
        toml::from_str(BUNDLED)
            .map_err(|e| Error::parse("data/reference.toml", None, e.message().to_string()))
    }

    pub fn published_mean(&self, variant: &str) -> Option<&PublishedVariant> {
        self.toy_table
            .published
            .iter()
            .find(|p| p.variant == variant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_loads() {
        let r = ReferenceValues::bundled().unwrap();
        assert_eq!(r.toy_table.seeds, 20);
        assert_eq!(r.published_mean("cosmocore-evo").unwrap().mean, 9.79);
        assert_eq!(r.ablations.published.len(), 4);
        assert_eq!(r.sweep.rates, vec![0.0, 0.1, 0.2, 0.4, 0.8]);
        assert_eq!((r.shift.shift_step, r.shift.shift_target), (650, 10));
    }
}
