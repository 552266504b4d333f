use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::affect::AffectConfig;
use crate::env::{EnvConfig, ShiftSchedule};
use crate::error::{Error, Result};
use crate::evolution::{EvoConfig, FitnessWeights};
use crate::policy::LearnConfig;
use crate::replay::SampleSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    UniformBaseline,
    Cosmocore,
    CosmocoreEvo,
}

impl Variant {
    pub const ALL: [Variant; 3] = [
        Variant::UniformBaseline,
        Variant::Cosmocore,
        Variant::CosmocoreEvo,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::UniformBaseline => "uniform-baseline",
            Variant::Cosmocore => "cosmocore",
            Variant::CosmocoreEvo => "cosmocore-evo",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "variant",
                    format!("unknown variant `{s}` (expected uniform-baseline, cosmocore or cosmocore-evo)"),
                )
            })
    }
}

/// Everything needed to reproduce one seeded run.
///
/// [`RunConfig::for_variant`] fills in the variant's defaults; after that the
/// explicit fields decide behaviour, so a variant can be turned into another
/// by editing fields alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    pub seed: u64,
    pub n_collect: u64,
    pub n_batches: u64,
    pub prune_period: u64,
    pub eval_every: u64,
    pub eval_samples: usize,
    pub capacity: usize,
    pub evolution_enabled: bool,
    pub mutation_enabled: bool,
    pub enterprise_fitness_enabled: bool,
    pub novelty_bonus_enabled: bool,
    pub env: EnvConfig,
    pub affect: AffectConfig,
    pub evo: EvoConfig,
    pub learn: LearnConfig,
    pub sample: SampleSpec,
    pub shift: ShiftSchedule,
}

impl RunConfig {
    pub fn for_variant(variant: Variant) -> Self {
        let mut cfg = RunConfig {
            variant,
            seed: 0,
            n_collect: 1000,
            n_batches: 300,
            prune_period: 50,
            eval_every: 10,
            eval_samples: 512,
            capacity: 1000,
            evolution_enabled: true,
            mutation_enabled: true,
            enterprise_fitness_enabled: true,
            novelty_bonus_enabled: true,
            env: EnvConfig::default(),
            affect: AffectConfig::default(),
            evo: EvoConfig::default(),
            learn: LearnConfig::default(),
            sample: SampleSpec::default(),
            shift: ShiftSchedule::none(),
        };
        match variant {
            Variant::UniformBaseline => {
                cfg.sample.high_fraction = 0.0;
                cfg.affect.lambda = 0.0;
                cfg.evolution_enabled = false;
            }
            Variant::Cosmocore => cfg.evolution_enabled = false,
            Variant::CosmocoreEvo => {}
        }
        cfg
    }

    /// Re-targets this config at `variant`, keeping every shared setting
    /// (sizes, sub-configs, shift) and resetting only the variant-defining
    /// fields.
    pub fn as_variant(&self, variant: Variant) -> Self {
        let defaults = RunConfig::for_variant(variant);
        let mut cfg = self.clone();
        cfg.variant = variant;
        cfg.sample.high_fraction = defaults.sample.high_fraction;
        cfg.affect.lambda = defaults.affect.lambda;
        cfg.evolution_enabled = defaults.evolution_enabled;
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.affect.validate()?;
        self.evo.validate()?;
        self.learn.validate()?;
        self.sample.validate()?;
        if self.learn.batch_size != self.sample.batch_size {
            return Err(Error::config(
                "learn.batch_size",
                "must equal sample.batch_size",
            ));
        }
        if self.prune_period == 0 {
            return Err(Error::config("prune_period", "must be at least 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be at least 1"));
        }
        if self.eval_samples == 0 {
            return Err(Error::config("eval_samples", "must be at least 1"));
        }
        if self.capacity == 0 {
            return Err(Error::config("capacity", "must be at least 1"));
        }
        if self
            .env
            .sequence_count()
            .is_none_or(|n| n > crate::env::ENUMERATION_LIMIT)
        {
            return Err(Error::config(
                "env.length",
                "action space too large for the oracle that seeds the baseline",
            ));
        }
        Ok(())
    }

    /// Mutation rate after applying the ablation flag.
    pub fn effective_mutation_rate(&self) -> f64 {
        if self.mutation_enabled {
            self.evo.mutation_rate
        } else {
            0.0
        }
    }

    pub fn effective_weights(&self) -> FitnessWeights {
        if self.enterprise_fitness_enabled {
            self.evo.weights
        } else {
            FitnessWeights::default()
        }
    }

    pub fn effective_novelty_mu(&self) -> f64 {
        if self.novelty_bonus_enabled {
            self.sample.novelty_mu
        } else {
            0.0
        }
    }

    /// The evolution settings actually handed to the evolutionary update.
    pub fn effective_evo(&self) -> EvoConfig {
        EvoConfig {
            mutation_rate: self.effective_mutation_rate(),
            weights: self.effective_weights(),
            ..self.evo.clone()
        }
    }

    pub fn effective_sample(&self) -> SampleSpec {
        SampleSpec {
            novelty_mu: self.effective_novelty_mu(),
            ..self.sample.clone()
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.n_collect + self.n_batches
    }

    /// Hex SHA-256 of the canonical JSON form of the config.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("run config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_defaults() {
        let base = RunConfig::for_variant(Variant::UniformBaseline);
        assert_eq!(base.sample.high_fraction, 0.0);
        assert_eq!(base.affect.lambda, 0.0);
        assert!(!base.evolution_enabled);

        let cc = RunConfig::for_variant(Variant::Cosmocore);
        assert_eq!(cc.sample.high_fraction, 0.8);
        assert_eq!(cc.affect.lambda, 0.6);
        assert!(!cc.evolution_enabled);

        let evo = RunConfig::for_variant(Variant::CosmocoreEvo);
        assert!(evo.evolution_enabled);
        assert_eq!(evo.evo.period, 10);
        assert_eq!(evo.evo.mutation_rate, 0.2);
        assert_eq!(
            (evo.n_collect, evo.n_batches, evo.prune_period),
            (1000, 300, 50)
        );
        assert!(evo.validate().is_ok());
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("ppo".parse::<Variant>().is_err());
    }

    #[test]
    fn ablation_flags_resolve() {
        let mut cfg = RunConfig::for_variant(Variant::CosmocoreEvo);
        cfg.evo.weights = FitnessWeights::ENTERPRISE_PRESET;
        cfg.sample.novelty_mu = 0.1;
        cfg.mutation_enabled = false;
        cfg.enterprise_fitness_enabled = false;
        cfg.novelty_bonus_enabled = false;
        assert_eq!(cfg.effective_evo().mutation_rate, 0.0);
        assert!(cfg.effective_evo().weights.is_zero());
        assert_eq!(cfg.effective_sample().novelty_mu, 0.0);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::for_variant(Variant::Cosmocore);
        let b = a.clone().with_seed(1);
        assert_eq!(a.config_hash(), a.clone().config_hash());
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash().len(), 64);
    }
}
