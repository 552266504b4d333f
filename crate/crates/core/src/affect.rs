//! Valence/arousal tagging, replay priority and the prune predicate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affective tag of one trajectory. Values are clamped into range on
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectTag {
    valence: f64,
    arousal: f64,
}

impl AffectTag {
    pub fn new(valence: f64, arousal: f64) -> Self {
        AffectTag {
            valence: clamp_finite(valence, -1.0, 1.0),
            arousal: clamp_finite(arousal, 0.0, 1.0),
        }
    }

    pub fn valence(&self) -> f64 {
        self.valence
    }

    pub fn arousal(&self) -> f64 {
        self.arousal
    }
}

// NaN maps to 0, which lies inside both tag ranges.
fn clamp_finite(x: f64, lo: f64, hi: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectConfig {
    pub lambda: f64,
    pub valence_mid: f64,
    pub valence_scale: f64,
    pub arousal_scale: f64,
    pub prune_v_max: f64,
    pub prune_a_max: f64,
}

impl Default for AffectConfig {
    fn default() -> Self {
        AffectConfig {
            lambda: 0.6,
            valence_mid: 5.0,
            valence_scale: 5.0,
            arousal_scale: 5.0,
            prune_v_max: 0.2,
            prune_a_max: 0.3,
        }
    }
}

impl AffectConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("affect.lambda", "must be finite and >= 0"));
        }
        if !self.valence_mid.is_finite() {
            return Err(Error::config("affect.valence_mid", "must be finite"));
        }
        for (key, v) in [
            ("affect.valence_scale", self.valence_scale),
            ("affect.arousal_scale", self.arousal_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(key, "must be finite and > 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.prune_v_max) {
            return Err(Error::config("affect.prune_v_max", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.prune_a_max) {
            return Err(Error::config("affect.prune_a_max", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Something that can label a trajectory outcome with an [`AffectTag`].
///
/// The closed-form mapping on [`AffectConfig`] is the only implementation
/// shipped; a learned tagger can be dropped in through this trait.
pub trait AffectTagger {
    fn tag(&self, reward: f64, td: f64) -> AffectTag;
}

impl AffectTagger for AffectConfig {
    fn tag(&self, reward: f64, td: f64) -> AffectTag {
        tag(reward, td, self)
    }
}

/// Valence from reward relative to `valence_mid`, arousal from TD magnitude.
pub fn tag(reward: f64, td: f64, cfg: &AffectConfig) -> AffectTag {
    AffectTag::new(
        (reward - cfg.valence_mid) / cfg.valence_scale,
        td.abs() / cfg.arousal_scale,
    )
}

/// `|td| + lambda * |v| * a`
pub fn priority(td: f64, tag: AffectTag, lambda: f64) -> f64 {
    td.abs() + lambda * tag.valence.abs() * tag.arousal
}

/// Low-impact test used by the prune bin. Both comparisons are strict.
pub fn is_prunable(tag: AffectTag, cfg: &AffectConfig) -> bool {
    tag.valence.abs() < cfg.prune_v_max && tag.arousal < cfg.prune_a_max
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn tag_examples() {
        let cfg = AffectConfig::default();
        assert_eq!(tag(10.0, 0.0, &cfg), AffectTag::new(1.0, 0.0));
        assert_eq!(tag(5.0, 5.0, &cfg), AffectTag::new(0.0, 1.0));
        let t = tag(-5.0, -2.5, &cfg);
        assert_eq!(t.valence(), -1.0);
        assert_eq!(t.arousal(), 0.5);
    }

    #[test]
    fn priority_examples() {
        assert_abs_diff_eq!(
            priority(0.5, AffectTag::new(0.8, 0.9), 0.6),
            0.932,
            epsilon = 1e-12
        );
        assert_eq!(priority(0.0, AffectTag::new(0.0, 0.0), 3.0), 0.0);
        assert_abs_diff_eq!(
            priority(-2.0, AffectTag::new(-1.0, 1.0), 0.6),
            2.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn prune_examples() {
        let cfg = AffectConfig::default();
        assert!(is_prunable(AffectTag::new(0.1, 0.2), &cfg));
        assert!(!is_prunable(AffectTag::new(0.5, 0.1), &cfg));
        assert!(!is_prunable(AffectTag::new(0.2, 0.3), &cfg));
        assert!(is_prunable(AffectTag::new(-0.1, 0.0), &cfg));
    }

    #[test]
    fn clamps_non_finite() {
        let t = AffectTag::new(f64::INFINITY, f64::NEG_INFINITY);
        assert_eq!((t.valence(), t.arousal()), (1.0, 0.0));
        let t = AffectTag::new(f64::NAN, f64::NAN);
        assert!(t.valence().is_finite() && t.arousal().is_finite());
    }

    #[test]
    fn config_validation() {
        assert!(AffectConfig::default().validate().is_ok());
        let bad = AffectConfig {
            lambda: -0.1,
            ..AffectConfig::default()
        };
        assert!(
            matches!(bad.validate(), Err(Error::InvalidConfig { key, .. }) if key == "affect.lambda")
        );
        let bad = AffectConfig {
            arousal_scale: 0.0,
            ..AffectConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn tag_always_in_range(r in -1e6f64..1e6, td in -1e6f64..1e6) {
            let t = tag(r, td, &AffectConfig::default());
            prop_assert!((-1.0..=1.0).contains(&t.valence()));
            prop_assert!((0.0..=1.0).contains(&t.arousal()));
        }

        #[test]
        fn priority_monotone(td in -5.0f64..5.0, v in -1.0f64..1.0, a in 0.0f64..1.0,
                             bump in 0.0f64..1.0, lambda in 0.0f64..2.0) {
            let base = priority(td, AffectTag::new(v, a), lambda);
            prop_assert!(base >= 0.0);
            let wider_td = td.abs() + bump;
            prop_assert!(priority(wider_td, AffectTag::new(v, a), lambda) >= base);
            let wider_v = (v.abs() + bump).min(1.0);
            prop_assert!(priority(td, AffectTag::new(wider_v, a), lambda) >= base);
            prop_assert!(priority(td, AffectTag::new(v, (a + bump).min(1.0)), lambda) >= base);
        }

        #[test]
        fn zero_lambda_is_pure_td(td in -5.0f64..5.0, v in -1.0f64..1.0, a in 0.0f64..1.0) {
            prop_assert_eq!(priority(td, AffectTag::new(v, a), 0.0), td.abs());
        }

        #[test]
        fn prunable_bounds_affective_term(v in -1.0f64..1.0, a in 0.0f64..1.0, lambda in 0.0f64..2.0) {
            let cfg = AffectConfig { lambda, ..AffectConfig::default() };
            let t = AffectTag::new(v, a);
            if is_prunable(t, &cfg) {
                let affective = priority(0.0, t, lambda);
                prop_assert!(affective <= lambda * 0.2 * 0.3);
                if lambda > 0.0 {
                    prop_assert!(affective < lambda * 0.2 * 0.3);
                }
            }
        }
    }
}
