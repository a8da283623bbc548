use serde::{Deserialize, Serialize};

use super::TrainError;

/// Boosting hyperparameters. `lambda` and `min_split_gain` are the L2 and
/// per-leaf penalties of the regularized objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub min_split_gain: f64,
    pub max_bins: usize,
    /// GOSS share of largest-gradient rows kept outright.
    pub goss_top_rate: f64,
    /// GOSS share of rows sampled from the remainder.
    pub goss_other_rate: f64,
    pub exclusive_bundling: bool,
    pub efb_conflict_threshold: f64,
    pub classification_threshold: f64,
    pub base_score: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 5,
            lambda: 1.0,
            min_split_gain: 0.0,
            max_bins: 255,
            goss_top_rate: 0.2,
            goss_other_rate: 0.1,
            exclusive_bundling: true,
            efb_conflict_threshold: 0.0,
            classification_threshold: 0.5,
            base_score: 0.0,
            seed: 42,
        }
    }
}

fn fraction(name: &str, v: f64) -> Result<(), TrainError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(TrainError::Config(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

impl TrainingConfig {
    /// Full-data boosting: no gradient-based sampling.
    pub fn without_goss(mut self) -> Self {
        self.goss_top_rate = 1.0;
        self.goss_other_rate = 0.0;
        self
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        fraction("goss_top_rate", self.goss_top_rate)?;
        fraction("goss_other_rate", self.goss_other_rate)?;
        fraction("efb_conflict_threshold", self.efb_conflict_threshold)?;
        fraction("classification_threshold", self.classification_threshold)?;
        if self.goss_top_rate + self.goss_other_rate > 1.0 + 1e-12 {
            return Err(TrainError::Config(
                "goss_top_rate + goss_other_rate must not exceed 1".into(),
            ));
        }
        if self.goss_top_rate == 0.0 && self.goss_other_rate == 0.0 {
            return Err(TrainError::Config("GOSS would select no rows".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning_rate must be positive".into()));
        }
        if self.max_leaves < 1 || self.min_samples_leaf < 1 {
            return Err(TrainError::Config(
                "max_leaves and min_samples_leaf must be at least 1".into(),
            ));
        }
        if self.lambda < 0.0 || self.min_split_gain < 0.0 {
            return Err(TrainError::Config(
                "lambda and min_split_gain must be nonnegative".into(),
            ));
        }
        if self.max_bins < 2 {
            return Err(TrainError::Config("max_bins must be at least 2".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainingConfig::default().validate().unwrap();
        TrainingConfig::default().without_goss().validate().unwrap();
    }

    #[test]
    fn rejects_bad_fractions() {
        let c = TrainingConfig {
            goss_top_rate: 0.7,
            goss_other_rate: 0.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            efb_conflict_threshold: 1.5,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = TrainingConfig {
            learning_rate: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn parses_partial_toml() {
        let c: TrainingConfig = toml::from_str("rounds = 7\nlearning_rate = 0.3\n").unwrap();
        assert_eq!(c.rounds, 7);
        assert_eq!(c.max_leaves, 31);
        assert!(toml::from_str::<TrainingConfig>("bogus = 1").is_err());
    }
}
