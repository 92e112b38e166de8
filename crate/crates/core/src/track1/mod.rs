//! Empathy and distress regression: one encoder fine-tuned per score,
//! their pooled embeddings concatenated with scaled person-level features
//! into a shared vector, and one regressor per score trained on it with
//! identical hyperparameters.

pub mod finetune;
pub mod pipeline;

use serde::{Deserialize, Serialize};

use crate::corpus::{EssayRecord, ScalerConfig, BIG_FIVE, SCORE_RANGE};
use crate::error::{Error, Result};
use crate::regressors::RegressorHyper;
use crate::textenc::EncoderDims;

pub use finetune::{finetune_encoder, FinetunedEncoder};
pub use pipeline::{
    build_features, predict_dataset, train_pipeline, write_score_file, SharedFeatureVector,
    Track1Pipeline,
};

pub const TRACK1_FORMAT_VERSION: u32 = 1;

/// Which score an encoder or regressor is responsible for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Track1Target {
    Empathy,
    Distress,
}

impl Track1Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Track1Target::Empathy => "empathy",
            Track1Target::Distress => "distress",
        }
    }

    pub fn score(self, rec: &EssayRecord) -> Option<f64> {
        match self {
            Track1Target::Empathy => rec.empathy,
            Track1Target::Distress => rec.distress,
        }
    }

    /// Mixed into the init seed so the two targets never start from the
    /// same parameters.
    pub(crate) fn seed_salt(self) -> u64 {
        match self {
            Track1Target::Empathy => 0x656d_7061,
            Track1Target::Distress => 0x6469_7374,
        }
    }
}

/// Settings for the whole pipeline: encoder fine-tuning, feature scaling,
/// and the downstream regressors.
///
/// The default encoder learning rate follows the reference fine-tuning
/// protocol; from-scratch training at this scale usually wants something
/// near 1e-3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track1Hyper {
    pub dims: EncoderDims,
    pub encoder_lr: f64,
    pub encoder_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub vocab_min_freq: usize,
    pub vocab_max_size: usize,
    /// Predictions are clamped to this range.
    pub score_range: (f64, f64),
    pub scaler: ScalerConfig,
    pub regressor: RegressorHyper,
}

impl Default for Track1Hyper {
    fn default() -> Self {
        Track1Hyper {
            dims: EncoderDims::default(),
            encoder_lr: 2e-5,
            encoder_epochs: 30,
            batch_size: 16,
            seed: 0,
            vocab_min_freq: 1,
            vocab_max_size: 4096,
            score_range: SCORE_RANGE,
            scaler: ScalerConfig::standard(&BIG_FIVE),
            regressor: RegressorHyper::default(),
        }
    }
}

impl Track1Hyper {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if !(self.encoder_lr > 0.0 && self.encoder_lr.is_finite()) {
            return Err(Error::Config(format!(
                "encoder learning rate must be positive and finite, got {}",
                self.encoder_lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let (lo, hi) = self.score_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "score range [{lo}, {hi}] is not an ordered finite interval"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_hyperparameters_are_config_errors() {
        let cases = [
            Track1Hyper { encoder_lr: 0.0, ..Track1Hyper::default() },
            Track1Hyper { encoder_lr: f64::NAN, ..Track1Hyper::default() },
            Track1Hyper { batch_size: 0, ..Track1Hyper::default() },
            Track1Hyper { score_range: (7.0, 1.0), ..Track1Hyper::default() },
        ];
        for hyper in cases {
            assert!(matches!(hyper.validate().unwrap_err(), Error::Config(_)));
        }
        assert!(Track1Hyper::default().validate().is_ok());
    }

    #[test]
    fn target_names_and_scores_line_up() {
        let rec = EssayRecord {
            essay: "text".into(),
            empathy: Some(4.5),
            distress: Some(2.5),
            ..EssayRecord::default()
        };
        assert_eq!(Track1Target::Empathy.as_str(), "empathy");
        assert_eq!(Track1Target::Distress.as_str(), "distress");
        assert_eq!(Track1Target::Empathy.score(&rec), Some(4.5));
        assert_eq!(Track1Target::Distress.score(&rec), Some(2.5));
    }
}
