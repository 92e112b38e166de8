//! Interchangeable regression backends over fixed feature vectors.
//!
//! Four kinds share one fit/predict contract: a feed-forward network, a
//! linear epsilon-insensitive SVR, AdaBoost.R2 over stumps, and
//! gradient-boosted trees. Fitted models serialize to version-stamped
//! JSON files that embed the kind tag and the hyperparameters used.

pub mod adaboost;
pub mod gbt;
pub mod mlp;
pub mod svr;

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adaboost::{fit_adaboost, AdaBoostFit, AdaBoostModel, Stump};
pub use gbt::{fit_gbt, GbtFit, GbtModel, TreeNode};
pub use mlp::{fit_mlp, DenseLayer, MlpFit, MlpModel};
pub use svr::{fit_svr, svr_objective, SvrFit, SvrModel};

pub const REGRESSOR_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegressorKind {
    Mlp,
    Svr,
    AdaBoost,
    Gbt,
}

pub const ALL_REGRESSOR_KINDS: [RegressorKind; 4] =
    [RegressorKind::Mlp, RegressorKind::Svr, RegressorKind::AdaBoost, RegressorKind::Gbt];

impl RegressorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegressorKind::Mlp => "mlp",
            RegressorKind::Svr => "svr",
            RegressorKind::AdaBoost => "adaboost",
            RegressorKind::Gbt => "gbt",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(RegressorKind::Mlp),
            "svr" => Ok(RegressorKind::Svr),
            "adaboost" => Ok(RegressorKind::AdaBoost),
            "gbt" => Ok(RegressorKind::Gbt),
            other => Err(Error::Config(format!(
                "unknown regressor kind {other:?} (expected mlp, svr, adaboost, or gbt)"
            ))),
        }
    }
}

/// Hyperparameters for every kind, flat so one config file covers them all.
/// Fields outside the active kind are carried along but ignored by `fit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorHyper {
    pub seed: u64,
    pub mlp_hidden: Vec<usize>,
    pub mlp_lr: f64,
    pub mlp_epochs: usize,
    pub svr_epsilon: f64,
    pub svr_c: f64,
    pub svr_lr: f64,
    pub svr_steps: usize,
    pub boost_rounds: usize,
    pub gbt_trees: usize,
    pub gbt_depth: usize,
    pub gbt_shrinkage: f64,
}

impl Default for RegressorHyper {
    fn default() -> Self {
        RegressorHyper {
            seed: 0,
            mlp_hidden: vec![64, 32],
            mlp_lr: 1e-3,
            mlp_epochs: 200,
            svr_epsilon: 0.1,
            svr_c: 1.0,
            svr_lr: 1e-3,
            svr_steps: 5000,
            boost_rounds: 50,
            gbt_trees: 50,
            gbt_depth: 3,
            gbt_shrinkage: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RegressorModel {
    #[serde(rename = "mlp")]
    Mlp(MlpModel),
    #[serde(rename = "svr")]
    Svr(SvrModel),
    #[serde(rename = "adaboost")]
    AdaBoost(AdaBoostModel),
    #[serde(rename = "gbt")]
    Gbt(GbtModel),
}

impl RegressorModel {
    pub fn kind(&self) -> RegressorKind {
        match self {
            RegressorModel::Mlp(_) => RegressorKind::Mlp,
            RegressorModel::Svr(_) => RegressorKind::Svr,
            RegressorModel::AdaBoost(_) => RegressorKind::AdaBoost,
            RegressorModel::Gbt(_) => RegressorKind::Gbt,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegressorModel::Mlp(m) => m.dim,
            RegressorModel::Svr(m) => m.dim,
            RegressorModel::AdaBoost(m) => m.dim,
            RegressorModel::Gbt(m) => m.dim,
        }
    }
}

/// A fitted regressor together with the settings that produced it and a
/// per-iteration training trace (RMSE for mlp, objective for svr, average
/// round loss for adaboost, SSE for gbt).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedRegressor {
    pub hyper: RegressorHyper,
    pub model: RegressorModel,
    pub train_log: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    trained: TrainedRegressor,
}

impl TrainedRegressor {
    pub fn kind(&self) -> RegressorKind {
        self.model.kind()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let dim = self.model.dim();
        if x.len() != dim {
            return Err(Error::Argument(format!(
                "feature vector has length {} but the model was fit on {dim}",
                x.len()
            )));
        }
        Ok(match &self.model {
            RegressorModel::Mlp(m) => m.predict(x),
            RegressorModel::Svr(m) => m.predict(x),
            RegressorModel::AdaBoost(m) => m.predict(x),
            RegressorModel::Gbt(m) => m.predict(x),
        })
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile { format_version: REGRESSOR_FORMAT_VERSION, trained: self.clone() };
        serde_json::to_string_pretty(&file).expect("regressor models always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)
            .map_err(|e| Error::Format(format!("unreadable regressor file: {e}")))?;
        if file.format_version != REGRESSOR_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "regressor file format version {} is not supported (expected {})",
                file.format_version, REGRESSOR_FORMAT_VERSION
            )));
        }
        Ok(file.trained)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

fn check_inputs(x: &Array2<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Argument(format!(
            "feature matrix has {} rows but {} targets were given",
            x.nrows(),
            y.len()
        )));
    }
    if y.len() < 2 {
        return Err(Error::Argument(format!("need at least 2 training rows, got {}", y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("feature matrix contains a non-finite value".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Argument("target vector contains a non-finite value".into()));
    }
    Ok(())
}

pub(crate) fn check_hyper(kind: RegressorKind, hyper: &RegressorHyper) -> Result<()> {
    let bad = |msg: String| Err(Error::Config(msg));
    match kind {
        RegressorKind::Mlp => {
            if !(hyper.mlp_lr > 0.0 && hyper.mlp_lr.is_finite()) {
                return bad(format!("mlp_lr must be positive and finite, got {}", hyper.mlp_lr));
            }
            if hyper.mlp_epochs == 0 {
                return bad("mlp_epochs must be at least 1".into());
            }
            if hyper.mlp_hidden.iter().any(|&w| w == 0) {
                return bad("mlp_hidden widths must all be at least 1".into());
            }
        }
        RegressorKind::Svr => {
            if !(hyper.svr_epsilon >= 0.0 && hyper.svr_epsilon.is_finite()) {
                return bad(format!(
                    "svr_epsilon must be nonnegative and finite, got {}",
                    hyper.svr_epsilon
                ));
            }
            if !(hyper.svr_c > 0.0 && hyper.svr_c.is_finite()) {
                return bad(format!("svr_c must be positive and finite, got {}", hyper.svr_c));
            }
            if !(hyper.svr_lr > 0.0 && hyper.svr_lr.is_finite()) {
                return bad(format!("svr_lr must be positive and finite, got {}", hyper.svr_lr));
            }
            if hyper.svr_steps == 0 {
                return bad("svr_steps must be at least 1".into());
            }
        }
        RegressorKind::AdaBoost => {
            if hyper.boost_rounds == 0 {
                return bad("boost_rounds must be at least 1".into());
            }
        }
        RegressorKind::Gbt => {
            if hyper.gbt_depth == 0 {
                return bad("gbt_depth must be at least 1".into());
            }
            if !(hyper.gbt_shrinkage > 0.0 && hyper.gbt_shrinkage <= 1.0) {
                return bad(format!(
                    "gbt_shrinkage must lie in (0, 1], got {}",
                    hyper.gbt_shrinkage
                ));
            }
        }
    }
    Ok(())
}

/// Fit the chosen kind on rows of `x` against `y`.
pub fn fit(
    kind: RegressorKind,
    x: &Array2<f64>,
    y: &[f64],
    hyper: &RegressorHyper,
) -> Result<TrainedRegressor> {
    check_inputs(x, y)?;
    check_hyper(kind, hyper)?;
    let (model, train_log) = match kind {
        RegressorKind::Mlp => {
            let fit =
                fit_mlp(x, y, &hyper.mlp_hidden, hyper.mlp_lr, hyper.mlp_epochs, hyper.seed)?;
            (RegressorModel::Mlp(fit.model), fit.train_log)
        }
        RegressorKind::Svr => {
            let fit = fit_svr(x, y, hyper.svr_epsilon, hyper.svr_c, hyper.svr_lr, hyper.svr_steps);
            (RegressorModel::Svr(fit.model), fit.objective_log)
        }
        RegressorKind::AdaBoost => {
            let fit = fit_adaboost(x, y, hyper.boost_rounds)?;
            (RegressorModel::AdaBoost(fit.model), fit.loss_log)
        }
        RegressorKind::Gbt => {
            let fit = fit_gbt(x, y, hyper.gbt_trees, hyper.gbt_depth, hyper.gbt_shrinkage);
            (RegressorModel::Gbt(fit.model), fit.sse_log)
        }
    };
    Ok(TrainedRegressor { hyper: hyper.clone(), model, train_log })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> (Array2<f64>, Vec<f64>) {
        let rows: Vec<[f64; 3]> = (0..24)
            .map(|i| {
                let a = (i % 6) as f64 / 5.0;
                let b = ((i * 5) % 24) as f64 / 23.0;
                let c = ((i * 11) % 24) as f64 / 23.0;
                [a, b, c]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.5 * r[0] - 0.8 * r[1] + 0.3 * r[2]).collect();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        (Array2::from_shape_vec((24, 3), flat).unwrap(), y)
    }

    fn small_hyper() -> RegressorHyper {
        RegressorHyper {
            mlp_hidden: vec![8],
            mlp_epochs: 150,
            mlp_lr: 0.02,
            svr_steps: 800,
            svr_lr: 0.01,
            boost_rounds: 20,
            gbt_trees: 20,
            ..RegressorHyper::default()
        }
    }

    #[test]
    fn all_kinds_share_the_fit_predict_contract() {
        let (x, y) = fixture();
        let hyper = small_hyper();
        for kind in ALL_REGRESSOR_KINDS {
            let trained = fit(kind, &x, &y, &hyper).unwrap();
            assert_eq!(trained.kind(), kind);
            assert!(!trained.train_log.is_empty(), "{kind:?} left no training trace");
            let pred = trained.predict(&[0.5, 0.5, 0.5]).unwrap();
            assert!(pred.is_finite());
            assert!(
                trained.predict(&[0.5, 0.5]).is_err(),
                "{kind:?} accepted a short feature vector"
            );
        }
    }

    #[test]
    fn serialization_round_trips_to_identical_predictions() {
        let (x, y) = fixture();
        let hyper = small_hyper();
        let probes: Vec<Vec<f64>> =
            (0..5).map(|i| vec![i as f64 / 4.0, 1.0 - i as f64 / 4.0, 0.2]).collect();
        for kind in ALL_REGRESSOR_KINDS {
            let trained = fit(kind, &x, &y, &hyper).unwrap();
            let restored = TrainedRegressor::from_json(&trained.to_json()).unwrap();
            assert_eq!(restored, trained);
            for p in &probes {
                let a = trained.predict(p).unwrap();
                let b = restored.predict(p).unwrap();
                assert_eq!(a.to_bits(), b.to_bits(), "{kind:?} drifted through JSON");
            }
        }
    }

    #[test]
    fn save_and_load_round_trip_on_disk() {
        let (x, y) = fixture();
        let trained = fit(RegressorKind::Gbt, &x, &y, &small_hyper()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        trained.save(&path).unwrap();
        assert_eq!(TrainedRegressor::load(&path).unwrap(), trained);
    }

    #[test]
    fn version_mismatch_is_a_format_error() {
        let (x, y) = fixture();
        let trained = fit(RegressorKind::Svr, &x, &y, &small_hyper()).unwrap();
        let bumped = trained.to_json().replace("\"format_version\": 1", "\"format_version\": 99");
        let err = TrainedRegressor::from_json(&bumped).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "got {err:?}");
    }

    #[test]
    fn degenerate_hyperparameters_are_config_errors() {
        let (x, y) = fixture();
        let cases: Vec<(RegressorKind, RegressorHyper)> = vec![
            (RegressorKind::AdaBoost, RegressorHyper { boost_rounds: 0, ..Default::default() }),
            (RegressorKind::Svr, RegressorHyper { svr_epsilon: -0.1, ..Default::default() }),
            (RegressorKind::Svr, RegressorHyper { svr_lr: 0.0, ..Default::default() }),
            (RegressorKind::Gbt, RegressorHyper { gbt_depth: 0, ..Default::default() }),
            (RegressorKind::Gbt, RegressorHyper { gbt_shrinkage: 1.5, ..Default::default() }),
            (RegressorKind::Mlp, RegressorHyper { mlp_lr: -1.0, ..Default::default() }),
            (RegressorKind::Mlp, RegressorHyper { mlp_epochs: 0, ..Default::default() }),
        ];
        for (kind, hyper) in cases {
            let err = fit(kind, &x, &y, &hyper).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{kind:?} gave {err:?}");
        }
    }

    #[test]
    fn malformed_inputs_are_argument_errors() {
        let (x, y) = fixture();
        let hyper = RegressorHyper::default();
        let short = &y[..x.nrows() - 1];
        assert!(matches!(
            fit(RegressorKind::Gbt, &x, short, &hyper).unwrap_err(),
            Error::Argument(_)
        ));
        let one = Array2::from_shape_vec((1, 3), vec![0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            fit(RegressorKind::Gbt, &one, &[1.0], &hyper).unwrap_err(),
            Error::Argument(_)
        ));
        let mut bad = x.clone();
        bad[[0, 0]] = f64::NAN;
        assert!(matches!(
            fit(RegressorKind::Svr, &bad, &y, &hyper).unwrap_err(),
            Error::Argument(_)
        ));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in ALL_REGRESSOR_KINDS {
            assert_eq!(RegressorKind::from_str(kind.as_str()).unwrap(), kind);
        }
        assert!(matches!(RegressorKind::from_str("xgboost"), Err(Error::Config(_))));
    }

    #[test]
    fn gbt_zero_trees_is_allowed_and_predicts_the_mean() {
        let (x, y) = fixture();
        let hyper = RegressorHyper { gbt_trees: 0, ..Default::default() };
        let trained = fit(RegressorKind::Gbt, &x, &y, &hyper).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        assert_eq!(trained.predict(&[0.1, 0.2, 0.3]).unwrap(), mean);
    }
}
