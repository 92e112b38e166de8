//! The assembled pipeline: two frozen fine-tuned encoders, a fitted
//! feature scaler, and one trained regressor per score over the shared
//! feature vector. Training is stage-sequential; prediction is pure.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::corpus::{fit_scaler, Dataset, EssayRecord, FeatureScaler};
use crate::error::{Error, Result};
use crate::regressors::{self, RegressorKind, TrainedRegressor};
use crate::textenc::EncoderDims;

use super::finetune::{finetune_encoder, scored_examples, FinetunedEncoder};
use super::{Track1Hyper, Track1Target, TRACK1_FORMAT_VERSION};

/// The concatenated regressor input for one record: empathy-encoder
/// embedding, then distress-encoder embedding, then scaled features.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedFeatureVector {
    pub values: Vec<f64>,
    /// Segment lengths in concatenation order.
    pub layout: (usize, usize, usize),
}

/// Everything needed to score new essays: frozen encoders, the scaler,
/// and the two regressors (same kind, same hyperparameters).
#[derive(Debug, Clone)]
pub struct Track1Pipeline {
    pub empathy_encoder: FinetunedEncoder,
    pub distress_encoder: FinetunedEncoder,
    pub scaler: FeatureScaler,
    pub empathy_regressor: TrainedRegressor,
    pub distress_regressor: TrainedRegressor,
    /// Predictions are clamped to this range.
    pub score_range: (f64, f64),
}

fn feature_row(
    emp: &FinetunedEncoder,
    dis: &FinetunedEncoder,
    scaler: &FeatureScaler,
    rec: &EssayRecord,
) -> Result<SharedFeatureVector> {
    let mut values = emp.pooled(&rec.essay)?;
    let d_emp = values.len();
    let dis_pooled = dis.pooled(&rec.essay)?;
    let d_dis = dis_pooled.len();
    values.extend(dis_pooled);
    let scaled = scaler.transform(rec)?;
    let n_feat = scaled.len();
    values.extend(scaled);
    Ok(SharedFeatureVector { values, layout: (d_emp, d_dis, n_feat) })
}

/// The shared feature vector for one record. Pure: depends only on the
/// frozen encoders, the fitted scaler, and the record.
pub fn build_features(p: &Track1Pipeline, rec: &EssayRecord) -> Result<SharedFeatureVector> {
    feature_row(&p.empathy_encoder, &p.distress_encoder, &p.scaler, rec)
}

impl Track1Pipeline {
    /// Predicts both scores for a record, clamped to the score range.
    pub fn predict(&self, rec: &EssayRecord) -> Result<(f64, f64)> {
        let features = build_features(self, rec)?;
        let (lo, hi) = self.score_range;
        let empathy = self.empathy_regressor.predict(&features.values)?.clamp(lo, hi);
        let distress = self.distress_regressor.predict(&features.values)?.clamp(lo, hi);
        Ok((empathy, distress))
    }
}

/// Runs the training stages in order: fit the scaler, fine-tune one
/// encoder per score, build the shared feature matrix, then fit one
/// regressor per score with identical hyperparameters.
pub fn train_pipeline(
    train: &Dataset,
    kind: RegressorKind,
    hyper: &Track1Hyper,
) -> Result<Track1Pipeline> {
    hyper.validate()?;
    regressors::check_hyper(kind, &hyper.regressor)?;
    let y_emp: Vec<f64> = scored_examples(train, Track1Target::Empathy)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();
    let y_dis: Vec<f64> = scored_examples(train, Track1Target::Distress)?
        .into_iter()
        .map(|(_, v)| v)
        .collect();

    let scaler = fit_scaler(train, hyper.scaler.clone());
    let empathy_encoder = finetune_encoder(train, Track1Target::Empathy, hyper)?;
    let distress_encoder = finetune_encoder(train, Track1Target::Distress, hyper)?;

    let mut rows = Vec::with_capacity(train.records.len());
    for rec in &train.records {
        rows.push(feature_row(&empathy_encoder, &distress_encoder, &scaler, rec)?.values);
    }
    let width = rows[0].len();
    let mut x = Array2::zeros((rows.len(), width));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }

    let empathy_regressor = regressors::fit(kind, &x, &y_emp, &hyper.regressor)?;
    let distress_regressor = regressors::fit(kind, &x, &y_dis, &hyper.regressor)?;
    Ok(Track1Pipeline {
        empathy_encoder,
        distress_encoder,
        scaler,
        empathy_regressor,
        distress_regressor,
        score_range: hyper.score_range,
    })
}

/// Predicts (empathy, distress) for every record, in input order. `workers`
/// threads run disjoint contiguous slices; the output is identical for any
/// worker count.
pub fn predict_dataset(p: &Track1Pipeline, d: &Dataset, workers: usize) -> Result<Vec<(f64, f64)>> {
    crate::parallel::ordered_map(&d.records, workers, |rec| p.predict(rec))
}

/// Submission format: TSV without a header, one row per record, empathy
/// then distress, six decimal places.
pub fn write_score_file(rows: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (empathy, distress) in rows {
        out.push_str(&format!("{empathy:.6}\t{distress:.6}\n"));
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dims: EncoderDims,
    score_range: (f64, f64),
    empathy_train_log: Vec<f64>,
    distress_train_log: Vec<f64>,
}

const MANIFEST_FILE: &str = "manifest.json";

impl Track1Pipeline {
    /// Writes the pipeline as a directory of stage artifacts plus a
    /// manifest.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            format_version: TRACK1_FORMAT_VERSION,
            dims: self.empathy_encoder.encoder.dims,
            score_range: self.score_range,
            empathy_train_log: self.empathy_encoder.train_log.clone(),
            distress_train_log: self.distress_encoder.train_log.clone(),
        };
        fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest).expect("manifest always serializes"),
        )?;
        for (stem, enc) in
            [("empathy", &self.empathy_encoder), ("distress", &self.distress_encoder)]
        {
            enc.encoder.vocab.save(&dir.join(format!("{stem}.vocab.txt")))?;
            enc.encoder.params.save(&dir.join(format!("{stem}.params.json")))?;
        }
        fs::write(
            dir.join("scaler.json"),
            serde_json::to_string_pretty(&self.scaler).expect("scaler always serializes"),
        )?;
        self.empathy_regressor.save(&dir.join("empathy.regressor.json"))?;
        self.distress_regressor.save(&dir.join("distress.regressor.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Track1Pipeline> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        if manifest.format_version != TRACK1_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: format version {} is not supported (expected {})",
                manifest_path.display(),
                manifest.format_version,
                TRACK1_FORMAT_VERSION
            )));
        }
        let load_encoder = |stem: &str, target: Track1Target, train_log: Vec<f64>| {
            let vocab = crate::textenc::Vocab::load(&dir.join(format!("{stem}.vocab.txt")))?;
            let params =
                crate::nncore::ParameterStore::load(&dir.join(format!("{stem}.params.json")))?;
            Ok::<_, Error>(FinetunedEncoder {
                target,
                encoder: crate::textenc::EncoderModel { vocab, dims: manifest.dims, params },
                train_log,
            })
        };
        let scaler_text = fs::read_to_string(dir.join("scaler.json"))?;
        let scaler: FeatureScaler = serde_json::from_str(&scaler_text)
            .map_err(|e| Error::Format(format!("scaler.json: {e}")))?;
        Ok(Track1Pipeline {
            empathy_encoder: load_encoder(
                "empathy",
                Track1Target::Empathy,
                manifest.empathy_train_log,
            )?,
            distress_encoder: load_encoder(
                "distress",
                Track1Target::Distress,
                manifest.distress_train_log,
            )?,
            scaler,
            empathy_regressor: TrainedRegressor::load(&dir.join("empathy.regressor.json"))?,
            distress_regressor: TrainedRegressor::load(&dir.join("distress.regressor.json"))?,
            score_range: manifest.score_range,
        })
    }
}
