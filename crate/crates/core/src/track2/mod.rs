//! Emotion prediction over essays, two ways: an encoder-decoder that
//! generates the label as a two-token sequence under constrained decoding,
//! and an encoder-plus-linear-head classifier baseline. Both train on the
//! same labeled datasets and expose one predict contract, so evaluation
//! code can treat them interchangeably.

pub mod classifier;
pub mod generator;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::nncore::ParameterStore;
use crate::textenc::{EncoderDims, Seq2SeqModel, Vocab, EMOTION_LABELS};

pub use classifier::{
    per_label_bce_loss, softmax_ce_loss, train_classifier, ClsEmotionModel, ClsLossMode,
};
pub use generator::{staged_finetune, train_generator, GenEmotionModel};

pub const TRACK2_FORMAT_VERSION: u32 = 1;

/// Training settings shared by the generator and the classifier.
///
/// The default learning rate follows the reference fine-tuning protocol;
/// from-scratch training at this scale usually wants something near 1e-3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track2Hyper {
    pub dims: EncoderDims,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub vocab_min_freq: usize,
    pub vocab_max_size: usize,
    /// Stage-one evaluations without improvement before stopping.
    pub patience: usize,
    /// Fraction of the auxiliary corpus held out to drive the patience rule.
    pub stage1_valid_ratio: f64,
    pub stage1_max_epochs: usize,
}

impl Default for Track2Hyper {
    fn default() -> Self {
        Track2Hyper {
            dims: EncoderDims::default(),
            lr: 2e-5,
            epochs: 30,
            batch_size: 16,
            seed: 0,
            vocab_min_freq: 1,
            vocab_max_size: 4096,
            patience: 3,
            stage1_valid_ratio: 0.15,
            stage1_max_epochs: 50,
        }
    }
}

impl Track2Hyper {
    pub fn validate(&self) -> Result<()> {
        self.dims.validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if !(self.stage1_valid_ratio > 0.0 && self.stage1_valid_ratio < 1.0) {
            return Err(Error::Config(format!(
                "stage1_valid_ratio must lie in (0, 1), got {}",
                self.stage1_valid_ratio
            )));
        }
        Ok(())
    }
}

/// Pulls (essay, label) pairs out of a dataset, rejecting records without
/// a label or with a label outside the seven-emotion set.
pub(crate) fn labeled_examples(d: &Dataset) -> Result<Vec<(&str, &str)>> {
    if d.records.is_empty() {
        return Err(Error::Data(format!("dataset \"{}\" has no records", d.provenance)));
    }
    let mut examples = Vec::with_capacity(d.records.len());
    let mut problems = Vec::new();
    for (i, rec) in d.records.iter().enumerate() {
        match rec.emotion.as_deref() {
            None => problems.push(format!("record {}: no emotion label", i + 1)),
            Some(label) if !EMOTION_LABELS.contains(&label) => {
                problems.push(format!("record {}: label {label:?} is not a known emotion", i + 1))
            }
            Some(label) => examples.push((rec.essay.as_str(), label)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Data(format!(
            "dataset \"{}\": {} unusable record(s):\n  {}",
            d.provenance,
            problems.len(),
            problems.join("\n  ")
        )));
    }
    Ok(examples)
}

/// A trained emotion model of either kind, as stored on disk.
#[derive(Debug, Clone)]
pub enum Track2Model {
    Generation(GenEmotionModel),
    Classifier(ClsEmotionModel),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestBody {
    Generation { provenance: Vec<String>, train_log: Vec<f64> },
    Classifier { mode: ClsLossMode, train_log: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    dims: EncoderDims,
    #[serde(flatten)]
    body: ManifestBody,
}

const MANIFEST_FILE: &str = "manifest.json";
const VOCAB_FILE: &str = "vocab.txt";
const PARAMS_FILE: &str = "params.json";

impl Track2Model {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Track2Model::Generation(_) => "generation",
            Track2Model::Classifier(_) => "classifier",
        }
    }

    pub fn predict(&self, essay: &str) -> Result<String> {
        match self {
            Track2Model::Generation(m) => m.predict(essay),
            Track2Model::Classifier(m) => m.predict(essay),
        }
    }

    /// Writes the model as a directory: manifest, vocabulary, parameters.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let (dims, vocab, params, body) = match self {
            Track2Model::Generation(m) => (
                m.model.dims,
                &m.model.vocab,
                &m.model.params,
                ManifestBody::Generation {
                    provenance: m.provenance.clone(),
                    train_log: m.train_log.clone(),
                },
            ),
            Track2Model::Classifier(m) => (
                m.encoder.dims,
                &m.encoder.vocab,
                &m.encoder.params,
                ManifestBody::Classifier { mode: m.mode, train_log: m.train_log.clone() },
            ),
        };
        let manifest = Manifest { format_version: TRACK2_FORMAT_VERSION, dims, body };
        fs::write(
            dir.join(MANIFEST_FILE),
            serde_json::to_string_pretty(&manifest).expect("manifest always serializes"),
        )?;
        vocab.save(&dir.join(VOCAB_FILE))?;
        params.save(&dir.join(PARAMS_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Track2Model> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&manifest_path)?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", manifest_path.display())))?;
        if manifest.format_version != TRACK2_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: format version {} is not supported (expected {})",
                manifest_path.display(),
                manifest.format_version,
                TRACK2_FORMAT_VERSION
            )));
        }
        let vocab = Vocab::load(&dir.join(VOCAB_FILE))?;
        let params = ParameterStore::load(&dir.join(PARAMS_FILE))?;
        Ok(match manifest.body {
            ManifestBody::Generation { provenance, train_log } => {
                Track2Model::Generation(GenEmotionModel {
                    model: Seq2SeqModel { vocab, dims: manifest.dims, params },
                    provenance,
                    train_log,
                })
            }
            ManifestBody::Classifier { mode, train_log } => {
                Track2Model::Classifier(ClsEmotionModel {
                    encoder: crate::textenc::EncoderModel { vocab, dims: manifest.dims, params },
                    mode,
                    train_log,
                })
            }
        })
    }
}

/// Predicts a label for every record, in input order. `workers` threads run
/// disjoint contiguous slices; the output is identical for any worker count.
pub fn predict_dataset(model: &Track2Model, d: &Dataset, workers: usize) -> Result<Vec<String>> {
    crate::parallel::ordered_map(&d.records, workers, |rec| model.predict(&rec.essay))
}

/// Submission format: one lowercase label per line, in input order.
pub fn write_label_file(labels: &[String], path: &Path) -> Result<()> {
    let mut out = String::new();
    for label in labels {
        out.push_str(label);
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
