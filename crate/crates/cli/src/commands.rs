//! The four workflow commands. Each one resolves its inputs from the shared
//! `RunConfig`, so any key can come from the config file or a flag.
//!
//! Commands that produce a run directory (`train`, `evaluate`) also write a
//! `config.txt` snapshot of the effective configuration into it; feeding that
//! snapshot back through `--config` repeats the run.

use std::fs;
use std::path::{Path, PathBuf};

use affect_core::corpus::{load_tsv, synth_schema, synthesize_corpus, ColumnSchema, Dataset};
use affect_core::metrics::{
    classification_report, regression_report, render_classification, render_regression,
};
use affect_core::textenc::EMOTION_LABELS;
use affect_core::track1::{self, Track1Pipeline};
use affect_core::track2::{
    self, staged_finetune, train_classifier, train_generator, Track2Model,
};
use affect_core::{Error, Result};

use crate::config::{EmotionModelKind, RunConfig, Task};

fn require_task(cfg: &RunConfig) -> Result<Task> {
    cfg.task.ok_or_else(|| {
        Error::Config("missing required key: task (pass --task track1|track2)".into())
    })
}

fn require_path<'a>(value: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| {
        let flag = key.replace('_', "-");
        Error::Config(format!("missing required key: {key} (pass --{flag})"))
    })
}

/// Maps bare io errors onto a message that names the file; errors that
/// already carry the path pass through.
fn with_file_context(e: Error, what: &str, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Config(format!("{what} {}: {io}", path.display())),
        other => other,
    }
}

fn column_schema(cfg: &RunConfig, task: Task) -> Result<ColumnSchema> {
    match &cfg.schema {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("schema file {}: {e}", path.display()))
            })?;
            ColumnSchema::parse(&text).map_err(|e| match e {
                Error::Config(msg) => {
                    Error::Config(format!("schema file {}: {msg}", path.display()))
                }
                other => other,
            })
        }
        None => Ok(synth_schema(task.synth_task())),
    }
}

fn load_data(cfg: &RunConfig, task: Task, path: &Path) -> Result<Dataset> {
    let schema = column_schema(cfg, task)?;
    let report =
        load_tsv(path, &schema).map_err(|e| with_file_context(e, "data file", path))?;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    Ok(report.dataset)
}

fn write_log(path: &Path, losses: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (epoch, loss) in losses.iter().enumerate() {
        out.push_str(&format!("{}\t{}\n", epoch + 1, loss));
    }
    fs::write(path, out)?;
    Ok(())
}

fn write_snapshot(cfg: &RunConfig, dir: &Path) -> Result<()> {
    fs::write(dir.join("config.txt"), cfg.to_text())?;
    Ok(())
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let task = require_task(cfg)?;
    let out = require_path(&cfg.out, "out")?;
    let data = synthesize_corpus(cfg.n, cfg.seed, task.synth_task())?;
    let schema = synth_schema(task.synth_task());
    affect_core::corpus::write_tsv(&data, out, &schema)?;
    println!("wrote {} records to {}", data.len(), out.display());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<()> {
    let task = require_task(cfg)?;
    let data_path = require_path(&cfg.data, "data")?;
    let out = require_path(&cfg.out, "out")?;
    let train_data = load_data(cfg, task, data_path)?;
    fs::create_dir_all(out)?;

    match task {
        Task::Track1 => {
            if cfg.aux.is_some() {
                return Err(Error::Config(
                    "aux only applies to track2 generation training".into(),
                ));
            }
            let hyper = cfg.track1_hyper();
            let pipeline = track1::train_pipeline(&train_data, cfg.regressor, &hyper)?;
            pipeline.save(out)?;
            write_log(&out.join("empathy_encoder.log"), &pipeline.empathy_encoder.train_log)?;
            write_log(
                &out.join("distress_encoder.log"),
                &pipeline.distress_encoder.train_log,
            )?;
            write_log(
                &out.join("empathy_regressor.log"),
                &pipeline.empathy_regressor.train_log,
            )?;
            write_log(
                &out.join("distress_regressor.log"),
                &pipeline.distress_regressor.train_log,
            )?;
        }
        Task::Track2 => {
            let hyper = cfg.track2_hyper();
            let model = match cfg.model {
                EmotionModelKind::Generation => {
                    let trained = match &cfg.aux {
                        Some(aux_path) => {
                            let aux = load_data(cfg, task, aux_path)?;
                            staged_finetune(&aux, &train_data, &hyper)?
                        }
                        None => train_generator(&train_data, &hyper)?,
                    };
                    Track2Model::Generation(trained)
                }
                EmotionModelKind::Classifier => {
                    if cfg.aux.is_some() {
                        return Err(Error::Config(
                            "aux only applies to track2 generation training".into(),
                        ));
                    }
                    Track2Model::Classifier(train_classifier(
                        &train_data,
                        cfg.loss_mode,
                        &hyper,
                    )?)
                }
            };
            model.save(out)?;
            let log = match &model {
                Track2Model::Generation(g) => &g.train_log,
                Track2Model::Classifier(c) => &c.train_log,
            };
            write_log(&out.join("train.log"), log)?;
        }
    }

    write_snapshot(cfg, out)?;
    println!("model bundle written to {}", out.display());
    Ok(())
}

fn track1_gold(data: &Dataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut empathy = Vec::with_capacity(data.len());
    let mut distress = Vec::with_capacity(data.len());
    for (i, rec) in data.records.iter().enumerate() {
        empathy.push(rec.empathy.ok_or_else(|| {
            Error::Data(format!("{}: record {}: no empathy score", data.provenance, i + 1))
        })?);
        distress.push(rec.distress.ok_or_else(|| {
            Error::Data(format!("{}: record {}: no distress score", data.provenance, i + 1))
        })?);
    }
    Ok((empathy, distress))
}

fn track2_gold(data: &Dataset) -> Result<Vec<&str>> {
    let mut gold = Vec::with_capacity(data.len());
    for (i, rec) in data.records.iter().enumerate() {
        let label = rec.emotion.as_deref().ok_or_else(|| {
            Error::Data(format!("{}: record {}: no emotion label", data.provenance, i + 1))
        })?;
        if !EMOTION_LABELS.contains(&label) {
            return Err(Error::Data(format!(
                "{}: record {}: label {label:?} is not a known emotion",
                data.provenance,
                i + 1
            )));
        }
        gold.push(label);
    }
    Ok(gold)
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let task = require_task(cfg)?;
    let data_path = require_path(&cfg.data, "data")?;
    let model_dir = require_path(&cfg.model_dir, "model_dir")?;
    let out = require_path(&cfg.out, "out")?;
    let data = load_data(cfg, task, data_path)?;
    fs::create_dir_all(out)?;

    let rendered = match task {
        Task::Track1 => {
            let pipeline = Track1Pipeline::load(model_dir)
                .map_err(|e| with_file_context(e, "model bundle", model_dir))?;
            let predictions = track1::predict_dataset(&pipeline, &data, cfg.workers)?;
            let (gold_empathy, gold_distress) = track1_gold(&data)?;
            let pred_empathy: Vec<f64> = predictions.iter().map(|p| p.0).collect();
            let pred_distress: Vec<f64> = predictions.iter().map(|p| p.1).collect();
            let report =
                regression_report(&gold_empathy, &pred_empathy, &gold_distress, &pred_distress)?;
            let mut json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
            json.push('\n');
            fs::write(out.join("report.json"), json)?;
            render_regression(&report)
        }
        Task::Track2 => {
            let model = Track2Model::load(model_dir)
                .map_err(|e| with_file_context(e, "model bundle", model_dir))?;
            let predictions = track2::predict_dataset(&model, &data, cfg.workers)?;
            let gold = track2_gold(&data)?;
            let pred_refs: Vec<&str> = predictions.iter().map(String::as_str).collect();
            let report = classification_report(&gold, &pred_refs, &EMOTION_LABELS)?;
            let mut json = serde_json::to_string_pretty(&report)
                .map_err(|e| Error::Format(format!("report serialization: {e}")))?;
            json.push('\n');
            fs::write(out.join("report.json"), json)?;
            render_classification(&report)
        }
    };

    fs::write(out.join("report.txt"), &rendered)?;
    write_snapshot(cfg, out)?;
    print!("{rendered}");
    Ok(())
}

pub fn predict(cfg: &RunConfig) -> Result<()> {
    let task = require_task(cfg)?;
    let data_path = require_path(&cfg.data, "data")?;
    let model_dir = require_path(&cfg.model_dir, "model_dir")?;
    let out = require_path(&cfg.out, "out")?;
    let data = load_data(cfg, task, data_path)?;

    let count = match task {
        Task::Track1 => {
            let pipeline = Track1Pipeline::load(model_dir)
                .map_err(|e| with_file_context(e, "model bundle", model_dir))?;
            let rows = track1::predict_dataset(&pipeline, &data, cfg.workers)?;
            track1::write_score_file(&rows, out)?;
            rows.len()
        }
        Task::Track2 => {
            let model = Track2Model::load(model_dir)
                .map_err(|e| with_file_context(e, "model bundle", model_dir))?;
            let labels = track2::predict_dataset(&model, &data, cfg.workers)?;
            track2::write_label_file(&labels, out)?;
            labels.len()
        }
    };
    println!("wrote {count} predictions to {}", out.display());
    Ok(())
}
