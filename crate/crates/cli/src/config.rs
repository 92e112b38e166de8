//! Run configuration: one flat key-value namespace covering every command.
//!
//! Values resolve in documented precedence order: built-in defaults, then the
//! `--config` file, then `--set key=value` overrides in the order given, then
//! the named flags. A run's effective configuration round-trips through
//! `to_text`, so the snapshot written next to the outputs can be fed straight
//! back via `--config` to repeat the run.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use affect_core::corpus::SynthTask;
use affect_core::regressors::RegressorKind;
use affect_core::textenc::EncoderDims;
use affect_core::track1::Track1Hyper;
use affect_core::track2::{ClsLossMode, Track2Hyper};
use affect_core::{Error, Result};

/// Which track a command operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Track1,
    Track2,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Track1 => "track1",
            Task::Track2 => "track2",
        }
    }

    pub fn from_str(s: &str) -> Result<Task> {
        match s {
            "track1" => Ok(Task::Track1),
            "track2" => Ok(Task::Track2),
            other => Err(Error::Config(format!(
                "unknown task {other:?} (expected track1 or track2)"
            ))),
        }
    }

    pub fn synth_task(self) -> SynthTask {
        match self {
            Task::Track1 => SynthTask::Track1,
            Task::Track2 => SynthTask::Track2,
        }
    }
}

/// Which emotion model `train --task track2` produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmotionModelKind {
    Generation,
    Classifier,
}

impl EmotionModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionModelKind::Generation => "generation",
            EmotionModelKind::Classifier => "classifier",
        }
    }

    pub fn from_str(s: &str) -> Result<EmotionModelKind> {
        match s {
            "generation" => Ok(EmotionModelKind::Generation),
            "classifier" => Ok(EmotionModelKind::Classifier),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected generation or classifier)"
            ))),
        }
    }
}

/// Effective configuration of one run. Every command reads the keys it needs
/// and ignores the rest, so a single snapshot describes any run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub data: Option<PathBuf>,
    pub aux: Option<PathBuf>,
    pub model_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    pub model: EmotionModelKind,
    pub loss_mode: ClsLossMode,
    pub regressor: RegressorKind,
    pub layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub vocab_min_freq: usize,
    pub vocab_max_size: usize,
    pub patience: usize,
    pub stage1_valid_ratio: f64,
    pub stage1_max_epochs: usize,
    pub score_min: f64,
    pub score_max: f64,
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

impl Default for RunConfig {
    fn default() -> Self {
        let dims = EncoderDims::default();
        let t1 = Track1Hyper::default();
        let t2 = Track2Hyper::default();
        let reg = t1.regressor.clone();
        RunConfig {
            task: None,
            data: None,
            aux: None,
            model_dir: None,
            out: None,
            schema: None,
            n: 100,
            seed: 0,
            workers: 1,
            model: EmotionModelKind::Generation,
            loss_mode: ClsLossMode::SoftmaxCe,
            regressor: RegressorKind::Mlp,
            layers: dims.layers,
            model_dim: dims.model_dim,
            heads: dims.heads,
            ff_dim: dims.ff_dim,
            max_len: dims.max_len,
            lr: t2.lr,
            epochs: t2.epochs,
            batch_size: t2.batch_size,
            vocab_min_freq: t2.vocab_min_freq,
            vocab_max_size: t2.vocab_max_size,
            patience: t2.patience,
            stage1_valid_ratio: t2.stage1_valid_ratio,
            stage1_max_epochs: t2.stage1_max_epochs,
            score_min: t1.score_range.0,
            score_max: t1.score_range.1,
            mlp_hidden: reg.mlp_hidden,
            mlp_lr: reg.mlp_lr,
            mlp_epochs: reg.mlp_epochs,
            svr_epsilon: reg.svr_epsilon,
            svr_c: reg.svr_c,
            svr_lr: reg.svr_lr,
            svr_steps: reg.svr_steps,
            boost_rounds: reg.boost_rounds,
            gbt_trees: reg.gbt_trees,
            gbt_depth: reg.gbt_depth,
            gbt_shrinkage: reg.gbt_shrinkage,
        }
    }
}

fn parse_value<T>(key: &str, value: &str) -> Result<T>
where
    T: std::str::FromStr,
{
    value.parse().map_err(|_| {
        Error::Config(format!("config key {key}: cannot parse {value:?}"))
    })
}

fn parse_usize_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|part| parse_value(key, part.trim())).collect()
}

fn join_usize_list(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected; later calls override earlier
    /// ones, which is what gives flags precedence over the config file.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "task" => self.task = Some(Task::from_str(value)?),
            "data" => self.data = Some(PathBuf::from(value)),
            "aux" => self.aux = Some(PathBuf::from(value)),
            "model_dir" => self.model_dir = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "schema" => self.schema = Some(PathBuf::from(value)),
            "n" => self.n = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "workers" => self.workers = parse_value(key, value)?,
            "model" => self.model = EmotionModelKind::from_str(value)?,
            "loss_mode" => self.loss_mode = ClsLossMode::from_str(value)?,
            "regressor" => self.regressor = RegressorKind::from_str(value)?,
            "layers" => self.layers = parse_value(key, value)?,
            "model_dim" => self.model_dim = parse_value(key, value)?,
            "heads" => self.heads = parse_value(key, value)?,
            "ff_dim" => self.ff_dim = parse_value(key, value)?,
            "max_len" => self.max_len = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "vocab_min_freq" => self.vocab_min_freq = parse_value(key, value)?,
            "vocab_max_size" => self.vocab_max_size = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "stage1_valid_ratio" => self.stage1_valid_ratio = parse_value(key, value)?,
            "stage1_max_epochs" => self.stage1_max_epochs = parse_value(key, value)?,
            "score_min" => self.score_min = parse_value(key, value)?,
            "score_max" => self.score_max = parse_value(key, value)?,
            "mlp_hidden" => self.mlp_hidden = parse_usize_list(key, value)?,
            "mlp_lr" => self.mlp_lr = parse_value(key, value)?,
            "mlp_epochs" => self.mlp_epochs = parse_value(key, value)?,
            "svr_epsilon" => self.svr_epsilon = parse_value(key, value)?,
            "svr_c" => self.svr_c = parse_value(key, value)?,
            "svr_lr" => self.svr_lr = parse_value(key, value)?,
            "svr_steps" => self.svr_steps = parse_value(key, value)?,
            "boost_rounds" => self.boost_rounds = parse_value(key, value)?,
            "gbt_trees" => self.gbt_trees = parse_value(key, value)?,
            "gbt_depth" => self.gbt_depth = parse_value(key, value)?,
            "gbt_shrinkage" => self.gbt_shrinkage = parse_value(key, value)?,
            other => {
                return Err(Error::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Applies a config file body: `key = value` lines, `#` comments, blank
    /// lines ignored. Duplicate keys are rejected as likely typos. `origin`
    /// names the source in diagnostics.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{line_no}: expected key = value"))
            })?;
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config(format!(
                    "{origin}:{line_no}: duplicate key {key:?}"
                )));
            }
            seen.push(key.to_string());
            self.apply(key, value.trim()).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{origin}:{line_no}: {msg}")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("config file {}: {e}", path.display()))
        })?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Serializes every key in a fixed order. Unset path keys are omitted;
    /// everything else round-trips exactly (floats print with full
    /// precision), so `apply_text` on the output reproduces this config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |key: &str, value: &dyn Display| {
            out.push_str(key);
            out.push_str(" = ");
            out.push_str(&value.to_string());
            out.push('\n');
        };
        if let Some(task) = self.task {
            put("task", &task.as_str());
        }
        if let Some(p) = &self.data {
            put("data", &p.display());
        }
        if let Some(p) = &self.aux {
            put("aux", &p.display());
        }
        if let Some(p) = &self.model_dir {
            put("model_dir", &p.display());
        }
        if let Some(p) = &self.out {
            put("out", &p.display());
        }
        if let Some(p) = &self.schema {
            put("schema", &p.display());
        }
        put("n", &self.n);
        put("seed", &self.seed);
        put("workers", &self.workers);
        put("model", &self.model.as_str());
        put("loss_mode", &self.loss_mode.as_str());
        put("regressor", &self.regressor.as_str());
        put("layers", &self.layers);
        put("model_dim", &self.model_dim);
        put("heads", &self.heads);
        put("ff_dim", &self.ff_dim);
        put("max_len", &self.max_len);
        put("lr", &self.lr);
        put("epochs", &self.epochs);
        put("batch_size", &self.batch_size);
        put("vocab_min_freq", &self.vocab_min_freq);
        put("vocab_max_size", &self.vocab_max_size);
        put("patience", &self.patience);
        put("stage1_valid_ratio", &self.stage1_valid_ratio);
        put("stage1_max_epochs", &self.stage1_max_epochs);
        put("score_min", &self.score_min);
        put("score_max", &self.score_max);
        put("mlp_hidden", &join_usize_list(&self.mlp_hidden));
        put("mlp_lr", &self.mlp_lr);
        put("mlp_epochs", &self.mlp_epochs);
        put("svr_epsilon", &self.svr_epsilon);
        put("svr_c", &self.svr_c);
        put("svr_lr", &self.svr_lr);
        put("svr_steps", &self.svr_steps);
        put("boost_rounds", &self.boost_rounds);
        put("gbt_trees", &self.gbt_trees);
        put("gbt_depth", &self.gbt_depth);
        put("gbt_shrinkage", &self.gbt_shrinkage);
        out
    }

    pub fn dims(&self) -> EncoderDims {
        EncoderDims {
            layers: self.layers,
            model_dim: self.model_dim,
            heads: self.heads,
            ff_dim: self.ff_dim,
            max_len: self.max_len,
        }
    }

    pub fn track1_hyper(&self) -> Track1Hyper {
        let mut hyper = Track1Hyper::default();
        hyper.dims = self.dims();
        hyper.encoder_lr = self.lr;
        hyper.encoder_epochs = self.epochs;
        hyper.batch_size = self.batch_size;
        hyper.seed = self.seed;
        hyper.vocab_min_freq = self.vocab_min_freq;
        hyper.vocab_max_size = self.vocab_max_size;
        hyper.score_range = (self.score_min, self.score_max);
        hyper.regressor.seed = self.seed;
        hyper.regressor.mlp_hidden = self.mlp_hidden.clone();
        hyper.regressor.mlp_lr = self.mlp_lr;
        hyper.regressor.mlp_epochs = self.mlp_epochs;
        hyper.regressor.svr_epsilon = self.svr_epsilon;
        hyper.regressor.svr_c = self.svr_c;
        hyper.regressor.svr_lr = self.svr_lr;
        hyper.regressor.svr_steps = self.svr_steps;
        hyper.regressor.boost_rounds = self.boost_rounds;
        hyper.regressor.gbt_trees = self.gbt_trees;
        hyper.regressor.gbt_depth = self.gbt_depth;
        hyper.regressor.gbt_shrinkage = self.gbt_shrinkage;
        hyper
    }

    pub fn track2_hyper(&self) -> Track2Hyper {
        Track2Hyper {
            dims: self.dims(),
            lr: self.lr,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            vocab_min_freq: self.vocab_min_freq,
            vocab_max_size: self.vocab_max_size,
            patience: self.patience,
            stage1_valid_ratio: self.stage1_valid_ratio,
            stage1_max_epochs: self.stage1_max_epochs,
        }
    }
}
