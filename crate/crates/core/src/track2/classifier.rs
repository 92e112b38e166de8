//! Classification baseline: the encoder's pooled output feeds a linear
//! head over the seven labels. The head starts at zero so an untrained
//! model scores every label identically, and prediction is argmax with
//! ties to the lowest label index under either loss mode.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::nncore::ops::{log_softmax, softmax};
use crate::nncore::{adam_step, AdamState, LayerKind, LayerSpec, ParameterStore};
use crate::textenc::encoder::{encoder_backward, encoder_forward, encoder_layer_specs};
use crate::textenc::{EncoderDims, EncoderModel, TokenSeq, Vocab, EMOTION_LABELS};

use super::{labeled_examples, Track2Hyper};
use crate::SHUFFLE_SALT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClsLossMode {
    SoftmaxCe,
    PerLabelBce,
}

impl ClsLossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ClsLossMode::SoftmaxCe => "softmax_ce",
            ClsLossMode::PerLabelBce => "per_label_bce",
        }
    }

    pub fn from_str(s: &str) -> Result<ClsLossMode> {
        match s {
            "softmax_ce" => Ok(ClsLossMode::SoftmaxCe),
            "per_label_bce" => Ok(ClsLossMode::PerLabelBce),
            other => Err(Error::Config(format!(
                "unknown loss mode \"{other}\" (expected softmax_ce or per_label_bce)"
            ))),
        }
    }
}

/// Cross-entropy of a softmax over the scores against one gold label.
/// Returns the loss and its gradient in the scores.
pub fn softmax_ce_loss(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= logits.len() {
        return Err(Error::Argument(format!(
            "gold index {gold} out of range for {} scores",
            logits.len()
        )));
    }
    let logp = log_softmax(logits)?;
    let mut grad = softmax(logits)?;
    grad[gold] -= 1.0;
    Ok((-logp[gold], grad))
}

/// Sum over labels of one-vs-rest binary cross-entropy, with the gold
/// label as the single positive. Returns the loss and its gradient.
pub fn per_label_bce_loss(logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    if gold >= logits.len() {
        return Err(Error::Argument(format!(
            "gold index {gold} out of range for {} scores",
            logits.len()
        )));
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (j, &z) in logits.iter().enumerate() {
        let y = if j == gold { 1.0 } else { 0.0 };
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        let sigma = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        grad[j] = sigma - y;
    }
    Ok((loss, grad))
}

fn head_scores(store: &ParameterStore, pooled: &[f64]) -> Vec<f64> {
    let w = store.view2("head.w");
    let b = store.view1("head.b");
    let mut out: Vec<f64> = b.to_vec();
    for (j, o) in out.iter_mut().enumerate() {
        for (i, &x) in pooled.iter().enumerate() {
            *o += x * w[[i, j]];
        }
    }
    out
}

fn mode_loss(mode: ClsLossMode, logits: &[f64], gold: usize) -> Result<(f64, Vec<f64>)> {
    match mode {
        ClsLossMode::SoftmaxCe => softmax_ce_loss(logits, gold),
        ClsLossMode::PerLabelBce => per_label_bce_loss(logits, gold),
    }
}

/// Forward and backward for one example; gradients accumulate into the
/// store. Returns the loss.
fn accumulate_example(
    store: &mut ParameterStore,
    dims: &EncoderDims,
    seq: &TokenSeq,
    gold: usize,
    mode: ClsLossMode,
) -> Result<f64> {
    let (hidden, trace) = encoder_forward(store, "enc", dims, seq.real_ids());
    let pooled = hidden.row(0).to_vec();
    let logits = head_scores(store, &pooled);
    let (loss, grad_z) = mode_loss(mode, &logits, gold)?;

    let grad_pooled: Vec<f64> = {
        let w = store.view2("head.w");
        (0..dims.model_dim)
            .map(|i| grad_z.iter().enumerate().map(|(j, g)| w[[i, j]] * g).sum())
            .collect()
    };
    let gw = Array2::from_shape_fn((dims.model_dim, grad_z.len()), |(i, j)| {
        pooled[i] * grad_z[j]
    });
    store.add_grad2("head.w", &gw);
    store.add_grad1("head.b", &Array1::from(grad_z));

    let mut grad_hidden = Array2::zeros(hidden.dim());
    for (i, g) in grad_pooled.into_iter().enumerate() {
        grad_hidden[[0, i]] = g;
    }
    encoder_backward(store, "enc", dims, &trace, &grad_hidden);
    Ok(loss)
}

/// An encoder with a seven-way linear head and the loss mode it was
/// trained under.
#[derive(Debug, Clone)]
pub struct ClsEmotionModel {
    pub encoder: EncoderModel,
    pub mode: ClsLossMode,
    /// Mean loss per epoch.
    pub train_log: Vec<f64>,
}

impl ClsEmotionModel {
    /// Head scores for one essay, in label order.
    pub fn scores(&self, essay: &str) -> Result<Vec<f64>> {
        let seq = self.encoder.tokenize(essay)?;
        let pooled = self.encoder.encode_pooled(&seq)?;
        Ok(head_scores(&self.encoder.params, &pooled))
    }

    pub fn predict(&self, essay: &str) -> Result<String> {
        let scores = self.scores(essay)?;
        let mut best = 0;
        for (j, s) in scores.iter().enumerate().skip(1) {
            if *s > scores[best] {
                best = j;
            }
        }
        Ok(EMOTION_LABELS[best].to_string())
    }

    /// Loss for one labeled essay under the model's loss mode, forward only.
    pub fn loss(&self, essay: &str, label: &str) -> Result<f64> {
        let gold = label_index(label)?;
        let seq = self.encoder.tokenize(essay)?;
        let pooled = self.encoder.encode_pooled(&seq)?;
        let logits = head_scores(&self.encoder.params, &pooled);
        Ok(mode_loss(self.mode, &logits, gold)?.0)
    }

    /// Same loss, also accumulating its unscaled gradients into the
    /// parameter store, so summed calls line up with the gradient checker
    /// and custom training loops can batch however they like.
    pub fn accumulate_loss(&mut self, essay: &str, label: &str) -> Result<f64> {
        let gold = label_index(label)?;
        let seq = self.encoder.tokenize(essay)?;
        accumulate_example(&mut self.encoder.params, &self.encoder.dims, &seq, gold, self.mode)
    }
}

fn label_index(label: &str) -> Result<usize> {
    EMOTION_LABELS
        .iter()
        .position(|l| *l == label)
        .ok_or_else(|| Error::Argument(format!("label {label:?} is not a known emotion")))
}

/// Trains the classifier baseline on one labeled corpus.
pub fn train_classifier(
    train: &Dataset,
    mode: ClsLossMode,
    hyper: &Track2Hyper,
) -> Result<ClsEmotionModel> {
    hyper.validate()?;
    let examples = labeled_examples(train)?;
    let essays: Vec<&str> = examples.iter().map(|(essay, _)| *essay).collect();
    let vocab = Vocab::build(&essays, hyper.vocab_min_freq, hyper.vocab_max_size)?;

    let mut specs = encoder_layer_specs("enc", vocab.size(), &hyper.dims);
    specs.push(LayerSpec::new(
        "head",
        LayerKind::ZeroLinear { input: hyper.dims.model_dim, output: EMOTION_LABELS.len() },
    ));
    let params = ParameterStore::init(specs, hyper.seed)?;
    let mut encoder = EncoderModel { vocab, dims: hyper.dims, params };

    let pairs: Vec<(TokenSeq, usize)> = examples
        .iter()
        .map(|(essay, label)| {
            let gold = EMOTION_LABELS
                .iter()
                .position(|l| l == label)
                .expect("labels were checked against the emotion set");
            Ok((encoder.tokenize(essay)?, gold))
        })
        .collect::<Result<_>>()?;

    let mut opt = AdamState::new(&encoder.params, hyper.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut train_log = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            for &i in batch {
                let (seq, gold) = &pairs[i];
                total += accumulate_example(&mut encoder.params, &hyper.dims, seq, *gold, mode)?;
            }
            encoder.params.scale_grads(1.0 / batch.len() as f64);
            adam_step(&mut encoder.params, &mut opt)?;
        }
        train_log.push(total / pairs.len() as f64);
    }
    Ok(ClsEmotionModel { encoder, mode, train_log })
}
