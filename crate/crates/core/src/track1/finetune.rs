//! Per-target encoder fine-tuning: the pooled output feeds a scalar head
//! and the whole stack trains end-to-end on squared error. The monitored
//! quantity is the square root of the mean squared error per epoch.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::nncore::{adam_step, AdamState, ParameterStore};
use crate::textenc::encoder::{encoder_backward, encoder_forward};
use crate::textenc::{EncoderDims, EncoderModel, TokenSeq, Vocab};

use super::{Track1Hyper, Track1Target};

/// An encoder fine-tuned to predict one score, with its scalar head.
#[derive(Debug, Clone)]
pub struct FinetunedEncoder {
    pub target: Track1Target,
    pub encoder: EncoderModel,
    /// Square root of the mean squared error per epoch, as visited.
    pub train_log: Vec<f64>,
}

impl FinetunedEncoder {
    /// The pooled embedding this encoder contributes to the shared
    /// feature vector.
    pub fn pooled(&self, essay: &str) -> Result<Vec<f64>> {
        let seq = self.encoder.tokenize(essay)?;
        self.encoder.encode_pooled(&seq)
    }

    /// The scalar head's own prediction, unclamped.
    pub fn predict_score(&self, essay: &str) -> Result<f64> {
        Ok(head_score(&self.encoder.params, &self.pooled(essay)?))
    }

    /// Squared error of the unclamped prediction against a gold score,
    /// forward only.
    pub fn squared_error(&self, essay: &str, gold: f64) -> Result<f64> {
        let pred = self.predict_score(essay)?;
        Ok((pred - gold).powi(2))
    }

    /// Same squared error, also accumulating its unscaled gradients into
    /// the parameter store, so summed calls line up with the gradient
    /// checker and custom training loops can batch however they like.
    pub fn accumulate_squared_error(&mut self, essay: &str, gold: f64) -> Result<f64> {
        let seq = self.encoder.tokenize(essay)?;
        Ok(accumulate_example(&mut self.encoder.params, &self.encoder.dims, &seq, gold))
    }
}

fn head_score(store: &ParameterStore, pooled: &[f64]) -> f64 {
    let w = store.view2("head.w");
    let b = store.view1("head.b");
    let mut out = b[0];
    for (i, &x) in pooled.iter().enumerate() {
        out += x * w[[i, 0]];
    }
    out
}

/// Forward and backward for one example; gradients accumulate into the
/// store. Returns the squared error.
fn accumulate_example(
    store: &mut ParameterStore,
    dims: &EncoderDims,
    seq: &TokenSeq,
    gold: f64,
) -> f64 {
    let (hidden, trace) = encoder_forward(store, "enc", dims, seq.real_ids());
    let pooled = hidden.row(0).to_vec();
    let pred = head_score(store, &pooled);
    let dpred = 2.0 * (pred - gold);

    let grad_pooled: Vec<f64> = {
        let w = store.view2("head.w");
        (0..dims.model_dim).map(|i| dpred * w[[i, 0]]).collect()
    };
    let gw = Array2::from_shape_fn((dims.model_dim, 1), |(i, _)| dpred * pooled[i]);
    store.add_grad2("head.w", &gw);
    store.add_grad1("head.b", &Array1::from(vec![dpred]));

    let mut grad_hidden = Array2::zeros(hidden.dim());
    for (i, g) in grad_pooled.into_iter().enumerate() {
        grad_hidden[[0, i]] = g;
    }
    encoder_backward(store, "enc", dims, &trace, &grad_hidden);
    (pred - gold) * (pred - gold)
}

/// Pulls (essay, score) pairs for one target, rejecting records without a
/// usable score.
pub(crate) fn scored_examples(d: &Dataset, target: Track1Target) -> Result<Vec<(&str, f64)>> {
    if d.records.is_empty() {
        return Err(Error::Data(format!("dataset \"{}\" has no records", d.provenance)));
    }
    let mut examples = Vec::with_capacity(d.records.len());
    let mut problems = Vec::new();
    for (i, rec) in d.records.iter().enumerate() {
        match target.score(rec) {
            None => problems.push(format!("record {}: no {} score", i + 1, target.as_str())),
            Some(v) if !v.is_finite() => {
                problems.push(format!("record {}: {} score {v} is not finite", i + 1, target.as_str()))
            }
            Some(v) => examples.push((rec.essay.as_str(), v)),
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

/// Trains one encoder-plus-head stack end-to-end for the given target.
pub fn finetune_encoder(
    train: &Dataset,
    target: Track1Target,
    hyper: &Track1Hyper,
) -> Result<FinetunedEncoder> {
    hyper.validate()?;
    let examples = scored_examples(train, target)?;
    let essays: Vec<&str> = examples.iter().map(|(essay, _)| *essay).collect();
    let vocab = Vocab::build(&essays, hyper.vocab_min_freq, hyper.vocab_max_size)?;
    let seed = hyper.seed ^ target.seed_salt();
    let mut encoder = EncoderModel::with_head(vocab, hyper.dims, 1, seed)?;

    let pairs: Vec<(TokenSeq, f64)> = examples
        .iter()
        .map(|(essay, score)| Ok((encoder.tokenize(essay)?, *score)))
        .collect::<Result<_>>()?;

    let mut opt = AdamState::new(&encoder.params, hyper.encoder_lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ crate::SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut train_log = Vec::with_capacity(hyper.encoder_epochs);
    for _ in 0..hyper.encoder_epochs {
        order.shuffle(&mut rng);
        let mut total_sq = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            for &i in batch {
                let (seq, gold) = &pairs[i];
                total_sq += accumulate_example(&mut encoder.params, &hyper.dims, seq, *gold);
            }
            encoder.params.scale_grads(1.0 / batch.len() as f64);
            adam_step(&mut encoder.params, &mut opt)?;
        }
        train_log.push((total_sq / pairs.len() as f64).sqrt());
    }
    Ok(FinetunedEncoder { target, encoder, train_log })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synthesize_corpus, SynthTask};
    use crate::nncore::grad_check;
    use crate::textenc::tokenize;

    fn tiny_hyper() -> Track1Hyper {
        Track1Hyper {
            dims: EncoderDims { layers: 1, model_dim: 32, heads: 2, ff_dim: 64, max_len: 48 },
            encoder_lr: 2e-2,
            encoder_epochs: 300,
            batch_size: 8,
            seed: 3,
            ..Track1Hyper::default()
        }
    }

    #[test]
    fn overfits_eight_records() {
        let data = synthesize_corpus(8, 101, SynthTask::Track1).unwrap();
        let fit = finetune_encoder(&data, Track1Target::Empathy, &tiny_hyper()).unwrap();
        let final_rmse = *fit.train_log.last().unwrap();
        assert!(final_rmse < 0.05, "train error stalled at {final_rmse}");
        for rec in &data.records {
            let pred = fit.predict_score(&rec.essay).unwrap();
            assert!((pred - rec.empathy.unwrap()).abs() < 0.2, "prediction {pred} off gold");
        }
    }

    #[test]
    fn training_is_deterministic_under_a_fixed_seed() {
        let data = synthesize_corpus(6, 103, SynthTask::Track1).unwrap();
        let hyper = Track1Hyper { encoder_epochs: 4, ..tiny_hyper() };
        let a = finetune_encoder(&data, Track1Target::Distress, &hyper).unwrap();
        let b = finetune_encoder(&data, Track1Target::Distress, &hyper).unwrap();
        assert_eq!(a.train_log, b.train_log);
        assert_eq!(a.encoder.params.to_json(), b.encoder.params.to_json());
        assert_eq!(a.target, Track1Target::Distress);
        assert_eq!(a.train_log.len(), hyper.encoder_epochs);
    }

    #[test]
    fn the_two_targets_start_from_different_parameters() {
        let data = synthesize_corpus(6, 104, SynthTask::Track1).unwrap();
        let hyper = Track1Hyper { encoder_epochs: 0, ..tiny_hyper() };
        let emp = finetune_encoder(&data, Track1Target::Empathy, &hyper).unwrap();
        let dis = finetune_encoder(&data, Track1Target::Distress, &hyper).unwrap();
        assert_ne!(emp.encoder.params.to_json(), dis.encoder.params.to_json());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let texts = ["i felt moved and caring for the people", "the pressure left me drained"];
        let golds = [5.2, 3.1];
        let dims = EncoderDims { layers: 1, model_dim: 16, heads: 2, ff_dim: 32, max_len: 12 };
        let vocab = Vocab::build(&texts, 1, 64).unwrap();
        let mut model = EncoderModel::with_head(vocab, dims, 1, 47).unwrap();
        let pairs: Vec<(TokenSeq, f64)> = texts
            .iter()
            .zip(golds)
            .map(|(t, g)| (tokenize(t, &model.vocab, dims.max_len).unwrap(), g))
            .collect();

        for (seq, gold) in &pairs {
            accumulate_example(&mut model.params, &dims, seq, *gold);
        }
        let loss_of = |store: &ParameterStore| {
            pairs
                .iter()
                .map(|(seq, gold)| {
                    let (hidden, _) = encoder_forward(store, "enc", &dims, seq.real_ids());
                    let pred = head_score(store, &hidden.row(0).to_vec());
                    (pred - gold) * (pred - gold)
                })
                .sum()
        };
        let report = grad_check(&mut model.params, loss_of, 1e-4, Some(900)).unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn missing_scores_are_a_data_error_listing_records() {
        let mut data = synthesize_corpus(5, 107, SynthTask::Track1).unwrap();
        data.records[1].distress = None;
        data.records[4].distress = None;
        let err = finetune_encoder(&data, Track1Target::Distress, &tiny_hyper()).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Data(_)));
        assert!(msg.contains("record 2: no distress score"), "{msg}");
        assert!(msg.contains("record 5"), "{msg}");
        assert!(finetune_encoder(&data, Track1Target::Empathy, &tiny_hyper()).is_ok());
    }
}
