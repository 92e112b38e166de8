//! Label generation: the encoder-decoder is trained teacher-forced to emit
//! the emotion as a two-token sequence, label then end-of-sequence, and
//! predicts by constrained decoding over the label block.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{split_dataset, Dataset};
use crate::error::Result;
use crate::nncore::{adam_step, AdamState};
use crate::textenc::{LabelTokenPair, Seq2SeqModel, TokenSeq, Vocab};

use super::{labeled_examples, Track2Hyper};
use crate::SHUFFLE_SALT;

/// An encoder-decoder emotion model plus the record of what it was
/// trained on.
#[derive(Debug, Clone)]
pub struct GenEmotionModel {
    pub model: Seq2SeqModel,
    /// Provenance strings of the corpora this model saw, in training order.
    pub provenance: Vec<String>,
    /// Mean teacher-forced loss per epoch, across all training phases.
    pub train_log: Vec<f64>,
}

impl GenEmotionModel {
    pub fn predict(&self, essay: &str) -> Result<String> {
        let seq = self.model.tokenize(essay)?;
        Ok(self.model.decode_constrained(&seq)?.0)
    }
}

fn tokenized_pairs(
    model: &Seq2SeqModel,
    examples: &[(&str, &str)],
) -> Result<Vec<(TokenSeq, LabelTokenPair)>> {
    examples
        .iter()
        .map(|(essay, label)| {
            Ok((model.tokenize(essay)?, LabelTokenPair::for_label(&model.vocab, label)?))
        })
        .collect()
}

/// One pass over the examples in shuffled minibatches, averaging gradients
/// within each batch. Returns the mean loss over the epoch as visited.
fn run_epoch(
    model: &mut Seq2SeqModel,
    opt: &mut AdamState,
    pairs: &[(TokenSeq, LabelTokenPair)],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for batch in order.chunks(batch_size) {
        for &i in batch {
            let (seq, target) = &pairs[i];
            total += model.nll_and_grad(seq, target)?;
        }
        model.params.scale_grads(1.0 / batch.len() as f64);
        adam_step(&mut model.params, opt)?;
    }
    Ok(total / pairs.len() as f64)
}

fn mean_nll(model: &Seq2SeqModel, pairs: &[(TokenSeq, LabelTokenPair)]) -> Result<f64> {
    let mut total = 0.0;
    for (seq, target) in pairs {
        total += model.nll(seq, target)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Trains a generation model from scratch on one labeled corpus.
pub fn train_generator(train: &Dataset, hyper: &Track2Hyper) -> Result<GenEmotionModel> {
    hyper.validate()?;
    let examples = labeled_examples(train)?;
    let essays: Vec<&str> = examples.iter().map(|(essay, _)| *essay).collect();
    let vocab = Vocab::build(&essays, hyper.vocab_min_freq, hyper.vocab_max_size)?;
    let mut model = Seq2SeqModel::new(vocab, hyper.dims, hyper.seed)?;
    let pairs = tokenized_pairs(&model, &examples)?;

    let mut opt = AdamState::new(&model.params, hyper.lr)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ SHUFFLE_SALT);
    let mut train_log = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        train_log.push(run_epoch(&mut model, &mut opt, &pairs, hyper.batch_size, &mut rng)?);
    }
    Ok(GenEmotionModel { model, provenance: vec![train.provenance.clone()], train_log })
}

/// Two-stage training: converge on an auxiliary emotion corpus first, then
/// fine-tune on the main corpus with a fresh optimizer. With an empty
/// auxiliary corpus this is exactly `train_generator` on the main corpus.
pub fn staged_finetune(aux: &Dataset, main: &Dataset, hyper: &Track2Hyper) -> Result<GenEmotionModel> {
    if aux.records.is_empty() {
        return train_generator(main, hyper);
    }
    hyper.validate()?;
    let aux_examples = labeled_examples(aux)?;
    let main_examples = labeled_examples(main)?;
    let essays: Vec<&str> = aux_examples
        .iter()
        .chain(main_examples.iter())
        .map(|(essay, _)| *essay)
        .collect();
    let vocab = Vocab::build(&essays, hyper.vocab_min_freq, hyper.vocab_max_size)?;
    let mut model = Seq2SeqModel::new(vocab, hyper.dims, hyper.seed)?;

    // Stage one runs against a carved-out slice of the auxiliary corpus and
    // stops once its loss has failed to improve for `patience` epochs. When
    // the corpus is too small to carve, the whole corpus plays both roles.
    let carve = aux.records.len() >= 2
        && ((aux.records.len() as f64) * (1.0 - hyper.stage1_valid_ratio)).floor() >= 1.0;
    let (fit_pairs, valid_pairs) = if carve {
        let split = split_dataset(aux, 1.0 - hyper.stage1_valid_ratio, hyper.seed)?;
        (
            tokenized_pairs(&model, &labeled_examples(&split.train)?)?,
            tokenized_pairs(&model, &labeled_examples(&split.valid)?)?,
        )
    } else {
        let all = tokenized_pairs(&model, &aux_examples)?;
        (all.clone(), all)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ SHUFFLE_SALT);
    let mut train_log = Vec::new();
    let mut opt = AdamState::new(&model.params, hyper.lr)?;
    let mut best = f64::INFINITY;
    let mut streak = 0;
    for _ in 0..hyper.stage1_max_epochs {
        train_log.push(run_epoch(&mut model, &mut opt, &fit_pairs, hyper.batch_size, &mut rng)?);
        let vloss = mean_nll(&model, &valid_pairs)?;
        if vloss < best - 1e-12 {
            best = vloss;
            streak = 0;
        } else {
            streak += 1;
            if streak >= hyper.patience {
                break;
            }
        }
    }

    let main_pairs = tokenized_pairs(&model, &main_examples)?;
    let mut opt = AdamState::new(&model.params, hyper.lr)?;
    for _ in 0..hyper.epochs {
        train_log.push(run_epoch(&mut model, &mut opt, &main_pairs, hyper.batch_size, &mut rng)?);
    }
    Ok(GenEmotionModel {
        model,
        provenance: vec![aux.provenance.clone(), main.provenance.clone()],
        train_log,
    })
}
