use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nncore::layers::{
    attention_backward, attention_forward, embedding_gather, feed_forward_backward,
    feed_forward_forward, layer_norm_backward, layer_norm_forward, linear_backward,
    linear_forward, sinusoidal_positions, AttentionCache, AttentionWeights, FeedForwardCache,
    FeedForwardWeights, LayerNormCache,
};
use crate::nncore::ops::{log_softmax, nll_loss, softmax};
use crate::nncore::{LayerKind, LayerSpec, ParameterStore};
use crate::textenc::encoder::{
    encoder_backward, encoder_forward, encoder_layer_specs, EncoderDims, EncoderTrace,
};
use crate::textenc::vocab::{tokenize, TokenSeq, Vocab, CLS_ID, EOS_ID};

/// The two-token generation target: one label token, then end-of-sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelTokenPair {
    pub label_id: usize,
    pub eos_id: usize,
}

impl LabelTokenPair {
    pub fn for_label(vocab: &Vocab, label: &str) -> Result<LabelTokenPair> {
        let label_id = vocab
            .label_id(label)
            .ok_or_else(|| Error::Argument(format!("unknown emotion label \"{label}\"")))?;
        Ok(LabelTokenPair {
            label_id,
            eos_id: EOS_ID,
        })
    }

    pub fn validate(&self, vocab: &Vocab) -> Result<()> {
        if !vocab.is_label_id(self.label_id) {
            return Err(Error::Argument(format!(
                "target token id {} is not in the label block",
                self.label_id
            )));
        }
        if self.eos_id != EOS_ID {
            return Err(Error::Argument(format!(
                "target must end with the eos token, got id {}",
                self.eos_id
            )));
        }
        Ok(())
    }
}

fn decoder_layer_specs(prefix: &str, vocab_size: usize, dims: &EncoderDims) -> Vec<LayerSpec> {
    let mut specs = vec![LayerSpec::new(
        format!("{prefix}.emb"),
        LayerKind::Embedding {
            vocab_size,
            dim: dims.model_dim,
        },
    )];
    for b in 0..dims.layers {
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.ln1"),
            LayerKind::LayerNorm { dim: dims.model_dim },
        ));
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.self_attn"),
            LayerKind::MultiHeadAttention {
                model_dim: dims.model_dim,
                heads: dims.heads,
            },
        ));
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.ln2"),
            LayerKind::LayerNorm { dim: dims.model_dim },
        ));
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.cross_attn"),
            LayerKind::MultiHeadAttention {
                model_dim: dims.model_dim,
                heads: dims.heads,
            },
        ));
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.ln3"),
            LayerKind::LayerNorm { dim: dims.model_dim },
        ));
        specs.push(LayerSpec::new(
            format!("{prefix}.b{b}.ff"),
            LayerKind::FeedForwardGelu {
                model_dim: dims.model_dim,
                ff_dim: dims.ff_dim,
            },
        ));
    }
    specs.push(LayerSpec::new(
        format!("{prefix}.final_ln"),
        LayerKind::LayerNorm { dim: dims.model_dim },
    ));
    specs.push(LayerSpec::new(
        format!("{prefix}.head"),
        LayerKind::SoftmaxHead {
            input: dims.model_dim,
            output: vocab_size,
        },
    ));
    specs
}

struct DecoderBlockTrace {
    ln1: LayerNormCache,
    self_attn: AttentionCache,
    ln2: LayerNormCache,
    cross_attn: AttentionCache,
    ln3: LayerNormCache,
    ff: FeedForwardCache,
}

struct DecoderTrace {
    ids: Vec<usize>,
    blocks: Vec<DecoderBlockTrace>,
    final_ln: LayerNormCache,
    final_hidden: Array2<f64>,
}

fn decoder_forward(
    store: &ParameterStore,
    prefix: &str,
    dims: &EncoderDims,
    ids: &[usize],
    memory: &Array2<f64>,
) -> (Array2<f64>, DecoderTrace) {
    let d = dims.model_dim;
    let scale = (d as f64).sqrt();
    let emb = store.view2(&format!("{prefix}.emb.weight"));
    let mut h = embedding_gather(&emb, ids, scale) + sinusoidal_positions(ids.len(), d);

    let mut blocks = Vec::with_capacity(dims.layers);
    for b in 0..dims.layers {
        let (normed1, ln1) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln1.gain"));
            let shift = store.view1(&format!("{prefix}.b{b}.ln1.shift"));
            layer_norm_forward(&h, &gain, &shift)
        };
        let attn_w =
            AttentionWeights::from_store(store, &format!("{prefix}.b{b}.self_attn"), dims.heads);
        let (self_out, self_attn) = attention_forward(&attn_w, &normed1, &normed1, true);
        h = h + self_out;

        let (normed2, ln2) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln2.gain"));
            let shift = store.view1(&format!("{prefix}.b{b}.ln2.shift"));
            layer_norm_forward(&h, &gain, &shift)
        };
        let cross_w =
            AttentionWeights::from_store(store, &format!("{prefix}.b{b}.cross_attn"), dims.heads);
        let (cross_out, cross_attn) = attention_forward(&cross_w, &normed2, memory, false);
        h = h + cross_out;

        let (normed3, ln3) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln3.gain"));
            let shift = store.view1(&format!("{prefix}.b{b}.ln3.shift"));
            layer_norm_forward(&h, &gain, &shift)
        };
        let ff_w = FeedForwardWeights::from_store(store, &format!("{prefix}.b{b}.ff"));
        let (ff_out, ff) = feed_forward_forward(&normed3, &ff_w);
        h = h + ff_out;

        blocks.push(DecoderBlockTrace {
            ln1,
            self_attn,
            ln2,
            cross_attn,
            ln3,
            ff,
        });
    }

    let (final_hidden, final_ln) = {
        let gain = store.view1(&format!("{prefix}.final_ln.gain"));
        let shift = store.view1(&format!("{prefix}.final_ln.shift"));
        layer_norm_forward(&h, &gain, &shift)
    };
    let logits = linear_forward(
        &final_hidden,
        &store.view2(&format!("{prefix}.head.w")),
        &store.view1(&format!("{prefix}.head.b")),
    );
    (
        logits,
        DecoderTrace {
            ids: ids.to_vec(),
            blocks,
            final_ln,
            final_hidden,
        },
    )
}

/// Backward pass through the decoder stack; gradients for decoder
/// parameters are accumulated in the store and the gradient with respect
/// to the encoder memory is returned.
fn decoder_backward(
    store: &mut ParameterStore,
    prefix: &str,
    dims: &EncoderDims,
    trace: &DecoderTrace,
    grad_logits: &Array2<f64>,
) -> Array2<f64> {
    let d = dims.model_dim;
    let scale = (d as f64).sqrt();

    let (grad_final_hidden, g_hw, g_hb) = {
        let w = store.view2(&format!("{prefix}.head.w"));
        linear_backward(&trace.final_hidden, &w, grad_logits)
    };
    store.add_grad2(&format!("{prefix}.head.w"), &g_hw);
    store.add_grad1(&format!("{prefix}.head.b"), &g_hb);

    let (mut grad_h, g_gain, g_shift) = {
        let gain = store.view1(&format!("{prefix}.final_ln.gain"));
        layer_norm_backward(&trace.final_ln, &gain, &grad_final_hidden)
    };
    store.add_grad1(&format!("{prefix}.final_ln.gain"), &g_gain);
    store.add_grad1(&format!("{prefix}.final_ln.shift"), &g_shift);

    let mut grad_memory: Option<Array2<f64>> = None;
    for b in (0..dims.layers).rev() {
        let tb = &trace.blocks[b];

        let (grad_normed3, ff_grads) = {
            let ff_w = FeedForwardWeights::from_store(store, &format!("{prefix}.b{b}.ff"));
            feed_forward_backward(&tb.ff, &ff_w, &grad_h)
        };
        ff_grads.apply_to(store, &format!("{prefix}.b{b}.ff"));
        let (grad_mid, g3g, g3s) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln3.gain"));
            layer_norm_backward(&tb.ln3, &gain, &grad_normed3)
        };
        store.add_grad1(&format!("{prefix}.b{b}.ln3.gain"), &g3g);
        store.add_grad1(&format!("{prefix}.b{b}.ln3.shift"), &g3s);
        grad_h = grad_h + grad_mid;

        let cross_grads = {
            let w = AttentionWeights::from_store(
                store,
                &format!("{prefix}.b{b}.cross_attn"),
                dims.heads,
            );
            attention_backward(&tb.cross_attn, &w, &grad_h)
        };
        cross_grads.apply_to(store, &format!("{prefix}.b{b}.cross_attn"));
        grad_memory = Some(match grad_memory {
            Some(g) => g + &cross_grads.kv_input,
            None => cross_grads.kv_input.clone(),
        });
        let (grad_mid2, g2g, g2s) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln2.gain"));
            layer_norm_backward(&tb.ln2, &gain, &cross_grads.q_input)
        };
        store.add_grad1(&format!("{prefix}.b{b}.ln2.gain"), &g2g);
        store.add_grad1(&format!("{prefix}.b{b}.ln2.shift"), &g2s);
        grad_h = grad_h + grad_mid2;

        let self_grads = {
            let w = AttentionWeights::from_store(
                store,
                &format!("{prefix}.b{b}.self_attn"),
                dims.heads,
            );
            attention_backward(&tb.self_attn, &w, &grad_h)
        };
        self_grads.apply_to(store, &format!("{prefix}.b{b}.self_attn"));
        let grad_normed1 = &self_grads.q_input + &self_grads.kv_input;
        let (grad_in, g1g, g1s) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln1.gain"));
            layer_norm_backward(&tb.ln1, &gain, &grad_normed1)
        };
        store.add_grad1(&format!("{prefix}.b{b}.ln1.gain"), &g1g);
        store.add_grad1(&format!("{prefix}.b{b}.ln1.shift"), &g1s);
        grad_h = grad_h + grad_in;
    }

    store.add_grad_rows(&format!("{prefix}.emb.weight"), &trace.ids, &grad_h, scale);
    grad_memory.expect("decoder has at least one block")
}

/// Encoder-decoder for two-token label generation. Encoder and decoder
/// share the vocabulary but have separate parameters, all drawn in one
/// deterministic init pass.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub vocab: Vocab,
    pub dims: EncoderDims,
    pub params: ParameterStore,
}

impl Seq2SeqModel {
    pub fn new(vocab: Vocab, dims: EncoderDims, seed: u64) -> Result<Seq2SeqModel> {
        dims.validate()?;
        let mut specs = encoder_layer_specs("enc", vocab.size(), &dims);
        specs.extend(decoder_layer_specs("dec", vocab.size(), &dims));
        let params = ParameterStore::init(specs, seed)?;
        Ok(Seq2SeqModel { vocab, dims, params })
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSeq> {
        tokenize(text, &self.vocab, self.dims.max_len)
    }

    fn check_seq(&self, seq: &TokenSeq) -> Result<()> {
        if seq.ids.len() != self.dims.max_len {
            return Err(Error::Argument(format!(
                "sequence length {} does not match model max_len {}",
                seq.ids.len(),
                self.dims.max_len
            )));
        }
        Ok(())
    }

    fn forward(&self, src: &[usize], dec_ids: &[usize]) -> (Array2<f64>, EncoderTrace, DecoderTrace) {
        let (memory, enc_trace) = encoder_forward(&self.params, "enc", &self.dims, src);
        let (logits, dec_trace) = decoder_forward(&self.params, "dec", &self.dims, dec_ids, &memory);
        (logits, enc_trace, dec_trace)
    }

    /// Teacher-forced log-probabilities (log p(x1|c), log p(x2|x1,c)).
    pub fn seq2seq_logprob(&self, seq: &TokenSeq, target: &LabelTokenPair) -> Result<(f64, f64)> {
        self.check_seq(seq)?;
        target.validate(&self.vocab)?;
        let dec_ids = [CLS_ID, target.label_id];
        let (logits, _, _) = self.forward(seq.real_ids(), &dec_ids);
        let lp1 = log_softmax(logits.row(0).as_slice().unwrap())?[target.label_id];
        let lp2 = log_softmax(logits.row(1).as_slice().unwrap())?[target.eos_id];
        Ok((lp1, lp2))
    }

    /// Teacher-forced negative log-likelihood of one (essay, target) pair.
    pub fn nll(&self, seq: &TokenSeq, target: &LabelTokenPair) -> Result<f64> {
        let (lp1, lp2) = self.seq2seq_logprob(seq, target)?;
        nll_loss(&[lp1, lp2])
    }

    /// Computes the NLL and accumulates its gradients into the parameter
    /// store. Numerically identical to [`Seq2SeqModel::nll`].
    pub fn nll_and_grad(&mut self, seq: &TokenSeq, target: &LabelTokenPair) -> Result<f64> {
        self.check_seq(seq)?;
        target.validate(&self.vocab)?;
        let dec_ids = [CLS_ID, target.label_id];
        let (logits, enc_trace, dec_trace) = self.forward(seq.real_ids(), &dec_ids);

        let lp1 = log_softmax(logits.row(0).as_slice().unwrap())?[target.label_id];
        let lp2 = log_softmax(logits.row(1).as_slice().unwrap())?[target.eos_id];
        let loss = nll_loss(&[lp1, lp2])?;

        let vocab_size = self.vocab.size();
        let mut grad_logits = Array2::zeros((2, vocab_size));
        for (row, &tgt) in [target.label_id, target.eos_id].iter().enumerate() {
            let p = softmax(logits.row(row).as_slice().unwrap())?;
            for (j, &pj) in p.iter().enumerate() {
                grad_logits[[row, j]] = pj - if j == tgt { 1.0 } else { 0.0 };
            }
        }

        let grad_memory =
            decoder_backward(&mut self.params, "dec", &self.dims, &dec_trace, &grad_logits);
        encoder_backward(&mut self.params, "enc", &self.dims, &enc_trace, &grad_memory);
        Ok(loss)
    }

    /// Greedy constrained decoding: the first step's argmax is restricted
    /// to the seven label tokens, the second step is forced to eos.
    /// Returns the label string and the total log-probability of the
    /// emitted pair.
    pub fn decode_constrained(&self, seq: &TokenSeq) -> Result<(String, f64)> {
        self.check_seq(seq)?;
        let (memory, _) = encoder_forward(&self.params, "enc", &self.dims, seq.real_ids());

        let (logits1, _) = decoder_forward(&self.params, "dec", &self.dims, &[CLS_ID], &memory);
        let row0 = logits1.row(0);
        let label_id = constrained_argmax(row0.as_slice().unwrap());
        let lp1 = log_softmax(row0.as_slice().unwrap())?[label_id];

        let (logits2, _) =
            decoder_forward(&self.params, "dec", &self.dims, &[CLS_ID, label_id], &memory);
        let lp2 = log_softmax(logits2.row(1).as_slice().unwrap())?[EOS_ID];

        let label = self
            .vocab
            .label_of_id(label_id)
            .expect("constrained argmax stays in the label block");
        Ok((label.to_string(), lp1 + lp2))
    }
}

/// Argmax over the label-token block only; every other vocabulary id is
/// treated as masked to -inf. Exact ties go to the lowest token id.
pub fn constrained_argmax(logits: &[f64]) -> usize {
    use crate::textenc::vocab::{EMOTION_LABELS, LABEL_BLOCK_START};
    let mut best = LABEL_BLOCK_START;
    let mut best_val = logits[LABEL_BLOCK_START];
    for id in LABEL_BLOCK_START + 1..LABEL_BLOCK_START + EMOTION_LABELS.len() {
        if logits[id] > best_val {
            best = id;
            best_val = logits[id];
        }
    }
    best
}
