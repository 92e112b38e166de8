use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::layers::{
    attention_backward, attention_forward, embedding_gather, feed_forward_backward,
    feed_forward_forward, layer_norm_backward, layer_norm_forward, sinusoidal_positions,
    AttentionCache, AttentionWeights, FeedForwardCache, FeedForwardWeights, LayerNormCache,
};
use crate::nncore::{LayerKind, LayerSpec, ParameterStore};
use crate::textenc::vocab::{tokenize, TokenSeq, Vocab};

/// Transformer dimensions shared by the encoder and (where present) the
/// decoder stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderDims {
    pub layers: usize,
    pub model_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
}

impl Default for EncoderDims {
    fn default() -> Self {
        EncoderDims {
            layers: 2,
            model_dim: 64,
            heads: 4,
            ff_dim: 128,
            max_len: 128,
        }
    }
}

impl EncoderDims {
    pub fn validate(&self) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::Config("encoder needs at least one layer".into()));
        }
        if self.max_len < 2 {
            return Err(Error::Config(format!(
                "max_len must be at least 2, got {}",
                self.max_len
            )));
        }
        Ok(())
    }
}

/// Layer specs for one encoder stack under `prefix`: embedding, then per
/// block pre-norm self-attention and feed-forward, then a final layer norm.
pub(crate) fn encoder_layer_specs(
    prefix: &str,
    vocab_size: usize,
    dims: &EncoderDims,
) -> Vec<LayerSpec> {
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
            format!("{prefix}.b{b}.attn"),
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
    specs
}

pub(crate) struct EncoderBlockTrace {
    ln1: LayerNormCache,
    attn: AttentionCache,
    ln2: LayerNormCache,
    ff: FeedForwardCache,
}

pub(crate) struct EncoderTrace {
    ids: Vec<usize>,
    blocks: Vec<EncoderBlockTrace>,
    final_ln: LayerNormCache,
}

/// Runs the encoder stack under `prefix` over the non-padding ids only, so
/// the result is independent of anything in the pad region. Returns the
/// final hidden states (one row per real token) and the caches needed for
/// the backward pass.
pub(crate) fn encoder_forward(
    store: &ParameterStore,
    prefix: &str,
    dims: &EncoderDims,
    ids: &[usize],
) -> (Array2<f64>, EncoderTrace) {
    let d = dims.model_dim;
    let scale = (d as f64).sqrt();
    let emb = store.view2(&format!("{prefix}.emb.weight"));
    let mut h = embedding_gather(&emb, ids, scale) + sinusoidal_positions(ids.len(), d);

    let mut blocks = Vec::with_capacity(dims.layers);
    for b in 0..dims.layers {
        let ln1_gain = store.view1(&format!("{prefix}.b{b}.ln1.gain"));
        let ln1_shift = store.view1(&format!("{prefix}.b{b}.ln1.shift"));
        let (normed1, ln1) = layer_norm_forward(&h, &ln1_gain, &ln1_shift);
        let attn_w = AttentionWeights::from_store(store, &format!("{prefix}.b{b}.attn"), dims.heads);
        let (attn_out, attn) = attention_forward(&attn_w, &normed1, &normed1, false);
        h = h + attn_out;

        let ln2_gain = store.view1(&format!("{prefix}.b{b}.ln2.gain"));
        let ln2_shift = store.view1(&format!("{prefix}.b{b}.ln2.shift"));
        let (normed2, ln2) = layer_norm_forward(&h, &ln2_gain, &ln2_shift);
        let ff_w = FeedForwardWeights::from_store(store, &format!("{prefix}.b{b}.ff"));
        let (ff_out, ff) = feed_forward_forward(&normed2, &ff_w);
        h = h + ff_out;

        blocks.push(EncoderBlockTrace { ln1, attn, ln2, ff });
    }

    let fin_gain = store.view1(&format!("{prefix}.final_ln.gain"));
    let fin_shift = store.view1(&format!("{prefix}.final_ln.shift"));
    let (out, final_ln) = layer_norm_forward(&h, &fin_gain, &fin_shift);
    (
        out,
        EncoderTrace {
            ids: ids.to_vec(),
            blocks,
            final_ln,
        },
    )
}

/// Accumulates gradients for one encoder forward into the store and
/// returns nothing; embedding rows receive their scaled share.
pub(crate) fn encoder_backward(
    store: &mut ParameterStore,
    prefix: &str,
    dims: &EncoderDims,
    trace: &EncoderTrace,
    grad_out: &Array2<f64>,
) {
    let d = dims.model_dim;
    let scale = (d as f64).sqrt();

    let (mut grad_h, g_gain, g_shift) = {
        let gain = store.view1(&format!("{prefix}.final_ln.gain"));
        layer_norm_backward(&trace.final_ln, &gain, grad_out)
    };
    store.add_grad1(&format!("{prefix}.final_ln.gain"), &g_gain);
    store.add_grad1(&format!("{prefix}.final_ln.shift"), &g_shift);

    for b in (0..dims.layers).rev() {
        let tb = &trace.blocks[b];

        // h = h_mid + ff(ln2(h_mid))
        let (grad_normed2, ff_grads) = {
            let ff_w = FeedForwardWeights::from_store(store, &format!("{prefix}.b{b}.ff"));
            feed_forward_backward(&tb.ff, &ff_w, &grad_h)
        };
        ff_grads.apply_to(store, &format!("{prefix}.b{b}.ff"));
        let (grad_mid, g_gain2, g_shift2) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln2.gain"));
            layer_norm_backward(&tb.ln2, &gain, &grad_normed2)
        };
        store.add_grad1(&format!("{prefix}.b{b}.ln2.gain"), &g_gain2);
        store.add_grad1(&format!("{prefix}.b{b}.ln2.shift"), &g_shift2);
        grad_h = grad_h + grad_mid;

        // h_mid = h_in + attn(ln1(h_in))
        let attn_grads = {
            let attn_w =
                AttentionWeights::from_store(store, &format!("{prefix}.b{b}.attn"), dims.heads);
            attention_backward(&tb.attn, &attn_w, &grad_h)
        };
        attn_grads.apply_to(store, &format!("{prefix}.b{b}.attn"));
        let grad_normed1 = &attn_grads.q_input + &attn_grads.kv_input;
        let (grad_in, g_gain1, g_shift1) = {
            let gain = store.view1(&format!("{prefix}.b{b}.ln1.gain"));
            layer_norm_backward(&tb.ln1, &gain, &grad_normed1)
        };
        store.add_grad1(&format!("{prefix}.b{b}.ln1.gain"), &g_gain1);
        store.add_grad1(&format!("{prefix}.b{b}.ln1.shift"), &g_shift1);
        grad_h = grad_h + grad_in;
    }

    store.add_grad_rows(&format!("{prefix}.emb.weight"), &trace.ids, &grad_h, scale);
}

/// A text encoder: vocabulary, parameters, dimensions. The parameter store
/// may carry extra task-head entries beyond the encoder stack itself.
#[derive(Debug, Clone)]
pub struct EncoderModel {
    pub vocab: Vocab,
    pub dims: EncoderDims,
    pub params: ParameterStore,
}

impl EncoderModel {
    pub fn new(vocab: Vocab, dims: EncoderDims, seed: u64) -> Result<EncoderModel> {
        dims.validate()?;
        let specs = encoder_layer_specs("enc", vocab.size(), &dims);
        let params = ParameterStore::init(specs, seed)?;
        Ok(EncoderModel { vocab, dims, params })
    }

    /// Same as [`EncoderModel::new`] plus a linear head on the pooled
    /// output, drawn in the same deterministic init pass.
    pub fn with_head(
        vocab: Vocab,
        dims: EncoderDims,
        head_output: usize,
        seed: u64,
    ) -> Result<EncoderModel> {
        dims.validate()?;
        let mut specs = encoder_layer_specs("enc", vocab.size(), &dims);
        specs.push(LayerSpec::new(
            "head",
            LayerKind::Linear {
                input: dims.model_dim,
                output: head_output,
            },
        ));
        let params = ParameterStore::init(specs, seed)?;
        Ok(EncoderModel { vocab, dims, params })
    }

    pub fn tokenize(&self, text: &str) -> Result<TokenSeq> {
        tokenize(text, &self.vocab, self.dims.max_len)
    }

    /// Full transformer forward; returns the position-0 (classification
    /// token) hidden state of the final layer.
    pub fn encode_pooled(&self, seq: &TokenSeq) -> Result<Vec<f64>> {
        if seq.ids.len() != self.dims.max_len {
            return Err(Error::Argument(format!(
                "sequence length {} does not match model max_len {}",
                seq.ids.len(),
                self.dims.max_len
            )));
        }
        let (hidden, _) = encoder_forward(&self.params, "enc", &self.dims, seq.real_ids());
        Ok(hidden.row(0).to_vec())
    }
}
