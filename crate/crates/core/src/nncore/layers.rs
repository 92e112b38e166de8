use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::nncore::params::ParameterStore;

/// Epsilon inside the layer-norm variance square root.
pub const LAYER_NORM_EPS: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

pub fn linear_forward(x: &Array2<f64>, w: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    x.dot(w) + b
}

/// Returns (grad_x, grad_w, grad_b).
pub fn linear_backward(
    x: &Array2<f64>,
    w: &ArrayView2<f64>,
    grad_y: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let grad_x = grad_y.dot(&w.t());
    let grad_w = x.t().dot(grad_y);
    let grad_b = grad_y.sum_axis(Axis(0));
    (grad_x, grad_w, grad_b)
}

// ---------------------------------------------------------------------------
// Layer norm (per row over the feature axis)
// ---------------------------------------------------------------------------

pub struct LayerNormCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

pub fn layer_norm_forward(
    x: &Array2<f64>,
    gain: &ArrayView1<f64>,
    shift: &ArrayView1<f64>,
) -> (Array2<f64>, LayerNormCache) {
    let (rows, dim) = x.dim();
    let mut xhat = Array2::zeros((rows, dim));
    let mut inv_std = Array1::zeros(rows);
    for r in 0..rows {
        let row = x.row(r);
        let mean = row.sum() / dim as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / dim as f64;
        let istd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std[r] = istd;
        for c in 0..dim {
            xhat[[r, c]] = (row[c] - mean) * istd;
        }
    }
    let mut y = xhat.clone();
    for mut row in y.rows_mut() {
        for c in 0..dim {
            row[c] = row[c] * gain[c] + shift[c];
        }
    }
    (y, LayerNormCache { xhat, inv_std })
}

/// Returns (grad_x, grad_gain, grad_shift).
pub fn layer_norm_backward(
    cache: &LayerNormCache,
    gain: &ArrayView1<f64>,
    grad_y: &Array2<f64>,
) -> (Array2<f64>, Array1<f64>, Array1<f64>) {
    let (rows, dim) = cache.xhat.dim();
    let mut grad_x = Array2::zeros((rows, dim));
    let mut grad_gain = Array1::zeros(dim);
    let mut grad_shift = Array1::zeros(dim);
    for r in 0..rows {
        let gy = grad_y.row(r);
        let xh = cache.xhat.row(r);
        let istd = cache.inv_std[r];
        let mut sum_dxhat = 0.0;
        let mut sum_dxhat_xhat = 0.0;
        for c in 0..dim {
            let dxhat = gy[c] * gain[c];
            sum_dxhat += dxhat;
            sum_dxhat_xhat += dxhat * xh[c];
            grad_gain[c] += gy[c] * xh[c];
            grad_shift[c] += gy[c];
        }
        let mean_dxhat = sum_dxhat / dim as f64;
        let mean_dxhat_xhat = sum_dxhat_xhat / dim as f64;
        for c in 0..dim {
            let dxhat = gy[c] * gain[c];
            grad_x[[r, c]] = istd * (dxhat - mean_dxhat - xh[c] * mean_dxhat_xhat);
        }
    }
    (grad_x, grad_gain, grad_shift)
}

// ---------------------------------------------------------------------------
// GELU (tanh approximation)
// ---------------------------------------------------------------------------

const GELU_C: f64 = 0.7978845608028654; // sqrt(2 / pi)
const GELU_K: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_K * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

// ---------------------------------------------------------------------------
// Feed-forward block: gelu(x w1 + b1) w2 + b2
// ---------------------------------------------------------------------------

pub struct FeedForwardWeights<'a> {
    pub w1: ArrayView2<'a, f64>,
    pub b1: ArrayView1<'a, f64>,
    pub w2: ArrayView2<'a, f64>,
    pub b2: ArrayView1<'a, f64>,
}

impl<'a> FeedForwardWeights<'a> {
    pub fn from_store(store: &'a ParameterStore, prefix: &str) -> Self {
        FeedForwardWeights {
            w1: store.view2(&format!("{prefix}.w1")),
            b1: store.view1(&format!("{prefix}.b1")),
            w2: store.view2(&format!("{prefix}.w2")),
            b2: store.view1(&format!("{prefix}.b2")),
        }
    }
}

pub struct FeedForwardCache {
    x: Array2<f64>,
    pre: Array2<f64>,
    hidden: Array2<f64>,
}

pub struct FeedForwardGrads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl FeedForwardGrads {
    pub fn apply_to(&self, store: &mut ParameterStore, prefix: &str) {
        store.add_grad2(&format!("{prefix}.w1"), &self.w1);
        store.add_grad1(&format!("{prefix}.b1"), &self.b1);
        store.add_grad2(&format!("{prefix}.w2"), &self.w2);
        store.add_grad1(&format!("{prefix}.b2"), &self.b2);
    }
}

pub fn feed_forward_forward(
    x: &Array2<f64>,
    w: &FeedForwardWeights,
) -> (Array2<f64>, FeedForwardCache) {
    let pre = x.dot(&w.w1) + &w.b1;
    let hidden = pre.mapv(gelu);
    let y = hidden.dot(&w.w2) + &w.b2;
    (
        y,
        FeedForwardCache {
            x: x.clone(),
            pre,
            hidden,
        },
    )
}

/// Returns (grad_x, weight grads).
pub fn feed_forward_backward(
    cache: &FeedForwardCache,
    w: &FeedForwardWeights,
    grad_y: &Array2<f64>,
) -> (Array2<f64>, FeedForwardGrads) {
    let grad_w2 = cache.hidden.t().dot(grad_y);
    let grad_b2 = grad_y.sum_axis(Axis(0));
    let grad_hidden = grad_y.dot(&w.w2.t());
    let grad_pre = &grad_hidden * &cache.pre.mapv(gelu_grad);
    let grad_w1 = cache.x.t().dot(&grad_pre);
    let grad_b1 = grad_pre.sum_axis(Axis(0));
    let grad_x = grad_pre.dot(&w.w1.t());
    (
        grad_x,
        FeedForwardGrads {
            w1: grad_w1,
            b1: grad_b1,
            w2: grad_w2,
            b2: grad_b2,
        },
    )
}

// ---------------------------------------------------------------------------
// Row-wise softmax used inside attention. Accepts -inf entries from masking;
// each row must keep at least one finite entry.
// ---------------------------------------------------------------------------

pub fn softmax_rows(scores: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = scores.dim();
    let mut out = Array2::zeros((rows, cols));
    for r in 0..rows {
        let row = scores.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        debug_assert!(max.is_finite(), "softmax row fully masked");
        let mut sum = 0.0;
        for c in 0..cols {
            let e = (row[c] - max).exp();
            out[[r, c]] = e;
            sum += e;
        }
        for c in 0..cols {
            out[[r, c]] /= sum;
        }
    }
    out
}

/// Jacobian-vector product through a row-wise softmax:
/// dx = p * (g - sum(g * p)) per row.
pub fn softmax_rows_backward(probs: &Array2<f64>, grad_probs: &Array2<f64>) -> Array2<f64> {
    let (rows, cols) = probs.dim();
    let mut grad = Array2::zeros((rows, cols));
    for r in 0..rows {
        let p = probs.row(r);
        let g = grad_probs.row(r);
        let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
        for c in 0..cols {
            grad[[r, c]] = p[c] * (g[c] - dot);
        }
    }
    grad
}

// ---------------------------------------------------------------------------
// Multi-head attention
// ---------------------------------------------------------------------------

/// Attention projections. The key projection has no bias: softmax is
/// invariant to the uniform score shift a key bias would produce, so the
/// parameter would be permanently dead.
pub struct AttentionWeights<'a> {
    pub wq: ArrayView2<'a, f64>,
    pub bq: ArrayView1<'a, f64>,
    pub wk: ArrayView2<'a, f64>,
    pub wv: ArrayView2<'a, f64>,
    pub bv: ArrayView1<'a, f64>,
    pub wo: ArrayView2<'a, f64>,
    pub bo: ArrayView1<'a, f64>,
    pub heads: usize,
}

impl<'a> AttentionWeights<'a> {
    pub fn from_store(store: &'a ParameterStore, prefix: &str, heads: usize) -> Self {
        AttentionWeights {
            wq: store.view2(&format!("{prefix}.wq")),
            bq: store.view1(&format!("{prefix}.bq")),
            wk: store.view2(&format!("{prefix}.wk")),
            wv: store.view2(&format!("{prefix}.wv")),
            bv: store.view1(&format!("{prefix}.bv")),
            wo: store.view2(&format!("{prefix}.wo")),
            bo: store.view1(&format!("{prefix}.bo")),
            heads,
        }
    }
}

pub struct AttentionCache {
    q_input: Array2<f64>,
    kv_input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Vec<Array2<f64>>,
    concat: Array2<f64>,
}

pub struct AttentionGrads {
    pub wq: Array2<f64>,
    pub bq: Array1<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub bv: Array1<f64>,
    pub wo: Array2<f64>,
    pub bo: Array1<f64>,
    /// Gradient flowing back to the query-side input.
    pub q_input: Array2<f64>,
    /// Gradient flowing back to the key/value-side input.
    pub kv_input: Array2<f64>,
}

impl AttentionGrads {
    pub fn apply_to(&self, store: &mut ParameterStore, prefix: &str) {
        store.add_grad2(&format!("{prefix}.wq"), &self.wq);
        store.add_grad1(&format!("{prefix}.bq"), &self.bq);
        store.add_grad2(&format!("{prefix}.wk"), &self.wk);
        store.add_grad2(&format!("{prefix}.wv"), &self.wv);
        store.add_grad1(&format!("{prefix}.bv"), &self.bv);
        store.add_grad2(&format!("{prefix}.wo"), &self.wo);
        store.add_grad1(&format!("{prefix}.bo"), &self.bo);
    }
}

/// Scaled dot-product attention over `heads` heads. `q_input` provides the
/// queries, `kv_input` the keys and values (pass the same array for
/// self-attention). With `causal` set, position i attends only to j <= i.
pub fn attention_forward(
    w: &AttentionWeights,
    q_input: &Array2<f64>,
    kv_input: &Array2<f64>,
    causal: bool,
) -> (Array2<f64>, AttentionCache) {
    let model_dim = w.wq.dim().0;
    debug_assert_eq!(q_input.dim().1, model_dim);
    debug_assert_eq!(kv_input.dim().1, model_dim);
    let d_head = model_dim / w.heads;
    let scale = 1.0 / (d_head as f64).sqrt();

    let q = q_input.dot(&w.wq) + &w.bq;
    let k = kv_input.dot(&w.wk);
    let v = kv_input.dot(&w.wv) + &w.bv;

    let lq = q.dim().0;
    let lk = k.dim().0;
    let mut concat = Array2::zeros((lq, model_dim));
    let mut attn = Vec::with_capacity(w.heads);
    for h in 0..w.heads {
        let cols = s![.., h * d_head..(h + 1) * d_head];
        let qh = q.slice(cols);
        let kh = k.slice(cols);
        let vh = v.slice(cols);
        let mut scores = qh.dot(&kh.t()) * scale;
        if causal {
            for i in 0..lq {
                for j in (i + 1)..lk {
                    scores[[i, j]] = f64::NEG_INFINITY;
                }
            }
        }
        let probs = softmax_rows(&scores);
        let ctx = probs.dot(&vh);
        concat.slice_mut(cols).assign(&ctx);
        attn.push(probs);
    }
    let out = concat.dot(&w.wo) + &w.bo;
    (
        out,
        AttentionCache {
            q_input: q_input.clone(),
            kv_input: kv_input.clone(),
            q,
            k,
            v,
            attn,
            concat,
        },
    )
}

pub fn attention_backward(
    cache: &AttentionCache,
    w: &AttentionWeights,
    grad_out: &Array2<f64>,
) -> AttentionGrads {
    let model_dim = w.wq.dim().0;
    let d_head = model_dim / w.heads;
    let scale = 1.0 / (d_head as f64).sqrt();
    let (lq, _) = cache.q.dim();
    let (lk, _) = cache.k.dim();

    let grad_wo = cache.concat.t().dot(grad_out);
    let grad_bo = grad_out.sum_axis(Axis(0));
    let grad_concat = grad_out.dot(&w.wo.t());

    let mut grad_q = Array2::zeros((lq, model_dim));
    let mut grad_k = Array2::zeros((lk, model_dim));
    let mut grad_v = Array2::zeros((lk, model_dim));
    for h in 0..w.heads {
        let cols = s![.., h * d_head..(h + 1) * d_head];
        let qh = cache.q.slice(cols);
        let kh = cache.k.slice(cols);
        let vh = cache.v.slice(cols);
        let probs = &cache.attn[h];
        let grad_ctx = grad_concat.slice(cols).to_owned();

        let grad_probs = grad_ctx.dot(&vh.t());
        let grad_vh = probs.t().dot(&grad_ctx);
        let grad_scores = softmax_rows_backward(probs, &grad_probs);
        let grad_qh = grad_scores.dot(&kh) * scale;
        let grad_kh = grad_scores.t().dot(&qh) * scale;

        grad_q.slice_mut(cols).assign(&grad_qh);
        grad_k.slice_mut(cols).assign(&grad_kh);
        grad_v.slice_mut(cols).assign(&grad_vh);
    }

    let (grad_q_input, grad_wq, grad_bq) = linear_backward(&cache.q_input, &w.wq, &grad_q);
    let grad_wk = cache.kv_input.t().dot(&grad_k);
    let gk_input = grad_k.dot(&w.wk.t());
    let (gv_input, grad_wv, grad_bv) = linear_backward(&cache.kv_input, &w.wv, &grad_v);
    let grad_kv_input = gk_input + gv_input;

    AttentionGrads {
        wq: grad_wq,
        bq: grad_bq,
        wk: grad_wk,
        wv: grad_wv,
        bv: grad_bv,
        wo: grad_wo,
        bo: grad_bo,
        q_input: grad_q_input,
        kv_input: grad_kv_input,
    }
}

// ---------------------------------------------------------------------------
// Embedding lookup and sinusoidal positions
// ---------------------------------------------------------------------------

/// Gathers embedding rows for `ids`, scaled by `scale`.
pub fn embedding_gather(table: &ArrayView2<f64>, ids: &[usize], scale: f64) -> Array2<f64> {
    let dim = table.dim().1;
    let mut out = Array2::zeros((ids.len(), dim));
    for (r, &id) in ids.iter().enumerate() {
        debug_assert!(id < table.dim().0, "token id {id} out of range");
        for c in 0..dim {
            out[[r, c]] = table[[id, c]] * scale;
        }
    }
    out
}

/// Fixed sine/cosine position encodings: even columns get
/// sin(pos / 10000^(c/dim)), odd columns the matching cosine.
pub fn sinusoidal_positions(len: usize, dim: usize) -> Array2<f64> {
    let mut out = Array2::zeros((len, dim));
    for pos in 0..len {
        for c in (0..dim).step_by(2) {
            let angle = pos as f64 / 10000f64.powf(c as f64 / dim as f64);
            out[[pos, c]] = angle.sin();
            if c + 1 < dim {
                out[[pos, c + 1]] = angle.cos();
            }
        }
    }
    out
}

impl ParameterStore {
    /// Accumulates embedding-row gradients: `grads[ids[r]] += rows[r] * scale`.
    pub fn add_grad_rows(&mut self, name: &str, ids: &[usize], rows: &Array2<f64>, scale: f64) {
        let e = self.entry_mut(name).expect("parameter exists");
        assert_eq!(e.shape.len(), 2, "{name} is not 2-D");
        let dim = e.shape[1];
        assert_eq!(rows.dim(), (ids.len(), dim), "gradient shape for {name}");
        for (r, &id) in ids.iter().enumerate() {
            assert!(id < e.shape[0], "token id {id} out of range");
            for c in 0..dim {
                e.grads[id * dim + c] += rows[[r, c]] * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn linear_matches_hand_computation() {
        let x = array![[1.0, 2.0], [0.5, -1.0]];
        let w = array![[1.0, 0.0, 2.0], [0.0, 1.0, -1.0]];
        let b = array![0.1, 0.2, 0.3];
        let y = linear_forward(&x, &w.view(), &b.view());
        let expect = array![[1.1, 2.2, 0.3], [0.6, -0.8, 2.3]];
        for (a, e) in y.iter().zip(expect.iter()) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_rows_have_zero_mean_unit_variance() {
        let x = array![[1.0, 2.0, 3.0, 4.0], [-5.0, 0.0, 5.0, 10.0]];
        let gain = Array1::ones(4);
        let shift = Array1::zeros(4);
        let (y, _) = layer_norm_forward(&x, &gain.view(), &shift.view());
        for row in y.rows() {
            let mean = row.sum() / 4.0;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gelu_fixed_points_and_symmetry() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(3.0) - 3.0).abs() < 1e-2);
        assert!(gelu(-3.0).abs() < 1e-2);
        // gelu(x) - gelu(-x) = x for the tanh form.
        for &x in &[0.3, 1.7, 2.5] {
            assert!((gelu(x) - gelu(-x) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn gelu_grad_matches_central_difference() {
        for &x in &[-2.0, -0.5, 0.0, 0.3, 1.0, 2.7] {
            let h = 1e-6;
            let numeric = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((gelu_grad(x) - numeric).abs() < 1e-8, "at {x}");
        }
    }

    #[test]
    fn softmax_rows_handles_masked_entries() {
        let scores = array![[0.0, f64::NEG_INFINITY], [1.0, 1.0]];
        let p = softmax_rows(&scores);
        assert_eq!(p[[0, 0]], 1.0);
        assert_eq!(p[[0, 1]], 0.0);
        assert!((p[[1, 0]] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn causal_attention_ignores_future_positions() {
        // With causal masking, changing a later row of the input must not
        // change earlier output rows.
        let store = ParameterStore::init(
            vec![crate::nncore::params::LayerSpec::new(
                "a",
                crate::nncore::params::LayerKind::MultiHeadAttention {
                    model_dim: 8,
                    heads: 2,
                },
            )],
            5,
        )
        .unwrap();
        let w = AttentionWeights::from_store(&store, "a", 2);
        let mut x = Array2::zeros((3, 8));
        for (i, v) in x.iter_mut().enumerate() {
            *v = (i as f64 * 0.13).sin();
        }
        let (y1, _) = attention_forward(&w, &x, &x, true);
        let mut x2 = x.clone();
        for c in 0..8 {
            x2[[2, c]] += 1.0;
        }
        let (y2, _) = attention_forward(&w, &x2, &x2, true);
        for c in 0..8 {
            assert_eq!(y1[[0, c]].to_bits(), y2[[0, c]].to_bits());
            assert_eq!(y1[[1, c]].to_bits(), y2[[1, c]].to_bits());
        }
    }

    #[test]
    fn attention_rows_sum_to_one() {
        let store = ParameterStore::init(
            vec![crate::nncore::params::LayerSpec::new(
                "a",
                crate::nncore::params::LayerKind::MultiHeadAttention {
                    model_dim: 4,
                    heads: 2,
                },
            )],
            1,
        )
        .unwrap();
        let w = AttentionWeights::from_store(&store, "a", 2);
        let x = Array2::from_shape_fn((4, 4), |(i, j)| ((i * 4 + j) as f64 * 0.21).cos());
        let (_, cache) = attention_forward(&w, &x, &x, true);
        for probs in &cache.attn {
            for row in probs.rows() {
                let sum: f64 = row.sum();
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sinusoidal_first_position_alternates_zero_one() {
        let pe = sinusoidal_positions(3, 6);
        for c in 0..6 {
            let expect = if c % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(pe[[0, c]], expect);
        }
        assert!((pe[[1, 0]] - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn embedding_gather_scales_rows() {
        let table = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let out = embedding_gather(&table.view(), &[2, 0], 2.0);
        let expect = array![[10.0, 12.0], [2.0, 4.0]];
        for (a, e) in out.iter().zip(expect.iter()) {
            assert_eq!(*a, *e);
        }
    }
}
