use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nncore::{adam_step, AdamState, LayerKind, LayerSpec, ParameterStore};

/// One fully connected layer: row-major `rows x cols` weights plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Feed-forward regressor with rectified hidden layers and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub dim: usize,
    /// Layer widths from input to output, e.g. `[140, 64, 32, 1]`.
    pub sizes: Vec<usize>,
    pub layers: Vec<DenseLayer>,
}

impl MlpModel {
    /// Plain forward pass over the serialized weights.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut h = x.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = layer.b.clone();
            for (i, &hi) in h.iter().enumerate() {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += hi * layer.w[i * layer.cols + j];
                }
            }
            if k < last {
                for o in &mut out {
                    *o = o.max(0.0);
                }
            }
            h = out;
        }
        h[0]
    }
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    pub model: MlpModel,
    /// Training RMSE at the start of each epoch.
    pub train_log: Vec<f64>,
}

/// Full-batch Adam on mean squared error.
pub fn fit_mlp(
    x: &Array2<f64>,
    y: &[f64],
    hidden: &[usize],
    lr: f64,
    epochs: usize,
    seed: u64,
) -> Result<MlpFit> {
    let n = x.nrows();
    let mut sizes = vec![x.ncols()];
    sizes.extend_from_slice(hidden);
    sizes.push(1);

    let specs: Vec<LayerSpec> = sizes
        .windows(2)
        .enumerate()
        .map(|(i, pair)| LayerSpec {
            name: format!("l{i}"),
            kind: LayerKind::Linear { input: pair[0], output: pair[1] },
        })
        .collect();
    let mut store = ParameterStore::init(specs, seed)?;
    let mut adam = AdamState::new(&store, lr)?;

    let targets = Array1::from_iter(y.iter().copied());
    let layer_count = sizes.len() - 1;
    let mut train_log = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        // Forward, keeping pre-activations for the backward pass.
        let mut pres: Vec<Array2<f64>> = Vec::with_capacity(layer_count);
        let mut acts: Vec<Array2<f64>> = vec![x.clone()];
        for k in 0..layer_count {
            let name = format!("l{k}");
            let pre = acts[k].dot(&store.view2(&format!("{name}.w")))
                + &store.view1(&format!("{name}.b"));
            let act = if k + 1 < layer_count { pre.mapv(|v| v.max(0.0)) } else { pre.clone() };
            pres.push(pre);
            acts.push(act);
        }
        let preds = acts[layer_count].column(0).to_owned();
        let residuals = &preds - &targets;
        train_log.push((residuals.mapv(|r| r * r).sum() / n as f64).sqrt());

        let mut grad = {
            let col = residuals.mapv(|r| 2.0 * r / n as f64);
            col.insert_axis(Axis(1))
        };
        for k in (0..layer_count).rev() {
            let name = format!("l{k}");
            store.add_grad2(&format!("{name}.w"), &acts[k].t().dot(&grad));
            store.add_grad1(&format!("{name}.b"), &grad.sum_axis(Axis(0)));
            if k > 0 {
                let upstream = grad.dot(&store.view2(&format!("{name}.w")).t());
                grad = upstream * pres[k - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            }
        }
        adam_step(&mut store, &mut adam)?;
    }

    let layers = (0..layer_count)
        .map(|k| DenseLayer {
            rows: sizes[k],
            cols: sizes[k + 1],
            w: store.values(&format!("l{k}.w")).to_vec(),
            b: store.values(&format!("l{k}.b")).to_vec(),
        })
        .collect();
    Ok(MlpFit { model: MlpModel { dim: sizes[0], sizes, layers }, train_log })
}
