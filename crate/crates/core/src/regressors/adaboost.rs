use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A depth-one regression rule: `left` where the feature is at or below the
/// threshold, `right` above it. Thresholds are midpoints of consecutive
/// distinct training values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    pub left: f64,
    pub right: f64,
}

impl Stump {
    pub fn predict(&self, x: &[f64]) -> f64 {
        if x[self.feature] <= self.threshold { self.left } else { self.right }
    }
}

/// Boosted stump ensemble; each learner carries its `ln(1/beta)` vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub dim: usize,
    pub learners: Vec<(Stump, f64)>,
}

impl AdaBoostModel {
    /// Weighted median of the learner outputs: the smallest prediction whose
    /// cumulative vote reaches half the total.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut preds: Vec<(f64, f64)> =
            self.learners.iter().map(|(s, vote)| (s.predict(x), *vote)).collect();
        preds.sort_by(|a, b| a.0.total_cmp(&b.0));
        let half = preds.iter().map(|(_, v)| v).sum::<f64>() / 2.0;
        let mut acc = 0.0;
        for (pred, vote) in &preds {
            acc += vote;
            if acc >= half {
                return *pred;
            }
        }
        preds.last().expect("at least one learner").0
    }
}

/// Fit artifacts kept for diagnostics: the per-round sample-weight
/// distribution (after each accepted round) and average loss.
#[derive(Debug, Clone)]
pub struct AdaBoostFit {
    pub model: AdaBoostModel,
    pub weight_history: Vec<Vec<f64>>,
    pub loss_log: Vec<f64>,
}

/// Minimizes weighted squared error exactly: per feature, candidate
/// thresholds are the midpoints between consecutive distinct sorted values;
/// ties break toward the lowest feature index, then the lowest threshold.
fn fit_stump(x: &Array2<f64>, y: &[f64], w: &[f64]) -> Stump {
    let n = y.len();
    let total_w: f64 = w.iter().sum();
    let total_wy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let total_wyy: f64 = w.iter().zip(y).map(|(w, y)| w * y * y).sum();
    let overall_mean = if total_w > 0.0 { total_wy / total_w } else { 0.0 };

    let mut best: Option<(f64, Stump)> = None;
    for feature in 0..x.ncols() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
        let (mut cw, mut cwy, mut cwyy) = (0.0, 0.0, 0.0);
        for pos in 0..n - 1 {
            let i = order[pos];
            cw += w[i];
            cwy += w[i] * y[i];
            cwyy += w[i] * y[i] * y[i];
            let here = x[[i, feature]];
            let next = x[[order[pos + 1], feature]];
            if here == next {
                continue;
            }
            let (rw, rwy, rwyy) = (total_w - cw, total_wy - cwy, total_wyy - cwyy);
            if cw <= 0.0 || rw <= 0.0 {
                continue;
            }
            let sse = (cwyy - cwy * cwy / cw) + (rwyy - rwy * rwy / rw);
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((
                    sse,
                    Stump {
                        feature,
                        threshold: (here + next) / 2.0,
                        left: cwy / cw,
                        right: rwy / rw,
                    },
                ));
            }
        }
    }
    // Every feature constant: fall back to a flat rule at the weighted mean.
    best.map(|(_, s)| s).unwrap_or(Stump {
        feature: 0,
        threshold: x[[0, 0]],
        left: overall_mean,
        right: overall_mean,
    })
}

/// Drucker's AdaBoost.R2 with the linear loss.
///
/// Each round fits a stump against the current sample-weight distribution
/// (a deterministic weighted fit rather than weight-proportional
/// resampling), computes per-sample losses `|err| / max|err|`, and stops
/// early when the average loss reaches 0.5. A perfect round would send beta
/// to zero and wipe the distribution, so beta is floored at 1e-12, which
/// caps a single vote at `ln(1e12)` and turns the reweighting into a
/// renormalized uniform update.
pub fn fit_adaboost(x: &Array2<f64>, y: &[f64], rounds: usize) -> Result<AdaBoostFit> {
    let n = y.len();
    let mut p = vec![1.0 / n as f64; n];
    let mut learners = Vec::new();
    let mut weight_history = Vec::new();
    let mut loss_log = Vec::new();

    for _ in 0..rounds {
        let stump = fit_stump(x, y, &p);
        let errs: Vec<f64> = (0..n)
            .map(|i| {
                let row: Vec<f64> = x.row(i).to_vec();
                (stump.predict(&row) - y[i]).abs()
            })
            .collect();
        let max_err = errs.iter().fold(0.0f64, |a, &b| a.max(b));
        let losses: Vec<f64> = if max_err > 0.0 {
            errs.iter().map(|e| e / max_err).collect()
        } else {
            vec![0.0; n]
        };
        let avg_loss: f64 = losses.iter().zip(&p).map(|(l, p)| l * p).sum();
        if avg_loss >= 0.5 {
            break;
        }
        let beta = (avg_loss / (1.0 - avg_loss)).max(1e-12);
        learners.push((stump, (1.0 / beta).ln()));
        loss_log.push(avg_loss);
        for (pi, li) in p.iter_mut().zip(&losses) {
            *pi *= beta.powf(1.0 - li);
        }
        let sum: f64 = p.iter().sum();
        for pi in &mut p {
            *pi /= sum;
        }
        weight_history.push(p.clone());
    }

    if learners.is_empty() {
        return Err(Error::Training(
            "boosting stopped in round 1: first weak learner has average loss >= 0.5".into(),
        ));
    }
    Ok(AdaBoostFit {
        model: AdaBoostModel { dim: x.ncols(), learners },
        weight_history,
        loss_log,
    })
}
