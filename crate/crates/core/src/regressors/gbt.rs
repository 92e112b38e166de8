use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// A depth-limited regression tree with exact greedy squared-error splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

struct BestSplit {
    sse: f64,
    feature: usize,
    threshold: f64,
}

/// Lowest split SSE wins; ties break toward the lowest feature index, then
/// the lowest threshold (features ascend in the outer loop and thresholds
/// ascend within one, so first-strictly-better keeps the earliest winner).
fn best_split(x: &Array2<f64>, target: &[f64], members: &[usize]) -> Option<BestSplit> {
    let total_y: f64 = members.iter().map(|&i| target[i]).sum();
    let total_yy: f64 = members.iter().map(|&i| target[i] * target[i]).sum();
    let mut best: Option<BestSplit> = None;
    for feature in 0..x.ncols() {
        let mut order = members.to_vec();
        order.sort_by(|&a, &b| x[[a, feature]].total_cmp(&x[[b, feature]]).then(a.cmp(&b)));
        let (mut cn, mut cy, mut cyy) = (0usize, 0.0, 0.0);
        for pos in 0..order.len() - 1 {
            let i = order[pos];
            cn += 1;
            cy += target[i];
            cyy += target[i] * target[i];
            let here = x[[i, feature]];
            let next = x[[order[pos + 1], feature]];
            if here == next {
                continue;
            }
            let rn = order.len() - cn;
            let (ry, ryy) = (total_y - cy, total_yy - cyy);
            let sse = (cyy - cy * cy / cn as f64) + (ryy - ry * ry / rn as f64);
            if best.as_ref().is_none_or(|b| sse < b.sse) {
                best = Some(BestSplit { sse, feature, threshold: (here + next) / 2.0 });
            }
        }
    }
    best
}

/// Splits whenever any boundary exists, even at zero SSE improvement; a
/// symmetric target (both halves of an interaction having equal means) must
/// still be cut so the children can resolve it.
fn fit_tree(x: &Array2<f64>, target: &[f64], members: &[usize], depth: usize) -> TreeNode {
    let mean = members.iter().map(|&i| target[i]).sum::<f64>() / members.len() as f64;
    if depth == 0 || members.len() < 2 {
        return TreeNode::Leaf { value: mean };
    }
    let Some(split) = best_split(x, target, members) else {
        return TreeNode::Leaf { value: mean };
    };
    let (left, right): (Vec<usize>, Vec<usize>) =
        members.iter().partition(|&&i| x[[i, split.feature]] <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(fit_tree(x, target, &left, depth - 1)),
        right: Box::new(fit_tree(x, target, &right, depth - 1)),
    }
}

/// Squared-error gradient boosting: a constant at the training-target mean
/// plus shrunk trees fit to residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub dim: usize,
    pub initial: f64,
    pub shrinkage: f64,
    pub trees: Vec<TreeNode>,
}

impl GbtModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.initial + self.shrinkage * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct GbtFit {
    pub model: GbtModel,
    /// Training SSE after the initial constant and after each stage.
    pub sse_log: Vec<f64>,
}

pub fn fit_gbt(x: &Array2<f64>, y: &[f64], trees: usize, depth: usize, shrinkage: f64) -> GbtFit {
    let n = y.len();
    let members: Vec<usize> = (0..n).collect();
    let initial = y.iter().sum::<f64>() / n as f64;
    let mut preds = vec![initial; n];
    let sse = |preds: &[f64]| preds.iter().zip(y).map(|(p, y)| (p - y).powi(2)).sum::<f64>();

    let mut model = GbtModel { dim: x.ncols(), initial, shrinkage, trees: Vec::new() };
    let mut sse_log = vec![sse(&preds)];
    for _ in 0..trees {
        let residuals: Vec<f64> = y.iter().zip(&preds).map(|(y, p)| y - p).collect();
        let tree = fit_tree(x, &residuals, &members, depth);
        for (i, pred) in preds.iter_mut().enumerate() {
            let row: Vec<f64> = x.row(i).to_vec();
            *pred += shrinkage * tree.predict(&row);
        }
        model.trees.push(tree);
        sse_log.push(sse(&preds));
    }
    GbtFit { model, sse_log }
}
