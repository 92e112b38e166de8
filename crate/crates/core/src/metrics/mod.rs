//! Evaluation metrics for both tracks: root-mean-squared error, Pearson
//! correlation and its two-target average, and the multiclass classification
//! report (per-label and macro/micro precision, recall, F1, accuracy,
//! confusion matrix).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regression-side evaluation for the empathy/distress task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionReport {
    pub rmse_empathy: f64,
    pub rmse_distress: f64,
    pub r_empathy: f64,
    pub r_distress: f64,
    pub r_avg: f64,
    pub n: usize,
}

/// Metrics for a single label within a classification report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Multiclass classification evaluation over a fixed label set.
///
/// Confusion matrix rows are gold labels, columns are predictions, both in
/// the order of `labels`; row sums equal gold supports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub labels: Vec<String>,
    pub per_label: Vec<LabelMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    pub n: usize,
}

/// Pearson correlation coefficient.
///
/// Errors when either vector is constant: the correlation is undefined there
/// and callers get an explicit error instead of NaN.
pub fn pearson(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "pearson: length mismatch ({} vs {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::Argument(
            "pearson: need at least 2 observations".into(),
        ));
    }
    let n = y_true.len() as f64;
    let mean_t = y_true.iter().sum::<f64>() / n;
    let mean_p = y_pred.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_t = 0.0;
    let mut var_p = 0.0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        let dt = t - mean_t;
        let dp = p - mean_p;
        cov += dt * dp;
        var_t += dt * dt;
        var_p += dp * dp;
    }
    if var_t == 0.0 || var_p == 0.0 {
        return Err(Error::Argument(
            "pearson: correlation undefined for a constant vector".into(),
        ));
    }
    Ok(cov / (var_t.sqrt() * var_p.sqrt()))
}

/// Root of the mean squared residual.
pub fn rmse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Argument(format!(
            "rmse: length mismatch ({} vs {})",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Argument("rmse: empty input".into()));
    }
    let n = y_true.len() as f64;
    let ss = y_true
        .iter()
        .zip(y_pred)
        .map(|(&t, &p)| (t - p) * (t - p))
        .sum::<f64>();
    Ok((ss / n).sqrt())
}

/// Arithmetic mean of the two per-target Pearson scores.
pub fn r_avg(r_empathy: f64, r_distress: f64) -> Result<f64> {
    // Computed correlations may exceed 1 by round-off; allow a hair of slack.
    for (name, r) in [("r_empathy", r_empathy), ("r_distress", r_distress)] {
        if !(r.abs() <= 1.0 + 1e-9) {
            return Err(Error::Argument(format!(
                "r_avg: {name}={r} outside [-1, 1]"
            )));
        }
    }
    Ok((r_empathy + r_distress) / 2.0)
}

/// Convenience wrapper building the full regression report for both targets.
pub fn regression_report(
    empathy_true: &[f64],
    empathy_pred: &[f64],
    distress_true: &[f64],
    distress_pred: &[f64],
) -> Result<RegressionReport> {
    let r_e = pearson(empathy_true, empathy_pred)?;
    let r_d = pearson(distress_true, distress_pred)?;
    Ok(RegressionReport {
        rmse_empathy: rmse(empathy_true, empathy_pred)?,
        rmse_distress: rmse(distress_true, distress_pred)?,
        r_empathy: r_e,
        r_distress: r_d,
        r_avg: r_avg(r_e, r_d)?,
        n: empathy_true.len(),
    })
}

/// Multiclass classification report over a fixed label set.
///
/// Zero denominators follow the usual convention (precision/recall/F1 of 0);
/// macro averages run over every label in `labels`, including zero-support
/// ones; micro metrics come from pooled counts. Per-label and micro F1 use
/// the pooled form `2*tp / (2*tp + fp + fn)`, so for single-label data over
/// the full label set micro precision, recall, F1 and accuracy coincide
/// exactly, not just within round-off.
pub fn classification_report(
    gold: &[&str],
    pred: &[&str],
    labels: &[&str],
) -> Result<ClassificationReport> {
    if gold.len() != pred.len() {
        return Err(Error::Argument(format!(
            "classification_report: length mismatch ({} vs {})",
            gold.len(),
            pred.len()
        )));
    }
    let k = labels.len();
    if k == 0 {
        return Err(Error::Argument(
            "classification_report: empty label set".into(),
        ));
    }
    let index_of = |l: &str| -> Result<usize> {
        labels
            .iter()
            .position(|&x| x == l)
            .ok_or_else(|| Error::Argument(format!("classification_report: unknown label \"{l}\"")))
    };

    let mut confusion = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(pred) {
        confusion[index_of(g)?][index_of(p)?] += 1;
    }

    let mut per_label = Vec::with_capacity(k);
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0usize, 0usize, 0usize);
    for i in 0..k {
        let tp = confusion[i][i];
        let support: usize = confusion[i].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[i]).sum();
        let fp = predicted - tp;
        let fn_ = support - tp;
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fn_;
        per_label.push(LabelMetrics {
            label: labels[i].to_string(),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            support,
        });
    }

    let kf = k as f64;
    let n = gold.len();
    Ok(ClassificationReport {
        labels: labels.iter().map(|s| s.to_string()).collect(),
        macro_precision: per_label.iter().map(|m| m.precision).sum::<f64>() / kf,
        macro_recall: per_label.iter().map(|m| m.recall).sum::<f64>() / kf,
        macro_f1: per_label.iter().map(|m| m.f1).sum::<f64>() / kf,
        micro_precision: ratio(tp_sum, tp_sum + fp_sum),
        micro_recall: ratio(tp_sum, tp_sum + fn_sum),
        micro_f1: ratio(2 * tp_sum, 2 * tp_sum + fp_sum + fn_sum),
        accuracy: if n == 0 { 0.0 } else { ratio(tp_sum, n) },
        per_label,
        confusion,
        n,
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Formats a metric to three decimals with half-up rounding.
///
/// A 1e-9 nudge toward the rounding direction absorbs the binary
/// representation error of decimal inputs, so a value entered as 0.4675
/// renders as "0.468" the way its decimal reading would.
pub fn format_3dp(x: f64) -> String {
    let nudged = if x >= 0.0 { x + 1e-9 } else { x - 1e-9 };
    let scaled = nudged * 1000.0;
    let i = if scaled >= 0.0 {
        (scaled + 0.5).floor() as i64
    } else {
        (scaled - 0.5).ceil() as i64
    };
    let sign = if i < 0 { "-" } else { "" };
    format!("{}{}.{:03}", sign, i.abs() / 1000, i.abs() % 1000)
}

/// Plain-text rendering of a classification report: seven fixed rows,
/// `name<TAB>value`, three decimals.
pub fn render_classification(report: &ClassificationReport) -> String {
    let rows = [
        ("Macro F1 Score", report.macro_f1),
        ("Micro F1 Score", report.micro_f1),
        ("Accuracy", report.accuracy),
        ("Macro Precision", report.macro_precision),
        ("Micro Precision", report.micro_precision),
        ("Macro Recall", report.macro_recall),
        ("Micro Recall", report.micro_recall),
    ];
    let mut out = String::new();
    for (name, value) in rows {
        out.push_str(name);
        out.push('\t');
        out.push_str(&format_3dp(value));
        out.push('\n');
    }
    out
}

/// Plain-text rendering of a regression report, same `name<TAB>value` shape.
pub fn render_regression(report: &RegressionReport) -> String {
    let rows = [
        ("RMSE Empathy", report.rmse_empathy),
        ("RMSE Distress", report.rmse_distress),
        ("Pearson Empathy", report.r_empathy),
        ("Pearson Distress", report.r_distress),
        ("Average Pearson", report.r_avg),
    ];
    let mut out = String::new();
    for (name, value) in rows {
        out.push_str(name);
        out.push('\t');
        out.push_str(&format_3dp(value));
        out.push('\n');
    }
    out
}
