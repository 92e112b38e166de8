use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::record::{Dataset, EssayRecord};

/// A numeric input column: z-scored against training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumericColumn {
    Age,
    Income,
    Personality(String),
}

/// A categorical input column: one-hot encoded over the training categories
/// plus a trailing slot for categories first seen at transform time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalColumn {
    Gender,
    Ethnicity,
    Education,
}

/// Which columns feed the feature vector and in what order. The output
/// layout is all numeric columns first, then all categorical columns, each
/// in the order given here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerConfig {
    pub numeric: Vec<NumericColumn>,
    pub categorical: Vec<CategoricalColumn>,
}

impl ScalerConfig {
    /// Age and income, then the given personality traits, then gender,
    /// ethnicity, and education.
    pub fn standard(traits: &[&str]) -> Self {
        let mut numeric = vec![NumericColumn::Age, NumericColumn::Income];
        numeric.extend(traits.iter().map(|t| NumericColumn::Personality((*t).to_string())));
        ScalerConfig {
            numeric,
            categorical: vec![
                CategoricalColumn::Gender,
                CategoricalColumn::Ethnicity,
                CategoricalColumn::Education,
            ],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FittedStats {
    /// Per numeric column: (mean, sample std) over training values present.
    numeric: Vec<(f64, f64)>,
    /// Per categorical column: categories seen in training, sorted.
    categories: Vec<Vec<String>>,
}

/// Turns demographic and personality fields into a fixed-length real vector.
///
/// Numeric columns are z-scored with training mean and sample std (a
/// zero-variance column maps to 0). Categorical columns are one-hot over the
/// lexicographically sorted training categories with one extra slot for
/// unseen values. A missing field contributes a zero segment either way.
/// Fit only on the training split; the statistics must not see validation
/// or test data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    config: ScalerConfig,
    fitted: Option<FittedStats>,
}

fn numeric_value(rec: &EssayRecord, col: &NumericColumn) -> Option<f64> {
    match col {
        NumericColumn::Age => rec.demographics.age,
        NumericColumn::Income => rec.demographics.income,
        NumericColumn::Personality(t) => rec.personality.get(t).copied(),
    }
}

fn categorical_value<'r>(rec: &'r EssayRecord, col: &CategoricalColumn) -> Option<&'r str> {
    match col {
        CategoricalColumn::Gender => rec.demographics.gender.as_deref(),
        CategoricalColumn::Ethnicity => rec.demographics.ethnicity.as_deref(),
        CategoricalColumn::Education => rec.demographics.education.as_deref(),
    }
}

fn column_label(col: &NumericColumn) -> String {
    match col {
        NumericColumn::Age => "age".into(),
        NumericColumn::Income => "income".into(),
        NumericColumn::Personality(t) => format!("personality_{t}"),
    }
}

fn categorical_label(col: &CategoricalColumn) -> &'static str {
    match col {
        CategoricalColumn::Gender => "gender",
        CategoricalColumn::Ethnicity => "ethnicity",
        CategoricalColumn::Education => "education",
    }
}

impl FeatureScaler {
    pub fn new(config: ScalerConfig) -> Self {
        FeatureScaler { config, fitted: None }
    }

    pub fn is_fitted(&self) -> bool {
        self.fitted.is_some()
    }

    /// Computes per-column statistics from the training split. Values absent
    /// from a record do not enter that column's statistics.
    pub fn fit(&mut self, train: &Dataset) {
        let numeric = self
            .config
            .numeric
            .iter()
            .map(|col| {
                let values: Vec<f64> =
                    train.records.iter().filter_map(|r| numeric_value(r, col)).collect();
                if values.len() < 2 {
                    return (values.first().copied().unwrap_or(0.0), 0.0);
                }
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (mean, var.sqrt())
            })
            .collect();
        let categories = self
            .config
            .categorical
            .iter()
            .map(|col| {
                let set: BTreeSet<String> = train
                    .records
                    .iter()
                    .filter_map(|r| categorical_value(r, col))
                    .map(str::to_string)
                    .collect();
                set.into_iter().collect()
            })
            .collect();
        self.fitted = Some(FittedStats { numeric, categories });
    }

    fn stats(&self) -> Result<&FittedStats> {
        self.fitted
            .as_ref()
            .ok_or_else(|| Error::State("feature scaler used before fit".into()))
    }

    pub fn output_dim(&self) -> Result<usize> {
        let stats = self.stats()?;
        Ok(stats.numeric.len() + stats.categories.iter().map(|c| c.len() + 1).sum::<usize>())
    }

    /// Human-readable name per output coordinate, in layout order.
    pub fn feature_names(&self) -> Result<Vec<String>> {
        let stats = self.stats()?;
        let mut names: Vec<String> = self.config.numeric.iter().map(column_label).collect();
        for (col, cats) in self.config.categorical.iter().zip(&stats.categories) {
            let label = categorical_label(col);
            names.extend(cats.iter().map(|c| format!("{label}={c}")));
            names.push(format!("{label}=<unseen>"));
        }
        Ok(names)
    }

    pub fn transform(&self, rec: &EssayRecord) -> Result<Vec<f64>> {
        let stats = self.stats()?;
        let mut out = Vec::new();
        for (col, &(mean, std)) in self.config.numeric.iter().zip(&stats.numeric) {
            out.push(match numeric_value(rec, col) {
                Some(v) if std > 0.0 => (v - mean) / std,
                _ => 0.0,
            });
        }
        for (col, cats) in self.config.categorical.iter().zip(&stats.categories) {
            let start = out.len();
            out.resize(start + cats.len() + 1, 0.0);
            if let Some(value) = categorical_value(rec, col) {
                let slot = match cats.binary_search_by(|c| c.as_str().cmp(value)) {
                    Ok(i) => i,
                    Err(_) => cats.len(),
                };
                out[start + slot] = 1.0;
            }
        }
        Ok(out)
    }
}

/// Convenience: construct and fit in one step.
pub fn fit_scaler(train: &Dataset, config: ScalerConfig) -> FeatureScaler {
    let mut scaler = FeatureScaler::new(config);
    scaler.fit(train);
    scaler
}
