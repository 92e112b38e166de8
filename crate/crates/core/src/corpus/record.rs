use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::textenc::EMOTION_LABELS;

/// Default gold-score range for empathy and distress (averaged 7-point
/// Batson items).
pub const SCORE_RANGE: (f64, f64) = (1.0, 7.0);

/// Person-level information attached to an essay. Every field is optional;
/// the scaler maps a missing value to a zero segment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Demographics {
    pub age: Option<f64>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub income: Option<f64>,
    pub education: Option<String>,
}

/// One essay with its gold annotations and author information.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EssayRecord {
    pub essay: String,
    pub empathy: Option<f64>,
    pub distress: Option<f64>,
    pub emotion: Option<String>,
    pub demographics: Demographics,
    /// Trait name to raw value, e.g. big-five scores.
    pub personality: BTreeMap<String, f64>,
}

impl EssayRecord {
    /// Checks record invariants.
    ///
    /// Hard violations (empty essay, unknown emotion label, non-finite score)
    /// are errors. Gold scores outside `score_range` are tolerated and come
    /// back as warning strings so real data with stray values still loads.
    pub fn validate(&self, score_range: (f64, f64)) -> Result<Vec<String>> {
        if self.essay.trim().is_empty() {
            return Err(Error::Data("essay is empty".into()));
        }
        if let Some(label) = &self.emotion {
            if !EMOTION_LABELS.contains(&label.as_str()) {
                return Err(Error::Data(format!(
                    "unknown emotion label {label:?} (expected one of: {})",
                    EMOTION_LABELS.join(", ")
                )));
            }
        }
        let (lo, hi) = score_range;
        let mut warnings = Vec::new();
        for (name, value) in [("empathy", self.empathy), ("distress", self.distress)] {
            if let Some(v) = value {
                if !v.is_finite() {
                    return Err(Error::Data(format!("{name} score {v} is not finite")));
                }
                if v < lo || v > hi {
                    warnings.push(format!("{name} {v} outside [{lo}, {hi}]"));
                }
            }
        }
        Ok(warnings)
    }
}

/// An ordered record list plus a provenance note: the source path for loaded
/// data, or a description of the generator (seed and planted target
/// functions included) for synthetic data.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<EssayRecord>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(records: Vec<EssayRecord>, provenance: impl Into<String>) -> Self {
        Dataset { records, provenance: provenance.into() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}
