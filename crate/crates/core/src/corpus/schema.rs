use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Maps logical record fields to TSV header names.
///
/// Only `essay` is required. Unmapped fields are never read or written.
/// Personality traits are open-ended: each `personality_<trait>` key maps
/// one trait to a column, so the schema adapts to whatever trait set a file
/// carries.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    pub essay: String,
    pub empathy: Option<String>,
    pub distress: Option<String>,
    pub emotion: Option<String>,
    pub age: Option<String>,
    pub gender: Option<String>,
    pub ethnicity: Option<String>,
    pub income: Option<String>,
    pub education: Option<String>,
    /// Trait name to header name, ordered by trait name.
    pub personality: BTreeMap<String, String>,
}

/// A logical record field paired with no storage; used to walk a schema's
/// mapped columns in canonical order (essay, scores, emotion, demographics,
/// personality traits).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Field<'a> {
    Essay,
    Empathy,
    Distress,
    Emotion,
    Age,
    Gender,
    Ethnicity,
    Income,
    Education,
    Personality(&'a str),
}

impl Field<'_> {
    pub(crate) fn logical_name(&self) -> String {
        match self {
            Field::Essay => "essay".into(),
            Field::Empathy => "empathy".into(),
            Field::Distress => "distress".into(),
            Field::Emotion => "emotion".into(),
            Field::Age => "age".into(),
            Field::Gender => "gender".into(),
            Field::Ethnicity => "ethnicity".into(),
            Field::Income => "income".into(),
            Field::Education => "education".into(),
            Field::Personality(t) => format!("personality_{t}"),
        }
    }
}

impl ColumnSchema {
    /// A schema mapping only the essay column.
    pub fn essay_only(header: impl Into<String>) -> Self {
        ColumnSchema {
            essay: header.into(),
            empathy: None,
            distress: None,
            emotion: None,
            age: None,
            gender: None,
            ethnicity: None,
            income: None,
            education: None,
            personality: BTreeMap::new(),
        }
    }

    /// Parses the flat `key = value` config format. `#` lines and blank
    /// lines are ignored. Recognized keys: `essay`, `empathy`, `distress`,
    /// `emotion`, `age`, `gender`, `ethnicity`, `income`, `education`, and
    /// `personality_<trait>`; anything else is rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut schema = ColumnSchema::essay_only("");
        let mut saw_essay = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "schema line {line_no}: expected `key = value`, got {line:?}"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(Error::Config(format!(
                    "schema line {line_no}: empty value for key {key:?}"
                )));
            }
            let slot = match key {
                "essay" => {
                    if saw_essay {
                        return Err(Error::Config(format!("duplicate schema key {key:?}")));
                    }
                    saw_essay = true;
                    schema.essay = value.to_string();
                    continue;
                }
                "empathy" => &mut schema.empathy,
                "distress" => &mut schema.distress,
                "emotion" => &mut schema.emotion,
                "age" => &mut schema.age,
                "gender" => &mut schema.gender,
                "ethnicity" => &mut schema.ethnicity,
                "income" => &mut schema.income,
                "education" => &mut schema.education,
                _ => {
                    let Some(trait_name) = key.strip_prefix("personality_") else {
                        return Err(Error::Config(format!("unknown schema key {key:?}")));
                    };
                    if trait_name.is_empty() {
                        return Err(Error::Config(format!(
                            "schema line {line_no}: personality key has no trait name"
                        )));
                    }
                    let prev = schema.personality.insert(trait_name.into(), value.into());
                    if prev.is_some() {
                        return Err(Error::Config(format!("duplicate schema key {key:?}")));
                    }
                    continue;
                }
            };
            if slot.replace(value.to_string()).is_some() {
                return Err(Error::Config(format!("duplicate schema key {key:?}")));
            }
        }
        if !saw_essay {
            return Err(Error::Config("schema is missing the required `essay` mapping".into()));
        }
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Renders the schema back into the flat config format; `parse` of the
    /// output reproduces the schema.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (field, header) in self.mapped_columns() {
            out.push_str(&format!("{} = {}\n", field.logical_name(), header));
        }
        out
    }

    /// Mapped (field, header) pairs in canonical column order.
    pub(crate) fn mapped_columns(&self) -> Vec<(Field<'_>, &str)> {
        let mut cols: Vec<(Field<'_>, &str)> = vec![(Field::Essay, self.essay.as_str())];
        let fixed = [
            (Field::Empathy, &self.empathy),
            (Field::Distress, &self.distress),
            (Field::Emotion, &self.emotion),
            (Field::Age, &self.age),
            (Field::Gender, &self.gender),
            (Field::Ethnicity, &self.ethnicity),
            (Field::Income, &self.income),
            (Field::Education, &self.education),
        ];
        for (field, header) in fixed {
            if let Some(h) = header {
                cols.push((field, h.as_str()));
            }
        }
        for (trait_name, header) in &self.personality {
            cols.push((Field::Personality(trait_name), header.as_str()));
        }
        cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# column mapping
essay = essay_text
empathy = gold_empathy
distress = gold_distress
emotion = gold_emotion

age = age
gender = gender
ethnicity = ethnicity
income = income
education = education
personality_openness = big5_o
personality_neuroticism = big5_n
";

    #[test]
    fn parses_full_mapping() {
        let s = ColumnSchema::parse(FULL).unwrap();
        assert_eq!(s.essay, "essay_text");
        assert_eq!(s.empathy.as_deref(), Some("gold_empathy"));
        assert_eq!(s.personality["openness"], "big5_o");
        assert_eq!(s.personality["neuroticism"], "big5_n");
        assert_eq!(s.mapped_columns().len(), 11);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ColumnSchema::parse("essay = a\nmood = b\n").unwrap_err();
        assert!(err.to_string().contains("mood"));
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(ColumnSchema::parse("essay = a\nessay = b\n").is_err());
        assert!(ColumnSchema::parse("essay = a\nage = x\nage = y\n").is_err());
        assert!(
            ColumnSchema::parse("essay = a\npersonality_o = x\npersonality_o = y\n").is_err()
        );
    }

    #[test]
    fn missing_essay_rejected() {
        let err = ColumnSchema::parse("emotion = gold\n").unwrap_err();
        assert!(err.to_string().contains("essay"));
    }

    #[test]
    fn empty_value_rejected() {
        assert!(ColumnSchema::parse("essay =\n").is_err());
    }

    #[test]
    fn non_assignment_line_rejected() {
        assert!(ColumnSchema::parse("essay\n").is_err());
    }

    #[test]
    fn render_round_trips() {
        let s = ColumnSchema::parse(FULL).unwrap();
        assert_eq!(ColumnSchema::parse(&s.render()).unwrap(), s);
    }

    #[test]
    fn canonical_order_puts_personality_last_sorted_by_trait() {
        let s = ColumnSchema::parse(FULL).unwrap();
        let logical: Vec<String> =
            s.mapped_columns().iter().map(|(f, _)| f.logical_name()).collect();
        assert_eq!(logical[0], "essay");
        assert_eq!(
            &logical[logical.len() - 2..],
            ["personality_neuroticism", "personality_openness"]
        );
    }
}
