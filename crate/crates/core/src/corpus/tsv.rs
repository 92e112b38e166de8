use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::record::{Dataset, EssayRecord, SCORE_RANGE};
use super::schema::{ColumnSchema, Field};

/// Escapes one cell for the tab-separated container format. There is no
/// quoting: backslash, tab, newline, and carriage return become `\\`, `\t`,
/// `\n`, `\r`.
pub fn escape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            _ => out.push(c),
        }
    }
    out
}

/// Inverse of [`escape_cell`]. Unrecognized escapes (and a trailing lone
/// backslash) are kept literally.
pub fn unescape_cell(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// A loaded dataset plus non-fatal warnings (gold scores outside the
/// expected range).
#[derive(Debug, Clone)]
pub struct LoadReport {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

fn parse_number(
    cell: &str,
    header: &str,
    line_no: usize,
    errors: &mut Vec<String>,
) -> Option<f64> {
    let t = cell.trim();
    if t.is_empty() {
        return None;
    }
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(format!(
                "line {line_no}, column {header:?}: cannot parse {t:?} as a number"
            ));
            None
        }
    }
}

fn non_empty(cell: &str) -> Option<String> {
    let t = cell.trim();
    if t.is_empty() { None } else { Some(t.to_string()) }
}

/// Reads a TSV file under a column mapping.
///
/// The first line is a header; mapped columns are located by name. Missing
/// optional cells stay absent rather than becoming zeros, emotion labels are
/// trimmed and lowercased, and cell text is unescaped. Every malformed row
/// is collected before failing, so a bad file is reported in one pass and
/// nothing partial is returned.
pub fn load_tsv(path: &Path, schema: &ColumnSchema) -> Result<LoadReport> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    let header_line = match lines.next() {
        Some(l) if !l.is_empty() => l,
        _ => {
            return Err(Error::Data(format!(
                "{}: missing header row",
                path.display()
            )));
        }
    };
    let header: Vec<String> = header_line.split('\t').map(unescape_cell).collect();
    let mut index_of: HashMap<&str, usize> = HashMap::new();
    for (i, name) in header.iter().enumerate() {
        if index_of.insert(name.as_str(), i).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate column {name:?} in header",
                path.display()
            )));
        }
    }

    let mut columns = Vec::new();
    let mut missing = Vec::new();
    for (field, mapped) in schema.mapped_columns() {
        match index_of.get(mapped) {
            Some(&i) => columns.push((field, mapped, i)),
            None => missing.push(format!("{mapped:?} (mapped for {})", field.logical_name())),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "{}: columns not found in header: {}",
            path.display(),
            missing.join(", ")
        )));
    }

    let mut records = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    for (offset, raw) in lines.enumerate() {
        let line_no = offset + 2;
        if raw.is_empty() {
            continue;
        }
        let cells: Vec<String> = raw.split('\t').map(unescape_cell).collect();
        if cells.len() != header.len() {
            errors.push(format!(
                "line {line_no}: {} column(s), header has {}",
                cells.len(),
                header.len()
            ));
            continue;
        }
        let mut rec = EssayRecord::default();
        let mut row_errors = Vec::new();
        for (field, mapped, i) in &columns {
            let cell = cells[*i].as_str();
            match field {
                Field::Essay => rec.essay = cell.to_string(),
                Field::Empathy => {
                    rec.empathy = parse_number(cell, mapped, line_no, &mut row_errors)
                }
                Field::Distress => {
                    rec.distress = parse_number(cell, mapped, line_no, &mut row_errors)
                }
                Field::Emotion => rec.emotion = non_empty(cell).map(|s| s.to_lowercase()),
                Field::Age => {
                    rec.demographics.age = parse_number(cell, mapped, line_no, &mut row_errors)
                }
                Field::Gender => rec.demographics.gender = non_empty(cell),
                Field::Ethnicity => rec.demographics.ethnicity = non_empty(cell),
                Field::Income => {
                    rec.demographics.income = parse_number(cell, mapped, line_no, &mut row_errors)
                }
                Field::Education => rec.demographics.education = non_empty(cell),
                Field::Personality(t) => {
                    if let Some(v) = parse_number(cell, mapped, line_no, &mut row_errors) {
                        rec.personality.insert((*t).to_string(), v);
                    }
                }
            }
        }
        if row_errors.is_empty() {
            match rec.validate(SCORE_RANGE) {
                Ok(ws) => {
                    warnings.extend(ws.into_iter().map(|w| format!("line {line_no}: {w}")));
                    records.push(rec);
                }
                Err(Error::Data(msg)) => row_errors.push(format!("line {line_no}: {msg}")),
                Err(e) => return Err(e),
            }
        }
        errors.extend(row_errors);
    }

    if !errors.is_empty() {
        return Err(Error::Data(format!(
            "{}: {} problem(s):\n  {}",
            path.display(),
            errors.len(),
            errors.join("\n  ")
        )));
    }
    Ok(LoadReport {
        dataset: Dataset { records, provenance: path.display().to_string() },
        warnings,
    })
}

/// Writes a dataset under a column mapping, one record per row, header
/// first. Absent values become empty cells; fields without a mapping are
/// skipped. Numbers use the shortest representation that parses back to the
/// same value, so write followed by load reproduces the records.
pub fn write_tsv(d: &Dataset, path: &Path, schema: &ColumnSchema) -> Result<()> {
    let columns = schema.mapped_columns();
    let mut out = String::new();
    let header: Vec<String> = columns.iter().map(|(_, h)| escape_cell(h)).collect();
    out.push_str(&header.join("\t"));
    out.push('\n');

    let num = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for rec in &d.records {
        let cells: Vec<String> = columns
            .iter()
            .map(|(field, _)| {
                let raw = match field {
                    Field::Essay => rec.essay.clone(),
                    Field::Empathy => num(rec.empathy),
                    Field::Distress => num(rec.distress),
                    Field::Emotion => rec.emotion.clone().unwrap_or_default(),
                    Field::Age => num(rec.demographics.age),
                    Field::Gender => rec.demographics.gender.clone().unwrap_or_default(),
                    Field::Ethnicity => rec.demographics.ethnicity.clone().unwrap_or_default(),
                    Field::Income => num(rec.demographics.income),
                    Field::Education => rec.demographics.education.clone().unwrap_or_default(),
                    Field::Personality(t) => num(rec.personality.get(*t).copied()),
                };
                escape_cell(&raw)
            })
            .collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}
