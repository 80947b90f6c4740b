//! Input files: data rows and program documents.
//!
//! Rows come as CSV `label,value` (an optional `label,value` header is
//! skipped) or, for files ending in `.jsonl`, one `{"label": …, "value": …}`
//! object per line. Values are decimal or `0x`-prefixed hex and must already
//! be reduced below the modulus.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use labelmask_core::program::{MonomialDoc, ProgramDoc};
use labelmask_core::{Fe, Label, MonomialProgram, PrimeField, QuadraticProgram};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub type Row = (Label, Fe);

pub fn parse_value(field: &PrimeField, s: &str) -> Result<Fe> {
    let s = s.trim();
    let v = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u128::from_str_radix(h, 16),
        None => s.parse::<u128>(),
    }
    .map_err(|e| CliError::Data(format!("bad value {s:?}: {e}")))?;
    field
        .try_elem(v)
        .map_err(|_| CliError::Data(format!("value {s} is not below the modulus {}", field.modulus())))
}

fn label(s: &str) -> Result<Label> {
    Label::new(s.as_bytes()).map_err(|e| CliError::Data(e.to_string()))
}

fn is_header(rec: &csv::StringRecord) -> bool {
    rec.get(0).map(str::trim) == Some("label") && rec.get(1).map(str::trim) == Some("value")
}

pub fn read_csv<R: std::io::Read>(field: &PrimeField, input: R) -> Result<Vec<Row>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Data(format!("csv: {e}")))?;
        if i == 0 && is_header(&rec) {
            continue;
        }
        if rec.len() != 2 {
            return Err(CliError::Data(format!("csv record {} has {} fields, expected 2", i + 1, rec.len())));
        }
        rows.push((label(&rec[0])?, parse_value(field, &rec[1])?));
    }
    Ok(rows)
}

#[derive(Deserialize)]
struct JsonRow {
    label: String,
    value: serde_json::Value,
}

pub fn read_jsonl(field: &PrimeField, text: &str) -> Result<Vec<Row>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow =
            serde_json::from_str(line).map_err(|e| CliError::Data(format!("jsonl line {}: {e}", i + 1)))?;
        let value = match &row.value {
            serde_json::Value::String(s) => parse_value(field, s)?,
            serde_json::Value::Number(n) => parse_value(field, &n.to_string())?,
            other => return Err(CliError::Data(format!("jsonl line {}: bad value {other}", i + 1))),
        };
        rows.push((label(&row.label)?, value));
    }
    Ok(rows)
}

/// Reads a data file, choosing the format by extension, and rejects
/// repeated labels.
pub fn read_rows(field: &PrimeField, path: &Path) -> Result<Vec<Row>> {
    let rows = if path.extension().is_some_and(|e| e == "jsonl") {
        read_jsonl(field, &fs::read_to_string(path).map_err(CliError::file(path))?)?
    } else {
        read_csv(field, fs::File::open(path).map_err(CliError::file(path))?)?
    };
    let mut seen = HashSet::with_capacity(rows.len());
    for (l, _) in &rows {
        if !seen.insert(l) {
            return Err(CliError::Data(format!("{}: label {l} appears twice", path.display())));
        }
    }
    Ok(rows)
}

pub fn write_csv<W: std::io::Write>(out: W, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "value"]).map_err(|e| CliError::Data(e.to_string()))?;
    for (l, v) in rows {
        w.write_record([l.to_string(), v.value().to_string()])
            .map_err(|e| CliError::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// A program file: a quadratic document, or a bare label list for a monomial.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProgramFile {
    Quadratic(ProgramDoc),
    Monomial(MonomialDoc),
}

#[derive(Clone, Debug)]
pub enum Program {
    Quadratic(QuadraticProgram),
    Monomial(MonomialProgram),
}

impl Program {
    pub fn labels(&self) -> &[Label] {
        match self {
            Program::Quadratic(p) => p.labels(),
            Program::Monomial(p) => p.labels(),
        }
    }

    pub fn eval_plain(&self, field: &PrimeField, values: &[Fe]) -> Result<Fe> {
        Ok(match self {
            Program::Quadratic(p) => p.eval_plain(field, values)?,
            Program::Monomial(p) => p.eval_plain(field, values)?,
        })
    }

    pub fn to_file(&self, field: &PrimeField) -> Result<ProgramFile> {
        Ok(match self {
            Program::Quadratic(p) => ProgramFile::Quadratic(p.to_doc(field)?),
            Program::Monomial(p) => ProgramFile::Monomial(p.to_doc()?),
        })
    }
}

pub fn read_program(field: &PrimeField, path: &Path) -> Result<Program> {
    let text = fs::read_to_string(path).map_err(CliError::file(path))?;
    let file: ProgramFile =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(match file {
        ProgramFile::Quadratic(doc) => Program::Quadratic(QuadraticProgram::from_doc(field, doc)?),
        ProgramFile::Monomial(doc) => Program::Monomial(MonomialProgram::from_doc(doc)?),
    })
}

/// Plain evaluation of `prog` on the rows it names.
pub fn evaluate(field: &PrimeField, prog: &Program, rows: &[Row]) -> Result<Fe> {
    let by_label: HashMap<&Label, Fe> = rows.iter().map(|(l, v)| (l, *v)).collect();
    let values = prog
        .labels()
        .iter()
        .map(|l| by_label.get(l).copied().ok_or_else(|| CliError::Data(format!("no row for label {l}"))))
        .collect::<Result<Vec<_>>>()?;
    prog.eval_plain(field, &values)
}
