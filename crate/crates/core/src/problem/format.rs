//! JSON problem documents and CSV ingestion for regression data.
//!
//! A document is the family tag and its parameters plus the declared
//! dimensions, e.g. `{"family": "example31", "n": 3, "m": 3}`. The declared
//! `n`/`m` are optional on input but always written on output, and must agree
//! with the parameters when present.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::FamilySpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDocument {
    #[serde(flatten)]
    pub spec: FamilySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

pub fn serialize_problem(spec: &FamilySpec) -> Result<String> {
    let (n, m) = spec.dimensions()?;
    let doc = ProblemDocument { spec: spec.clone(), n: Some(n), m: Some(m) };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn parse_problem(text: &str) -> Result<FamilySpec> {
    let doc: ProblemDocument = serde_json::from_str(text)?;
    let (n, m) = doc.spec.dimensions()?;
    for (field, declared, actual) in [("n", doc.n, n), ("m", doc.m, m)] {
        if let Some(d) = declared {
            if d != actual {
                return Err(Error::DimensionMismatch(format!(
                    "field '{field}' declares {d} but the {} parameters imply {actual}",
                    doc.spec.name()
                )));
            }
        }
    }
    Ok(doc.spec)
}

/// Reads a CSV with a header row; the last column is the response.
pub fn ridge_from_csv<R: Read>(reader: R, mu: f64) -> Result<FamilySpec> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::Parse("ridge CSV needs at least one predictor and a response column".into()));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != width {
            return Err(Error::Parse(format!(
                "row {}: expected {width} fields, found {}",
                line + 2,
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(width);
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Parse(format!("row {}, column {}: '{field}' is not a number", line + 2, col + 1))
            })?;
            row.push(v);
        }
        y.push(row.pop().expect("width >= 2"));
        x.push(row);
    }
    let spec = FamilySpec::RidgePair { x, y, mu };
    spec.dimensions()?;
    Ok(spec)
}
