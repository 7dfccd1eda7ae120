//! Ingestion of the UCI Adult (census income) training file.
//!
//! The file is headerless CSV with 15 columns per row. Fields are
//! trimmed; a field holding `?` is treated as missing. The vertical
//! split hands each attribute group to a separate provider; all
//! providers share the row-index record ids.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::{AttrValue, ProviderDataset};
use crate::error::{Error, Result};

/// Column order of the UCI `adult.data` layout.
pub const ADULT_COLUMNS: [&str; 15] = [
    "age",
    "workclass",
    "fnlwgt",
    "education",
    "education-num",
    "marital-status",
    "occupation",
    "relationship",
    "race",
    "sex",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
    "native-country",
    "income",
];

const NUMERIC_COLUMNS: [&str; 6] = [
    "age",
    "fnlwgt",
    "education-num",
    "capital-gain",
    "capital-loss",
    "hours-per-week",
];

fn parse_field(column: &str, raw: &str, line: usize) -> Result<AttrValue> {
    let raw = raw.trim();
    if raw == "?" {
        return Ok(AttrValue::Missing);
    }
    if NUMERIC_COLUMNS.contains(&column) {
        raw.parse::<i64>()
            .map(AttrValue::Int)
            .map_err(|_| Error::Ingest {
                line,
                message: format!("column {column}: {raw:?} is not an integer"),
            })
    } else {
        Ok(AttrValue::Cat(raw.to_string()))
    }
}

/// Loads `adult.data` from a path. See [`load_adult_from_reader`].
pub fn load_adult<P: AsRef<Path>>(
    path: P,
    vertical_split: &[Vec<String>],
) -> Result<Vec<ProviderDataset>> {
    let file = File::open(path.as_ref())?;
    load_adult_from_reader(BufReader::new(file), vertical_split)
}

/// Parses the Adult CSV from any reader and distributes the attribute
/// groups of `vertical_split` to one provider each.
///
/// Record ids are assigned by row order. Blank lines are skipped (the
/// canonical file ends with one); any other row with a column count
/// other than 15 is an ingestion error naming the 1-based line number.
pub fn load_adult_from_reader<R: BufRead>(
    reader: R,
    vertical_split: &[Vec<String>],
) -> Result<Vec<ProviderDataset>> {
    if vertical_split.is_empty() {
        return Err(Error::Config("vertical split has no attribute groups".into()));
    }
    for group in vertical_split {
        if group.is_empty() {
            return Err(Error::Config("empty attribute group in vertical split".into()));
        }
        for attr in group {
            if !ADULT_COLUMNS.contains(&attr.as_str()) {
                return Err(Error::Config(format!("unknown adult column {attr:?}")));
            }
        }
    }

    let mut columns: BTreeMap<&str, Vec<AttrValue>> =
        ADULT_COLUMNS.iter().map(|&c| (c, Vec::new())).collect();
    let mut rows = 0u64;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != ADULT_COLUMNS.len() {
            return Err(Error::Ingest {
                line: line_no,
                message: format!(
                    "expected {} comma-separated fields, found {}",
                    ADULT_COLUMNS.len(),
                    fields.len()
                ),
            });
        }
        for (column, raw) in ADULT_COLUMNS.iter().zip(&fields) {
            let value = parse_field(column, raw, line_no)?;
            columns.get_mut(column).expect("all columns present").push(value);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Ingest {
            line: 1,
            message: "file holds no data rows".into(),
        });
    }

    let ids: Vec<u64> = (0..rows).collect();
    vertical_split
        .iter()
        .enumerate()
        .map(|(provider, group)| {
            let provider_columns: BTreeMap<String, Vec<AttrValue>> = group
                .iter()
                .map(|attr| (attr.clone(), columns[attr.as_str()].clone()))
                .collect();
            ProviderDataset::from_columns(provider as u32, ids.clone(), provider_columns)
        })
        .collect()
}
