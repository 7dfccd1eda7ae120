//! Dataset model for vertically partitioned data.
//!
//! Every provider holds the same record population (same ids) but a
//! different set of attributes. Storage is columnar; [`Record`] is the
//! row-oriented construction/inspection view.

mod adult;
mod predicate;
mod synthetic;

pub use adult::{load_adult, load_adult_from_reader, ADULT_COLUMNS};
pub use predicate::{CmpOp, Comparison, Predicate};
pub use synthetic::{generate_synthetic, write_labels_csv, SyntheticSpec, LABEL_ATTR};

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};

/// Shared record identifier: the cross-provider join key.
pub type RecordId = u64;

/// A single attribute value. `Missing` covers ingested fields marked
/// absent; any comparison against it evaluates false.
#[derive(Clone, Debug, PartialEq)]
pub enum AttrValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Cat(String),
    Missing,
}

impl AttrValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Int(v) => Some(*v as f64),
            AttrValue::Real(v) => Some(*v),
            _ => None,
        }
    }
}

/// Row view used to build datasets and returned by sampling.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub id: RecordId,
    pub attributes: BTreeMap<String, AttrValue>,
}

/// One data provider's vertical slice: a record-id column plus one
/// column per attribute, all of equal length.
#[derive(Clone, Debug)]
pub struct ProviderDataset {
    provider_id: u32,
    ids: Vec<RecordId>,
    columns: BTreeMap<String, Vec<AttrValue>>,
}

impl ProviderDataset {
    /// Builds a dataset from columns. Every column must have the same
    /// length as `ids` and ids must be unique.
    pub fn from_columns(
        provider_id: u32,
        ids: Vec<RecordId>,
        columns: BTreeMap<String, Vec<AttrValue>>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(*id) {
                return Err(Error::Domain(format!(
                    "duplicate record id {id} in provider {provider_id}"
                )));
            }
        }
        for (name, col) in &columns {
            if col.len() != ids.len() {
                return Err(Error::Domain(format!(
                    "column {name} has {} values for {} ids",
                    col.len(),
                    ids.len()
                )));
            }
        }
        Ok(ProviderDataset {
            provider_id,
            ids,
            columns,
        })
    }

    /// Builds a dataset from row records. The attribute set must be
    /// uniform across records.
    pub fn from_records(provider_id: u32, records: Vec<Record>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Ok(ProviderDataset {
                provider_id,
                ids: Vec::new(),
                columns: BTreeMap::new(),
            });
        };
        let schema: Vec<String> = first.attributes.keys().cloned().collect();
        let mut ids = Vec::with_capacity(records.len());
        let mut columns: BTreeMap<String, Vec<AttrValue>> = schema
            .iter()
            .map(|name| (name.clone(), Vec::with_capacity(records.len())))
            .collect();
        for record in records {
            if record.attributes.len() != schema.len()
                || !record.attributes.keys().eq(schema.iter())
            {
                return Err(Error::Schema(format!(
                    "record {} does not match the provider schema",
                    record.id
                )));
            }
            ids.push(record.id);
            for (name, value) in record.attributes {
                columns.get_mut(&name).expect("schema checked").push(value);
            }
        }
        Self::from_columns(provider_id, ids, columns)
    }

    pub fn provider_id(&self) -> u32 {
        self.provider_id
    }

    /// Dataset size `N`.
    pub fn size(&self) -> u64 {
        self.ids.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[RecordId] {
        &self.ids
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(|s| s.as_str())
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.columns.contains_key(name)
    }

    pub fn column(&self, name: &str) -> Option<&[AttrValue]> {
        self.columns.get(name).map(|c| c.as_slice())
    }

    pub(crate) fn value_at(&self, row: usize, name: &str) -> Option<&AttrValue> {
        self.columns.get(name).map(|c| &c[row])
    }

    /// Materializes row `row` as a [`Record`].
    pub fn record(&self, row: usize) -> Record {
        Record {
            id: self.ids[row],
            attributes: self
                .columns
                .iter()
                .map(|(k, col)| (k.clone(), col[row].clone()))
                .collect(),
        }
    }
}

/// Record ids in `dataset` satisfying `predicate`.
///
/// The predicate is validated against the dataset schema first; an
/// unknown attribute is a schema error rather than an empty result.
pub fn evaluate_predicate(
    dataset: &ProviderDataset,
    predicate: &Predicate,
) -> Result<BTreeSet<RecordId>> {
    predicate.validate(dataset)?;
    let mut out = BTreeSet::new();
    for row in 0..dataset.ids().len() {
        if predicate.eval_row(dataset, row) {
            out.insert(dataset.ids()[row]);
        }
    }
    Ok(out)
}

/// Fraction of records satisfying `predicate`: `|p(D)| / N`.
pub fn predicate_ratio(dataset: &ProviderDataset, predicate: &Predicate) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::Domain(
            "predicate ratio of an empty dataset".into(),
        ));
    }
    let hits = evaluate_predicate(dataset, predicate)?;
    Ok(hits.len() as f64 / dataset.size() as f64)
}

/// Brute-force intersection of id sets; the oracle for every protocol
/// test and baseline.
pub fn exact_intersection(id_sets: &[BTreeSet<RecordId>]) -> Result<BTreeSet<RecordId>> {
    let Some(first) = id_sets.first() else {
        return Err(Error::Domain("intersection of zero sets".into()));
    };
    let mut acc = first.clone();
    for set in &id_sets[1..] {
        acc = acc.intersection(set).copied().collect();
        if acc.is_empty() {
            break;
        }
    }
    Ok(acc)
}
