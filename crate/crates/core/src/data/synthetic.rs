//! Seeded synthetic datasets: `k` providers sharing the id universe
//! `0..N`, each with an independent Bernoulli(`r`) boolean `label`
//! column.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;

use super::{AttrValue, ProviderDataset};
use crate::error::{Error, Result};
use crate::seeded_rng;

/// Name of the generated boolean column.
pub const LABEL_ATTR: &str = "label";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    /// Dataset size `N` shared by all providers.
    pub dataset_size: u64,
    /// Number of providers `k`.
    pub provider_count: u32,
    /// Per-provider probability that a record satisfies the predicate.
    pub satisfaction_ratio: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dataset_size == 0 {
            return Err(Error::Config("dataset size must be at least 1".into()));
        }
        if self.provider_count == 0 {
            return Err(Error::Config("provider count must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.satisfaction_ratio) {
            return Err(Error::Config(format!(
                "satisfaction ratio {} outside [0, 1]",
                self.satisfaction_ratio
            )));
        }
        Ok(())
    }
}

/// Generates `k` datasets over the identical id set `0..N`. Labels are
/// per-record independent Bernoulli(`r`) draws, independent across
/// providers; the output is a pure function of the spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<ProviderDataset>> {
    spec.validate()?;
    let n = spec.dataset_size;
    (0..spec.provider_count)
        .map(|provider| {
            let mut rng = seeded_rng(spec.seed, provider as u64);
            let labels: Vec<AttrValue> = (0..n)
                .map(|_| AttrValue::Bool(rng.gen::<f64>() < spec.satisfaction_ratio))
                .collect();
            ProviderDataset::from_columns(
                provider,
                (0..n).collect(),
                BTreeMap::from([(LABEL_ATTR.to_string(), labels)]),
            )
        })
        .collect()
}

/// Writes one provider's labels as `id,label` CSV rows with a header.
pub fn write_labels_csv<W: Write>(dataset: &ProviderDataset, mut out: W) -> Result<()> {
    let labels = dataset
        .column(LABEL_ATTR)
        .ok_or_else(|| Error::Schema(format!("provider {} has no label column", dataset.provider_id())))?;
    writeln!(out, "id,label")?;
    for (id, value) in dataset.ids().iter().zip(labels) {
        let bit = matches!(value, AttrValue::Bool(true)) as u8;
        writeln!(out, "{id},{bit}")?;
    }
    Ok(())
}
