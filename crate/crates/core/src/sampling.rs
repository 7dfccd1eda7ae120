//! Coordinated hash-bucket sampling.
//!
//! Record ids are hashed into `b` buckets with a shared seed; one
//! bucket index is the sample. Because the hash runs on the id — the
//! only information shared across providers — every provider
//! materializes exactly the same sample without any coordination
//! beyond the three numbers in [`SampleSpec`].
//!
//! The hash is a seeded SplitMix64 finalizer reduced modulo `b`. It is
//! fixed for wire and golden-file stability; changing it would change
//! every recorded sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ProviderDataset, Record, RecordId};
use crate::error::{Error, Result};
use crate::mix64;

/// The shared sampling contract sent to every provider.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub hash_seed: u64,
    /// Number of buckets `b`.
    #[serde(rename = "b")]
    pub bucket_count: u64,
    /// Chosen bucket in `[0, b)`.
    pub bucket_index: u64,
}

impl SampleSpec {
    pub fn new(hash_seed: u64, bucket_count: u64, bucket_index: u64) -> Result<Self> {
        let spec = SampleSpec {
            hash_seed,
            bucket_count,
            bucket_index,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bucket_count == 0 {
            return Err(Error::Domain("bucket count must be at least 1".into()));
        }
        if self.bucket_index >= self.bucket_count {
            return Err(Error::Domain(format!(
                "bucket index {} outside [0, {})",
                self.bucket_index, self.bucket_count
            )));
        }
        Ok(())
    }
}

/// Number of hash buckets for a target sample size: `⌈N/m⌉`.
pub fn bucket_count(n: u64, m: u64) -> Result<u64> {
    if n == 0 {
        return Err(Error::Domain("dataset size must be at least 1".into()));
    }
    if m == 0 || m > n {
        return Err(Error::Domain(format!(
            "sample size {m} outside [1, {n}]"
        )));
    }
    Ok(n.div_ceil(m))
}

/// Bucket for a record id: a seeded 64-bit avalanche hash of the id,
/// reduced modulo the bucket count. Pure and platform-independent.
pub fn assign_bucket(id: RecordId, spec: &SampleSpec) -> u64 {
    mix64(mix64(spec.hash_seed) ^ id) % spec.bucket_count
}

/// Draws a fresh sampling contract: a random hash seed and a uniformly
/// random bucket index among `bucket_count(n, m)` buckets.
pub fn make_sample_spec<R: Rng>(n: u64, m: u64, rng: &mut R) -> Result<SampleSpec> {
    let buckets = bucket_count(n, m)?;
    Ok(SampleSpec {
        hash_seed: rng.gen(),
        bucket_count: buckets,
        bucket_index: rng.gen_range(0..buckets),
    })
}

/// Row indices of the dataset falling in the spec's bucket, in dataset
/// order.
pub(crate) fn sample_rows(dataset: &ProviderDataset, spec: &SampleSpec) -> Vec<usize> {
    dataset
        .ids()
        .iter()
        .enumerate()
        .filter(|(_, &id)| assign_bucket(id, spec) == spec.bucket_index)
        .map(|(row, _)| row)
        .collect()
}

/// Record ids in the sample bucket, preserving dataset order.
pub fn sample_ids(dataset: &ProviderDataset, spec: &SampleSpec) -> Vec<RecordId> {
    sample_rows(dataset, spec)
        .into_iter()
        .map(|row| dataset.ids()[row])
        .collect()
}

/// The sampled records themselves (the provider-side view of the
/// sample), preserving dataset order.
pub fn sample_bucket(dataset: &ProviderDataset, spec: &SampleSpec) -> Vec<Record> {
    sample_rows(dataset, spec)
        .into_iter()
        .map(|row| dataset.record(row))
        .collect()
}

/// Precomputed bucket table for one dataset, keyed by
/// `(hash_seed, bucket_count)`. Buckets for different error levels can
/// be kept around and reused; a lookup with a different key must
/// rebuild.
#[derive(Clone, Debug)]
pub struct BucketIndex {
    hash_seed: u64,
    bucket_count: u64,
    buckets: Vec<Vec<usize>>,
}

impl BucketIndex {
    pub fn build(dataset: &ProviderDataset, hash_seed: u64, bucket_count: u64) -> Result<Self> {
        if bucket_count == 0 {
            return Err(Error::Domain("bucket count must be at least 1".into()));
        }
        let mut buckets = vec![Vec::new(); bucket_count as usize];
        let probe = SampleSpec {
            hash_seed,
            bucket_count,
            bucket_index: 0,
        };
        for (row, &id) in dataset.ids().iter().enumerate() {
            buckets[assign_bucket(id, &probe) as usize].push(row);
        }
        Ok(BucketIndex {
            hash_seed,
            bucket_count,
            buckets,
        })
    }

    /// Whether this index serves the given spec (key equality).
    pub fn matches(&self, spec: &SampleSpec) -> bool {
        self.hash_seed == spec.hash_seed && self.bucket_count == spec.bucket_count
    }

    /// Row indices of one bucket; `None` when the key does not match.
    pub fn rows(&self, spec: &SampleSpec) -> Option<&[usize]> {
        (self.matches(spec) && spec.bucket_index < self.bucket_count)
            .then(|| self.buckets[spec.bucket_index as usize].as_slice())
    }
}
