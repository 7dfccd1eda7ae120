//! Simulated client–provider protocols for intersection cardinality.
//!
//! Endpoints are in-process; the "network" is the [`CostLedger`],
//! which counts the paper's two chargeable quantities (records moved
//! and predicate evaluations as the network/CPU proxies) plus message
//! and ciphertext-operation counts. One ledger belongs to exactly one
//! protocol run.
//!
//! Accounting units: one record id crossing the wire is one unit of
//! `records_transferred`; every request or response is one message;
//! predicates and sample specs ride along in the request message and
//! cost no record units.

use std::collections::BTreeSet;

use crate::bounds::scale_up_estimate;
use crate::data::{evaluate_predicate, Predicate, ProviderDataset, RecordId};
use crate::error::{Error, Result};
use crate::sampling::{sample_rows, SampleSpec};

/// Monotone counters for one protocol run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub predicate_evaluations: u64,
    pub records_transferred: u64,
    pub messages: u64,
    pub ciphertext_operations: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One data provider: its vertical slice plus the predicate assigned
/// to it. Endpoints answer only the query forms below and never expose
/// raw records unsolicited.
#[derive(Clone, Debug)]
pub struct ProviderEndpoint {
    dataset: ProviderDataset,
    predicate: Predicate,
}

impl ProviderEndpoint {
    pub fn new(dataset: ProviderDataset, predicate: Predicate) -> Result<Self> {
        predicate.validate(&dataset)?;
        Ok(ProviderEndpoint { dataset, predicate })
    }

    pub fn provider_id(&self) -> u32 {
        self.dataset.provider_id()
    }

    pub fn dataset_size(&self) -> u64 {
        self.dataset.size()
    }

    pub fn dataset(&self) -> &ProviderDataset {
        &self.dataset
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }

    /// Full predicate set `p(D)`: evaluates over the whole dataset and
    /// returns the satisfying ids.
    pub fn predicate_ids(&self, ledger: &mut CostLedger) -> BTreeSet<RecordId> {
        let hits = evaluate_predicate(&self.dataset, &self.predicate)
            .expect("predicate validated at construction");
        ledger.predicate_evaluations += self.dataset.size();
        ledger.messages += 2;
        ledger.records_transferred += hits.len() as u64;
        hits
    }

    /// Size-only variant of [`Self::predicate_ids`]: the provider
    /// reports `|p(D)|` without shipping the ids.
    pub fn predicate_set_size(&self, ledger: &mut CostLedger) -> u64 {
        let hits = evaluate_predicate(&self.dataset, &self.predicate)
            .expect("predicate validated at construction");
        ledger.predicate_evaluations += self.dataset.size();
        ledger.messages += 2;
        hits.len() as u64
    }

    /// Checks which of the received candidate ids satisfy the
    /// predicate; the filtering step of the sequential protocols.
    pub fn filter(
        &self,
        candidates: &BTreeSet<RecordId>,
        ledger: &mut CostLedger,
    ) -> BTreeSet<RecordId> {
        let hits = evaluate_predicate(&self.dataset, &self.predicate)
            .expect("predicate validated at construction");
        let result: BTreeSet<RecordId> = candidates.intersection(&hits).copied().collect();
        ledger.predicate_evaluations += candidates.len() as u64;
        ledger.records_transferred += candidates.len() as u64 + result.len() as u64;
        ledger.messages += 2;
        result
    }

    /// Predicate hits restricted to the spec's sample bucket, plus the
    /// realized bucket size. The predicate runs only over the bucket.
    pub fn sampled_predicate_ids(
        &self,
        spec: &SampleSpec,
        ledger: &mut CostLedger,
    ) -> (BTreeSet<RecordId>, u64) {
        let (hits, bucket_size) = self.sampled_hits_local(spec);
        ledger.predicate_evaluations += bucket_size;
        ledger.messages += 2;
        ledger.records_transferred += hits.len() as u64;
        (hits, bucket_size)
    }

    /// Realized bucket size for a spec, without evaluating anything.
    pub fn bucket_size(&self, spec: &SampleSpec) -> u64 {
        sample_rows(&self.dataset, spec).len() as u64
    }

    /// Provider-local bucket evaluation: the hits stay at the
    /// provider, so no transfer is charged here. Callers account for
    /// whatever the protocol actually moves.
    pub(crate) fn sampled_hits_local(&self, spec: &SampleSpec) -> (BTreeSet<RecordId>, u64) {
        let rows = sample_rows(&self.dataset, spec);
        let bucket_size = rows.len() as u64;
        let hits = rows
            .into_iter()
            .filter(|&row| self.predicate.eval_row(&self.dataset, row))
            .map(|row| self.dataset.ids()[row])
            .collect();
        (hits, bucket_size)
    }
}

/// `candidate_ids ∩ p(D)` with ledger charges for the round trip.
pub fn provider_filter(
    endpoint: &ProviderEndpoint,
    candidate_ids: &BTreeSet<RecordId>,
    ledger: &mut CostLedger,
) -> BTreeSet<RecordId> {
    endpoint.filter(candidate_ids, ledger)
}

/// Outcome of a protocol run.
#[derive(Clone, Debug)]
pub struct IntersectionResult {
    /// Exact cardinality or scaled-up estimate.
    pub estimated_size: f64,
    /// Whether `estimated_size` is exact.
    pub exact: bool,
    /// The member ids, for protocols that materialize them.
    pub member_ids: Option<BTreeSet<RecordId>>,
    /// Snapshot of the run's cost counters.
    pub ledger: CostLedger,
    /// Set when a sampled run hit an empty bucket and the estimate
    /// degenerated to zero.
    pub degenerate_sample: bool,
}

impl IntersectionResult {
    fn exact_members(member_ids: BTreeSet<RecordId>, ledger: CostLedger) -> Self {
        IntersectionResult {
            estimated_size: member_ids.len() as f64,
            exact: true,
            member_ids: Some(member_ids),
            ledger,
            degenerate_sample: false,
        }
    }
}

fn require_endpoints(endpoints: &[ProviderEndpoint]) -> Result<()> {
    if endpoints.is_empty() {
        return Err(Error::Domain("protocol needs at least one endpoint".into()));
    }
    Ok(())
}

/// Sequential naive protocol: streams the monotonically shrinking
/// candidate set through the providers, exiting early once it empties.
pub fn naive_sequential(
    endpoints: &[ProviderEndpoint],
    ledger: &mut CostLedger,
) -> Result<IntersectionResult> {
    require_endpoints(endpoints)?;
    let mut current = endpoints[0].predicate_ids(ledger);
    for endpoint in &endpoints[1..] {
        if current.is_empty() {
            break;
        }
        current = endpoint.filter(&current, ledger);
    }
    Ok(IntersectionResult::exact_members(current, *ledger))
}

/// Parallel naive protocol: every provider ships its full predicate
/// set; the client intersects locally.
pub fn naive_parallel(
    endpoints: &[ProviderEndpoint],
    ledger: &mut CostLedger,
) -> Result<IntersectionResult> {
    require_endpoints(endpoints)?;
    let sets: Vec<BTreeSet<RecordId>> = endpoints
        .iter()
        .map(|endpoint| endpoint.predicate_ids(ledger))
        .collect();
    let members = crate::data::exact_intersection(&sets)?;
    Ok(IntersectionResult::exact_members(members, *ledger))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleMode {
    Sequential,
    Parallel,
}

/// Sampled protocol: providers evaluate only over the shared sample
/// bucket; the client intersects the sampled id sets and scales the
/// count up by `N/m` with `m` the realized bucket size.
///
/// Sequential and parallel modes return the identical estimate; they
/// differ only in ledger accounting.
pub fn sampled_intersection(
    endpoints: &[ProviderEndpoint],
    spec: &SampleSpec,
    mode: SampleMode,
    ledger: &mut CostLedger,
) -> Result<IntersectionResult> {
    require_endpoints(endpoints)?;
    spec.validate()?;
    let n = endpoints[0].dataset_size();

    let (mut current, bucket_size) = endpoints[0].sampled_predicate_ids(spec, ledger);
    if bucket_size == 0 {
        return Ok(IntersectionResult {
            estimated_size: 0.0,
            exact: false,
            member_ids: None,
            ledger: *ledger,
            degenerate_sample: true,
        });
    }
    for endpoint in &endpoints[1..] {
        match mode {
            SampleMode::Sequential => {
                if current.is_empty() {
                    break;
                }
                current = endpoint.filter(&current, ledger);
            }
            SampleMode::Parallel => {
                let (hits, _) = endpoint.sampled_predicate_ids(spec, ledger);
                current = current.intersection(&hits).copied().collect();
            }
        }
    }

    let estimate = scale_up_estimate(current.len() as u64, bucket_size, n)?;
    Ok(IntersectionResult {
        estimated_size: estimate,
        exact: false,
        member_ids: None,
        ledger: *ledger,
        degenerate_sample: false,
    })
}
