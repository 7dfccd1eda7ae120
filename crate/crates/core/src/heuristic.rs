//! Bound-tightening estimation of the intersection cardinality.
//!
//! The intersection size is squeezed between the smallest predicate
//! set (upper bound) and the inclusion–exclusion lower bound
//! `max{(Σp̂_i − (k−1))·N, 0}`. Each iteration exactly intersects the
//! two smallest predicate sets, replaces them by the merged set and
//! recomputes both bounds; merging the two smallest sets attacks the
//! upper bound directly and drops the `k−1` subtrahend of the lower
//! bound. Iteration stops once the gap is within `δ·N/2`, and the
//! midpoint of the final interval is returned.
//!
//! [`heuristic_with_sampling`] replaces each exact pairwise merge with
//! a coordinated-sample estimate sized for error `δ/(k−1)`, debiting
//! that error from the stopping threshold on every iteration.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;

use crate::bounds::{sample_size_hoeffding, scale_up_estimate};
use crate::data::RecordId;
use crate::error::{Error, Result};
use crate::protocols::{CostLedger, IntersectionResult, ProviderEndpoint};
use crate::sampling::make_sample_spec;

/// Default confidence used to size the per-merge samples of the
/// sampling-combined variant; exposed as a CLI flag.
pub const DEFAULT_SAMPLE_CONFIDENCE: f64 = 0.05;

/// Lower/upper bounds on the intersection cardinality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundPair {
    pub lower: f64,
    pub upper: f64,
}

impl BoundPair {
    pub fn new(lower: f64, upper: f64) -> Self {
        debug_assert!(lower <= upper, "bounds crossed: {lower} > {upper}");
        BoundPair { lower, upper }
    }

    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }
}

/// One merge of the heuristic loop.
#[derive(Clone, Debug)]
pub struct TraceStep {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Node ids of the merged pair (a node is identified by the
    /// smallest provider id among its members).
    pub merged_pair: (u32, u32),
    /// Size (exact count or scaled estimate) of the merged set.
    pub merged_size: f64,
    /// Bounds after the merge.
    pub bounds: BoundPair,
}

/// Initial bounds plus one entry per merge.
#[derive(Clone, Debug)]
pub struct HeuristicTrace {
    pub initial: BoundPair,
    pub steps: Vec<TraceStep>,
}

impl HeuristicTrace {
    /// Writes the per-iteration CSV
    /// `iteration,merged_pair,merged_size,lower,upper`; the initial
    /// bounds appear as iteration 0.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,merged_pair,merged_size,lower,upper")?;
        writeln!(out, "0,-,,{},{}", self.initial.lower, self.initial.upper)?;
        for step in &self.steps {
            writeln!(
                out,
                "{},{}-{},{},{},{}",
                step.iteration,
                step.merged_pair.0,
                step.merged_pair.1,
                step.merged_size,
                step.bounds.lower,
                step.bounds.upper
            )?;
        }
        Ok(())
    }
}

/// A heuristic run: the protocol result plus its convergence trace.
#[derive(Clone, Debug)]
pub struct HeuristicOutcome {
    pub result: IntersectionResult,
    pub trace: HeuristicTrace,
    /// Set when the sampling-combined loop ran out of error budget
    /// before the bounds converged.
    pub budget_exhausted: bool,
    /// Cumulative differential-privacy budget spent (private variant
    /// only; zero otherwise).
    pub epsilon_spent: f64,
}

/// Upper bound on the intersection: the smallest predicate set.
pub fn upper_bound(set_sizes: &[u64]) -> Result<u64> {
    set_sizes
        .iter()
        .copied()
        .min()
        .ok_or_else(|| Error::Domain("upper bound of zero sets".into()))
}

/// Inclusion–exclusion lower bound `max{(Σp̂_i − (k−1))·N, 0}` for `k`
/// predicate sets over a shared population of size `N`.
pub fn lower_bound(ratios: &[f64], n: u64) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::Domain("lower bound of zero sets".into()));
    }
    let sum: f64 = ratios.iter().sum();
    let k = ratios.len() as f64;
    Ok(((sum - (k - 1.0)) * n as f64).max(0.0))
}

/// Two-set specialization over possibly differing set sizes:
/// `(p̂1 + p̂2 − 1)·(n1+n2)/2` when `p̂1 + p̂2 ≥ 1`, else 0.
pub fn lower_bound_two(p1: f64, p2: f64, n1: u64, n2: u64) -> f64 {
    if p1 + p2 >= 1.0 {
        (p1 + p2 - 1.0) * (n1 + n2) as f64 / 2.0
    } else {
        0.0
    }
}

/// An active set in the heuristic loop: one original predicate set or
/// the merge of several. The client may hold the materialized ids
/// (exact variant); sampled variants re-materialize from the member
/// providers on every merge.
struct ActiveSet {
    node_id: u32,
    members: Vec<usize>,
    held: Option<BTreeSet<RecordId>>,
    size: f64,
}

/// Bounds from the active sizes: sizes are exact counts or unbiased
/// estimates, so `Σ sizes − (k−1)·N` computes Eq.-6 arithmetic without
/// a ratio round trip.
fn bounds_from_sizes(active: &[ActiveSet], n: u64) -> BoundPair {
    let upper = active
        .iter()
        .map(|s| s.size)
        .fold(f64::INFINITY, f64::min);
    let sum: f64 = active.iter().map(|s| s.size).sum();
    let lower = (sum - (active.len() as f64 - 1.0) * n as f64).max(0.0);
    // estimated sizes can cross; clamp the interval rather than panic
    BoundPair::new(lower.min(upper), upper)
}

/// Indices of the two smallest active sets, ties broken toward the
/// smallest node id (deterministic merge order).
fn pick_two_smallest(active: &[ActiveSet]) -> (usize, usize) {
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by(|&a, &b| {
        active[a]
            .size
            .total_cmp(&active[b].size)
            .then(active[a].node_id.cmp(&active[b].node_id))
    });
    (order[0], order[1])
}

fn merged_node(a: &ActiveSet, b: &ActiveSet, held: Option<BTreeSet<RecordId>>, size: f64) -> ActiveSet {
    let mut members = a.members.clone();
    members.extend_from_slice(&b.members);
    members.sort_unstable();
    ActiveSet {
        node_id: a.node_id.min(b.node_id),
        members,
        held,
        size,
    }
}

/// Removes positions `i` and `j` and returns them ordered by
/// (size, node id).
fn take_pair(active: &mut Vec<ActiveSet>, i: usize, j: usize) -> (ActiveSet, ActiveSet) {
    let (first, second) = if i < j { (j, i) } else { (i, j) };
    let x = active.swap_remove(first);
    let y = active.swap_remove(second);
    // x came from the higher position; re-establish pick order
    let (a, b) = if (y.size, y.node_id) <= (x.size, x.node_id) {
        (y, x)
    } else {
        (x, y)
    };
    (a, b)
}

/// Bound-tightening intersection with exact pairwise merges.
///
/// `accuracy` is the relative error `δ`; the loop runs while the bound
/// gap exceeds `δ·N/2` and more than one set remains. The returned
/// size is exact when a single set remains, otherwise the midpoint of
/// the final interval.
pub fn heuristic_intersection(
    endpoints: &[ProviderEndpoint],
    accuracy: f64,
    ledger: &mut CostLedger,
) -> Result<HeuristicOutcome> {
    if endpoints.is_empty() {
        return Err(Error::Domain("heuristic needs at least one endpoint".into()));
    }
    if accuracy < 0.0 {
        return Err(Error::Domain(format!("accuracy {accuracy} must be >= 0")));
    }
    let n = endpoints[0].dataset_size();

    // step 2: every provider evaluates its predicate and reports the size
    let mut active: Vec<ActiveSet> = endpoints
        .iter()
        .enumerate()
        .map(|(index, endpoint)| ActiveSet {
            node_id: endpoint.provider_id(),
            members: vec![index],
            held: None,
            size: endpoint.predicate_set_size(ledger) as f64,
        })
        .collect();

    let initial = bounds_from_sizes(&active, n);
    let mut trace = HeuristicTrace {
        initial,
        steps: Vec::new(),
    };
    let threshold = accuracy * n as f64 / 2.0;
    let mut bounds = initial;
    let mut iteration = 0;

    while active.len() > 1 && bounds.gap() > threshold {
        iteration += 1;
        let (i, j) = pick_two_smallest(&active);
        let (a, b) = take_pair(&mut active, i, j);

        // ship the smaller set and filter it through the other side
        let candidates = match &a.held {
            Some(ids) => ids.clone(),
            None => endpoints[a.members[0]].predicate_ids(ledger),
        };
        let merged: BTreeSet<RecordId> = match &b.held {
            Some(ids) => candidates.intersection(ids).copied().collect(),
            None => endpoints[b.members[0]].filter(&candidates, ledger),
        };
        let size = merged.len() as f64;
        active.push(merged_node(&a, &b, Some(merged), size));

        bounds = bounds_from_sizes(&active, n);
        trace.steps.push(TraceStep {
            iteration,
            merged_pair: (a.node_id, b.node_id),
            merged_size: size,
            bounds,
        });
    }

    let result = if active.len() == 1 {
        let only = active.pop().expect("one set remains");
        IntersectionResult {
            estimated_size: only.size,
            exact: true,
            member_ids: only.held,
            ledger: *ledger,
            degenerate_sample: false,
        }
    } else {
        IntersectionResult {
            estimated_size: bounds.midpoint(),
            exact: false,
            member_ids: None,
            ledger: *ledger,
            degenerate_sample: false,
        }
    };
    Ok(HeuristicOutcome {
        result,
        trace,
        budget_exhausted: false,
        epsilon_spent: 0.0,
    })
}

/// Bound tightening with sampled pairwise merges.
///
/// Each merge draws a fresh coordinated sample sized by
/// `sample_size_hoeffding(δ/(k−1), sample_confidence)` and estimates
/// the merged cardinality by scale-up; the stopping threshold shrinks
/// by `δ/(k−1)` per iteration to absorb the per-merge sampling error.
/// Returns a budget-exhausted flag if the shrinking threshold reaches
/// zero before the bounds converge.
pub fn heuristic_with_sampling<R: Rng>(
    endpoints: &[ProviderEndpoint],
    accuracy: f64,
    sample_confidence: f64,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<HeuristicOutcome> {
    if endpoints.len() < 2 {
        return Err(Error::Domain(
            "sampling-combined heuristic needs at least two endpoints".into(),
        ));
    }
    if accuracy <= 0.0 {
        return Err(Error::Domain(format!("accuracy {accuracy} must be > 0")));
    }
    if !(sample_confidence > 0.0 && sample_confidence < 1.0) {
        return Err(Error::Domain(format!(
            "sample confidence {sample_confidence} outside (0, 1)"
        )));
    }
    let n = endpoints[0].dataset_size();
    let k = endpoints.len() as f64;
    let accuracy_step = accuracy / (k - 1.0);
    // a sample cannot exceed the population; the clamp degenerates to
    // a single full bucket
    let sample_size = sample_size_hoeffding(accuracy_step, sample_confidence)?.min(n);

    let mut active: Vec<ActiveSet> = endpoints
        .iter()
        .enumerate()
        .map(|(index, endpoint)| ActiveSet {
            node_id: endpoint.provider_id(),
            members: vec![index],
            held: None,
            size: endpoint.predicate_set_size(ledger) as f64,
        })
        .collect();

    let initial = bounds_from_sizes(&active, n);
    let mut trace = HeuristicTrace {
        initial,
        steps: Vec::new(),
    };
    let mut bounds = initial;
    let mut iteration = 0u32;
    let mut budget_exhausted = false;
    let mut degenerate = false;

    loop {
        if active.len() <= 1 {
            break;
        }
        let threshold = (accuracy - accuracy_step * iteration as f64) * n as f64 / 2.0;
        if bounds.gap() <= threshold {
            break;
        }
        if threshold <= 0.0 {
            budget_exhausted = true;
            break;
        }

        let (i, j) = pick_two_smallest(&active);
        let (a, b) = take_pair(&mut active, i, j);

        // fresh coordinated sample for this merge
        let spec = make_sample_spec(n, sample_size, rng)?;
        let mut bucket_size = 0;
        let mut sample: Option<BTreeSet<RecordId>> = None;
        for &member in a.members.iter().chain(&b.members) {
            match sample.take() {
                None => {
                    let (hits, realized) =
                        endpoints[member].sampled_predicate_ids(&spec, ledger);
                    bucket_size = realized;
                    sample = Some(hits);
                }
                Some(current) => {
                    if current.is_empty() {
                        sample = Some(current);
                        break;
                    }
                    sample = Some(endpoints[member].filter(&current, ledger));
                }
            }
        }
        let sample = sample.expect("at least one member");

        let size = if bucket_size == 0 {
            degenerate = true;
            0.0
        } else {
            scale_up_estimate(sample.len() as u64, bucket_size, n)?
        };
        active.push(merged_node(&a, &b, None, size));

        iteration += 1;
        bounds = bounds_from_sizes(&active, n);
        trace.steps.push(TraceStep {
            iteration: iteration as usize,
            merged_pair: (a.node_id, b.node_id),
            merged_size: size,
            bounds,
        });
    }

    let estimated_size = if active.len() == 1 {
        active[0].size
    } else {
        bounds.midpoint()
    };
    Ok(HeuristicOutcome {
        result: IntersectionResult {
            estimated_size,
            exact: false,
            member_ids: None,
            ledger: *ledger,
            degenerate_sample: degenerate,
        },
        trace,
        budget_exhausted,
        epsilon_spent: 0.0,
    })
}
