//! Privacy-preserving building blocks: the Laplace mechanism for
//! counting queries, commutative-encryption exact intersection,
//! PSI-CA / BN-PSI-CA, and the differentially private variant of the
//! bound-tightening heuristic.
//!
//! Providers taking part in the private heuristic publish only
//! Laplace-noised predicate-set sizes; pairwise (and re-run
//! multi-way) intersections go through BN-PSI-CA, so the client never
//! sees plaintext ids and every revealed count carries calibrated
//! noise. The crate reports cumulative ε spent but does not enforce a
//! composition cap; that policy belongs to the operator.

mod commutative;
mod homomorphic;
mod psi;

pub use commutative::{commutative_intersection_size, CommutativeGroup, CommutativeKey};
pub use homomorphic::{Ciphertext, HomomorphicKeypair, PaillierKeypair};
pub use psi::{bn_psi_ca, psi_ca, DummyNoiseRecord, EncryptedPolynomial, ZERO_MARKER_LIMBS};

use rand::Rng;

use crate::error::{Error, Result};
use crate::heuristic::{BoundPair, HeuristicOutcome, HeuristicTrace, TraceStep};
use crate::protocols::{CostLedger, IntersectionResult, ProviderEndpoint};
use crate::sampling::SampleSpec;

/// Differential-privacy parameters for the private protocols.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrivacyParams {
    /// Privacy parameter ε; `f64::INFINITY` degenerates to no noise.
    pub epsilon: f64,
    /// Cap on dummy elements per BN-PSI-CA run; the dummy-count noise
    /// is clipped into `[0, max_dummies]`.
    pub max_dummies: u64,
}

impl PrivacyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!(
                "privacy epsilon {} must be positive",
                self.epsilon
            )));
        }
        Ok(())
    }
}

/// A Laplace-perturbed cardinality: rounded, floored at zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoisyCount {
    pub value: u64,
    pub epsilon_spent: f64,
}

/// One draw from the Laplace distribution with mean 0 and scale `b`,
/// via the inverse-CDF transform of a uniform variate.
pub fn laplace_sample<R: Rng>(scale: f64, rng: &mut R) -> Result<f64> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::Domain(format!("laplace scale {scale} must be positive")));
    }
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let inner = 1.0 - 2.0 * u.abs();
        // u = −0.5 exactly would take ln(0); redraw
        if inner > 0.0 {
            return Ok(-scale * u.signum() * inner.ln());
        }
    }
}

/// Counting-query Laplace mechanism: `round(count + Lap(1/ε))`,
/// floored at zero. Counting has sensitivity 1, so the mechanism is
/// ε-differentially private; rounding and flooring are post-processing
/// and preserve that.
pub fn noisy_count<R: Rng>(true_count: u64, epsilon: f64, rng: &mut R) -> Result<NoisyCount> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon {epsilon} must be positive")));
    }
    let value = if epsilon.is_infinite() {
        true_count
    } else {
        let noise = laplace_sample(1.0 / epsilon, rng)?;
        (true_count as f64 + noise).round().max(0.0) as u64
    };
    Ok(NoisyCount {
        value,
        epsilon_spent: epsilon,
    })
}

struct PrivateSet {
    node_id: u32,
    /// Endpoint indices whose bucket-restricted predicate sets define
    /// this node; re-intersections always go back to these providers.
    members: Vec<usize>,
    /// Noisy size in bucket units.
    size: f64,
}

fn private_bounds(active: &[PrivateSet], population: u64) -> BoundPair {
    let upper = active.iter().map(|s| s.size).fold(f64::INFINITY, f64::min);
    let sum: f64 = active.iter().map(|s| s.size).sum();
    let lower = (sum - (active.len() as f64 - 1.0) * population as f64).max(0.0);
    BoundPair::new(lower.min(upper), upper)
}

/// Differentially private bound-tightening intersection (the private
/// heuristic protocol).
///
/// Every provider evaluates its predicate over the agreed sample
/// bucket and publishes a Laplace-noised size; bound tightening then
/// merges the two smallest sets through BN-PSI-CA with the client
/// relaying all transfers. A merged set is never materialized
/// anywhere, so intersecting it with a further provider reruns the
/// protocol from scratch across all member providers. The returned
/// estimate is the scaled-up midpoint and is never exact.
pub fn private_heuristic_intersection<R: Rng>(
    endpoints: &[ProviderEndpoint],
    accuracy: f64,
    params: &PrivacyParams,
    scheme: &HomomorphicKeypair,
    bucket: &SampleSpec,
    rng: &mut R,
    ledger: &mut CostLedger,
) -> Result<HeuristicOutcome> {
    if endpoints.len() < 2 {
        return Err(Error::Domain(
            "private heuristic needs at least two endpoints".into(),
        ));
    }
    if accuracy < 0.0 {
        return Err(Error::Domain(format!("accuracy {accuracy} must be >= 0")));
    }
    params.validate()?;
    bucket.validate()?;

    let n = endpoints[0].dataset_size();
    let mut epsilon_spent = 0.0;

    // provider-side: predicate over the agreed bucket, noisy size out
    let mut bucket_size = 0u64;
    let mut sets = Vec::with_capacity(endpoints.len());
    let mut active = Vec::with_capacity(endpoints.len());
    for (index, endpoint) in endpoints.iter().enumerate() {
        let (hits, realized) = endpoint.sampled_hits_local(bucket);
        ledger.predicate_evaluations += realized;
        ledger.messages += 2;
        bucket_size = realized;
        let noisy = noisy_count(hits.len() as u64, params.epsilon, rng)?;
        epsilon_spent += noisy.epsilon_spent;
        sets.push(hits);
        active.push(PrivateSet {
            node_id: endpoint.provider_id(),
            members: vec![index],
            size: noisy.value as f64,
        });
    }

    if bucket_size == 0 {
        return Ok(HeuristicOutcome {
            result: IntersectionResult {
                estimated_size: 0.0,
                exact: false,
                member_ids: None,
                ledger: *ledger,
                degenerate_sample: true,
            },
            trace: HeuristicTrace {
                initial: BoundPair::new(0.0, 0.0),
                steps: Vec::new(),
            },
            budget_exhausted: false,
            epsilon_spent,
        });
    }

    let scale = n as f64 / bucket_size as f64;
    let scaled = |b: BoundPair| BoundPair::new(b.lower * scale, b.upper * scale);

    let mut bounds = private_bounds(&active, bucket_size);
    let mut trace = HeuristicTrace {
        initial: scaled(bounds),
        steps: Vec::new(),
    };
    let threshold = accuracy * bucket_size as f64 / 2.0;
    let mut iteration = 0;

    while active.len() > 1 && bounds.gap() > threshold {
        iteration += 1;
        // two smallest by noisy size, ties toward the smaller node id
        let mut order: Vec<usize> = (0..active.len()).collect();
        order.sort_by(|&a, &b| {
            active[a]
                .size
                .total_cmp(&active[b].size)
                .then(active[a].node_id.cmp(&active[b].node_id))
        });
        let (i, j) = (order[0], order[1]);
        let (first, second) = if i < j { (j, i) } else { (i, j) };
        let x = active.swap_remove(first);
        let y = active.swap_remove(second);
        let (a, b) = if (y.size, y.node_id) <= (x.size, x.node_id) {
            (y, x)
        } else {
            (x, y)
        };

        let mut members = a.members.clone();
        members.extend_from_slice(&b.members);
        members.sort_unstable();
        let group: Vec<&std::collections::BTreeSet<u64>> =
            members.iter().map(|&m| &sets[m]).collect();
        let (noisy, _record) = psi::bn_psi_ca_multi(
            &group,
            params,
            bucket_size,
            scheme,
            true,
            rng,
            ledger,
        )?;
        epsilon_spent += noisy.epsilon_spent;

        active.push(PrivateSet {
            node_id: a.node_id.min(b.node_id),
            members,
            size: noisy.value as f64,
        });
        bounds = private_bounds(&active, bucket_size);
        trace.steps.push(TraceStep {
            iteration,
            merged_pair: (a.node_id, b.node_id),
            merged_size: noisy.value as f64 * scale,
            bounds: scaled(bounds),
        });
    }

    let estimated_size = if active.len() == 1 {
        active[0].size * scale
    } else {
        bounds.midpoint() * scale
    };
    Ok(HeuristicOutcome {
        result: IntersectionResult {
            estimated_size,
            exact: false,
            member_ids: None,
            ledger: *ledger,
            degenerate_sample: false,
        },
        trace,
        budget_exhausted: false,
        epsilon_spent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Predicate, SyntheticSpec, LABEL_ATTR};
    use crate::heuristic::heuristic_intersection;
    use crate::seeded_rng;

    fn label_endpoints(n: u64, k: u32, r: f64, seed: u64) -> Vec<ProviderEndpoint> {
        generate_synthetic(&SyntheticSpec {
            dataset_size: n,
            provider_count: k,
            satisfaction_ratio: r,
            seed,
        })
        .unwrap()
        .into_iter()
        .map(|ds| ProviderEndpoint::new(ds, Predicate::label(LABEL_ATTR)).unwrap())
        .collect()
    }

    #[test]
    fn laplace_moments() {
        let mut rng = seeded_rng(70, 0);
        let scale = 1.5;
        let draws = 100_000;
        let samples: Vec<f64> = (0..draws)
            .map(|_| laplace_sample(scale, &mut rng).unwrap())
            .collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        assert!(mean.abs() < 3.0 * scale * (2.0 / draws as f64).sqrt() * 1.5);
        let variance =
            samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws - 1) as f64;
        let expected = 2.0 * scale * scale;
        assert!((variance - expected).abs() / expected < 0.05);
        let mut sorted = samples;
        sorted.sort_by(f64::total_cmp);
        let median = sorted[draws / 2];
        assert!(median.abs() < 0.05);
    }

    #[test]
    fn laplace_rejects_bad_scales() {
        let mut rng = seeded_rng(71, 0);
        assert!(laplace_sample(0.0, &mut rng).is_err());
        assert!(laplace_sample(-1.0, &mut rng).is_err());
        assert!(laplace_sample(f64::INFINITY, &mut rng).is_err());
    }

    #[test]
    fn noisy_count_vanishing_noise() {
        let mut rng = seeded_rng(72, 0);
        for _ in 0..100 {
            let nc = noisy_count(42, 1e6, &mut rng).unwrap();
            assert_eq!(nc.value, 42);
        }
        let inf = noisy_count(7, f64::INFINITY, &mut rng).unwrap();
        assert_eq!(inf.value, 7);
        assert!(noisy_count(1, 0.0, &mut rng).is_err());
    }

    #[test]
    fn noisy_count_floors_at_zero() {
        let mut rng = seeded_rng(73, 0);
        // plenty of draws at a tiny count: negative noise must floor
        for _ in 0..2000 {
            let _ = noisy_count(0, 0.2, &mut rng).unwrap();
        }
    }

    #[test]
    fn noisy_count_mean_tracks_the_truth() {
        let mut rng = seeded_rng(74, 0);
        let runs = 10_000;
        let total: u64 = (0..runs)
            .map(|_| noisy_count(100, 0.1, &mut rng).unwrap().value)
            .sum();
        let mean = total as f64 / runs as f64;
        // scale 10 => sd of the mean ≈ 10·sqrt(2)/100 ≈ 0.14; flooring
        // bias at count 100 is negligible
        assert!((mean - 100.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn private_heuristic_noise_free_matches_plain_heuristic() {
        let endpoints = label_endpoints(400, 4, 0.8, 80);
        let params = PrivacyParams {
            epsilon: f64::INFINITY,
            max_dummies: 8,
        };
        let scheme = HomomorphicKeypair::plain();
        let bucket = SampleSpec::new(0, 1, 0).unwrap();
        let mut rng = seeded_rng(80, 1);
        let mut ledger = CostLedger::new();
        let private = private_heuristic_intersection(
            &endpoints,
            0.0,
            &params,
            &scheme,
            &bucket,
            &mut rng,
            &mut ledger,
        )
        .unwrap();
        let mut plain_ledger = CostLedger::new();
        let plain = heuristic_intersection(&endpoints, 0.0, &mut plain_ledger).unwrap();
        assert_eq!(private.result.estimated_size, plain.result.estimated_size);
        assert!(!private.result.exact);
        assert_eq!(private.trace.initial, plain.trace.initial);
        assert_eq!(private.trace.steps.len(), plain.trace.steps.len());
        for (p, e) in private.trace.steps.iter().zip(&plain.trace.steps) {
            assert_eq!(p.merged_pair, e.merged_pair);
            assert_eq!(p.merged_size, e.merged_size);
        }
        assert!(ledger.ciphertext_operations > 0);
        assert!(private.epsilon_spent.is_infinite());
    }

    #[test]
    fn private_heuristic_with_moderate_noise_stays_close() {
        let endpoints = label_endpoints(300, 4, 0.9, 81);
        let params = PrivacyParams {
            epsilon: 2.0,
            max_dummies: 8,
        };
        let scheme = HomomorphicKeypair::plain();
        let bucket = SampleSpec::new(0, 1, 0).unwrap();
        let mut rng = seeded_rng(81, 2);
        let mut ledger = CostLedger::new();
        let private = private_heuristic_intersection(
            &endpoints,
            0.2,
            &params,
            &scheme,
            &bucket,
            &mut rng,
            &mut ledger,
        )
        .unwrap();
        let mut plain_ledger = CostLedger::new();
        let plain = heuristic_intersection(&endpoints, 0.2, &mut plain_ledger).unwrap();
        // noise per published count has sd ≈ √2/ε ≈ 0.7 records; the
        // bounds differ by a small multiple of that
        assert!(
            (private.result.estimated_size - plain.result.estimated_size).abs() <= 15.0,
            "private {} vs plain {}",
            private.result.estimated_size,
            plain.result.estimated_size
        );
        assert_eq!(
            private.epsilon_spent,
            (endpoints.len() + private.trace.steps.len()) as f64 * 2.0
        );
    }

    #[test]
    fn private_heuristic_rejects_bad_epsilon() {
        let endpoints = label_endpoints(50, 2, 0.5, 82);
        let params = PrivacyParams {
            epsilon: 0.0,
            max_dummies: 4,
        };
        let scheme = HomomorphicKeypair::plain();
        let bucket = SampleSpec::new(0, 1, 0).unwrap();
        let mut rng = seeded_rng(82, 0);
        let mut ledger = CostLedger::new();
        let err = private_heuristic_intersection(
            &endpoints, 0.1, &params, &scheme, &bucket, &mut rng, &mut ledger,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn private_heuristic_ciphertext_cost_scales_with_bucket() {
        let params = PrivacyParams {
            epsilon: 1.0,
            max_dummies: 4,
        };
        let scheme = HomomorphicKeypair::plain();
        let bucket = SampleSpec::new(0, 1, 0).unwrap();
        let mut costs = Vec::new();
        for n in [50u64, 100, 200] {
            let endpoints = label_endpoints(n, 2, 0.9, 83);
            let mut rng = seeded_rng(83, n);
            let mut ledger = CostLedger::new();
            private_heuristic_intersection(
                &endpoints, 0.0, &params, &scheme, &bucket, &mut rng, &mut ledger,
            )
            .unwrap();
            costs.push(ledger.ciphertext_operations as f64 / n as f64);
        }
        // ops per padded record stay flat as N doubles: linear growth
        let spread = costs
            .iter()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b))
            - costs.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert!(
            spread <= costs[0] * 0.25,
            "per-record ciphertext cost not flat: {costs:?}"
        );
    }
}
