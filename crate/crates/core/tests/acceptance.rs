//! Acceptance suite: one test per criterion, each printing a
//! `criterion N: PASS/FAIL` line (visible with `--nocapture` or
//! `--show-output`). Run with
//! `cargo test -p xsect --test acceptance -- --nocapture`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::Rng;

use xsect::bounds::{
    hoeffding_confidence, hoeffding_exact_confidence, sample_size_hoeffding,
    sample_size_serfling, serfling_confidence,
};
use xsect::data::{
    evaluate_predicate, exact_intersection, generate_synthetic, AttrValue, Predicate,
    ProviderDataset, SyntheticSpec, LABEL_ATTR,
};
use xsect::harness::{adult_experiment, run_experiment, write_csv, ExperimentConfig, ExperimentKind};
use xsect::heuristic::{heuristic_intersection, lower_bound, upper_bound, BoundPair};
use xsect::privacy::{
    bn_psi_ca, laplace_sample, noisy_count, psi_ca, HomomorphicKeypair, PrivacyParams,
};
use xsect::protocols::{
    naive_parallel, naive_sequential, sampled_intersection, CostLedger, ProviderEndpoint,
    SampleMode,
};
use xsect::sampling::SampleSpec;
use xsect::seeded_rng;

fn pass(criterion: &str, detail: String) {
    println!("criterion {criterion}: PASS — {detail}");
}

fn fail(criterion: &str, detail: String) -> ! {
    println!("criterion {criterion}: FAIL — {detail}");
    panic!("criterion {criterion} failed: {detail}");
}

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

fn oracle_size(endpoints: &[ProviderEndpoint]) -> u64 {
    let sets: Vec<BTreeSet<u64>> = endpoints
        .iter()
        .map(|e| evaluate_predicate(e.dataset(), e.predicate()).unwrap())
        .collect();
    exact_intersection(&sets).unwrap().len() as u64
}

#[test]
fn criterion_01_hoeffding_sample_size() {
    let m = sample_size_hoeffding(0.01, 0.01).unwrap();
    if m != 23_026 {
        fail("1", format!("sample_size_hoeffding(0.01, 0.01) = {m}, want 23026"));
    }
    pass("1", format!("sample_size_hoeffding(0.01, 0.01) = {m}"));
}

#[test]
fn criterion_02_serfling_sample_size() {
    let m = sample_size_serfling(0.01, 0.01, 100_000, 1.0).unwrap();
    if !(m == 18_716 || m == 18_717) {
        fail("2", format!("sample_size_serfling(0.01, 0.01, 100000, 1) = {m}, want 18716 or 18717"));
    }
    pass("2", format!("sample_size_serfling(0.01, 0.01, 100000, 1) = {m}"));
}

#[test]
fn criterion_03_bound_dominance() {
    let mut rng = seeded_rng(303, 0);
    let mut violations = 0u32;
    for _ in 0..1000 {
        let m = rng.gen_range(2u64..=100_000);
        let eps = rng.gen_range(1e-6f64..=0.2);
        let n = m + rng.gen_range(0u64..=100_000);
        let serfling = serfling_confidence(m, eps, n, 1.0).unwrap();
        let hoeffding = hoeffding_confidence(m, eps);
        if serfling > hoeffding {
            violations += 1;
        }
        let mu = rng.gen_range(0.01f64..0.95);
        let eps_kl = rng.gen_range(1e-6..(1.0 - mu) * 0.99);
        let exact = hoeffding_exact_confidence(m, eps_kl, mu).unwrap();
        if exact > hoeffding_confidence(m, eps_kl) * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    if violations > 0 {
        fail("3", format!("{violations} dominance violations in 1000 draws"));
    }
    pass("3", "serfling ≤ hoeffding and KL-form ≤ hoeffding on 1000 random draws".into());
}

#[test]
fn criterion_04_protocol_equivalence() {
    let mut rng = seeded_rng(304, 0);
    let mut mismatches = 0u32;
    for instance in 0..100 {
        let n = rng.gen_range(1u64..=500);
        let k = rng.gen_range(1u32..=6);
        let r = rng.gen_range(0.0f64..=1.0);
        let endpoints = label_endpoints(n, k, r, 40_000 + instance);
        let expected = oracle_size(&endpoints) as f64;

        let mut l = CostLedger::new();
        let seq = naive_sequential(&endpoints, &mut l).unwrap().estimated_size;
        let mut l = CostLedger::new();
        let par = naive_parallel(&endpoints, &mut l).unwrap().estimated_size;
        let mut l = CostLedger::new();
        let heuristic = heuristic_intersection(&endpoints, 0.0, &mut l)
            .unwrap()
            .result
            .estimated_size;
        let spec = SampleSpec::new(instance, 1, 0).unwrap();
        let mut l = CostLedger::new();
        let sampled = sampled_intersection(&endpoints, &spec, SampleMode::Parallel, &mut l)
            .unwrap()
            .estimated_size;

        for (name, got) in [("seq", seq), ("par", par), ("heuristic", heuristic), ("sampled-b1", sampled)] {
            if got != expected {
                eprintln!("instance {instance} ({n},{k},{r:.2}): {name} {got} != {expected}");
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        fail("4", format!("{mismatches} mismatches on 100 random instances"));
    }
    pass("4", "naive-seq, naive-par, heuristic(δ=0) and sampled(b=1) all match the oracle on 100 instances".into());
}

/// Mean |estimate − exact| / exact of the full k-way intersection at
/// one sample ratio, from the error-vs-sample-size experiment rows.
fn mean_error_at(rows: &[xsect::harness::StatRow], ratio: f64, k: u32) -> f64 {
    rows.iter()
        .find(|row| {
            row.sample_ratio == Some(ratio) && row.datasets_intersected == Some(k)
        })
        .map(|row| row.mean)
        .expect("row present")
}

#[test]
fn criterion_05_sampling_accuracy() {
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for r in [0.5, 0.7] {
        let config = ExperimentConfig {
            kind: ExperimentKind::ErrorVsSampleSize,
            dataset_size: 100_000,
            providers: 10,
            ratio: r,
            sample_ratios: vec![0.01, 0.1, 0.2],
            repeats: 10,
            seed: 20_260_811,
            epsilon: 0.01,
            accuracy: 0.0,
            normalize: false,
            adult_path: None,
            sex: None,
            out: None,
        };
        let rows = run_experiment(&config).unwrap();
        let err_001 = mean_error_at(&rows, 0.01, 10);
        let err_01 = mean_error_at(&rows, 0.1, 10);
        let err_02 = mean_error_at(&rows, 0.2, 10);
        details.push(format!(
            "r={r}: mean err ratio0.01={err_001:.4}, ratio0.1={err_01:.4}, ratio0.2={err_02:.4}"
        ));
        if err_01 > 0.05 {
            failures.push(format!(
                "r={r}: mean relative error {err_01:.4} at sample ratio 0.1 exceeds 0.05"
            ));
        }
        if err_02 > err_001 {
            failures.push(format!(
                "r={r}: error at ratio 0.2 ({err_02:.4}) above ratio 0.01 ({err_001:.4})"
            ));
        }
    }
    if !failures.is_empty() {
        fail(
            "5",
            format!(
                "{} [{}] — the r=0.5 tolerance cannot be met under per-provider \
independent labels: the 10-way intersection holds ~98 of 100000 records and the \
binomial spread of a 10% coordinated sample forces ~0.24 mean relative error; \
see the decisions ledger",
                failures.join("; "),
                details.join("; ")
            ),
        );
    }
    pass("5", details.join("; "));
}

#[test]
fn criterion_06_heuristic_worked_example() {
    let n = 1000u64;
    // Eq. 5/6 arithmetic on the stated ratios
    let initial_upper = upper_bound(&[800, 900, 500, 400]).unwrap();
    let initial_lower = lower_bound(&[0.8, 0.9, 0.5, 0.4], n).unwrap();
    if initial_upper != 400 || initial_lower != 0.0 {
        fail("6", format!("initial bounds ({initial_lower}, {initial_upper}), want (0, 400)"));
    }
    let merged_upper = upper_bound(&[800, 900, 310]).unwrap();
    let merged_lower = lower_bound(&[0.8, 0.9, 0.31], n).unwrap();
    if merged_upper != 310 || (merged_lower - 10.0).abs() > 1e-9 {
        fail("6", format!("post-merge bounds ({merged_lower}, {merged_upper}), want (10, 310)"));
    }

    // the same numbers through the full protocol, with provider 3 and
    // 4 sets overlapping in exactly 310 records
    let ids = |count: u64| -> Vec<u64> { (0..count).collect() };
    let endpoint = |provider: u32, members: &[u64]| -> ProviderEndpoint {
        let set: BTreeSet<u64> = members.iter().copied().collect();
        let labels: Vec<AttrValue> = (0..n).map(|id| AttrValue::Bool(set.contains(&id))).collect();
        let ds = ProviderDataset::from_columns(
            provider,
            (0..n).collect(),
            BTreeMap::from([(LABEL_ATTR.to_string(), labels)]),
        )
        .unwrap();
        ProviderEndpoint::new(ds, Predicate::label(LABEL_ATTR)).unwrap()
    };
    let endpoints = vec![
        endpoint(0, &ids(800)),
        endpoint(1, &ids(900)),
        endpoint(2, &ids(500)),
        endpoint(3, &(0..310).chain(500..590).collect::<Vec<_>>()),
    ];
    let mut ledger = CostLedger::new();
    let outcome = heuristic_intersection(&endpoints, 0.62, &mut ledger).unwrap();
    if outcome.trace.initial != BoundPair::new(0.0, 400.0) {
        fail("6", format!("protocol initial bounds {:?}", outcome.trace.initial));
    }
    let step = &outcome.trace.steps[0];
    if step.merged_size != 310.0 || step.bounds != BoundPair::new(10.0, 310.0) {
        fail("6", format!("protocol post-merge bounds {:?}", step.bounds));
    }
    pass("6", "bounds (0, 0.4N) then (0.01N, 0.31N) exactly; Eq.-6 literal arithmetic (the printed 0.1N is an erratum)".into());
}

#[test]
fn criterion_07_heuristic_convergence_shape() {
    // r = 0.95 keeps the initial lower bound positive: Σ ratios ≈ 9.5 > 9
    let endpoints = label_endpoints(100_000, 10, 0.95, 20_260_811);
    let mut ledger = CostLedger::new();
    let outcome = heuristic_intersection(&endpoints, 0.0, &mut ledger).unwrap();

    if outcome.trace.initial.lower <= 0.0 {
        fail("7", format!("initial lower bound {} not positive", outcome.trace.initial.lower));
    }
    if outcome.trace.steps.len() > 9 {
        fail("7", format!("{} merges exceed k−1 = 9", outcome.trace.steps.len()));
    }
    let mut prev = outcome.trace.initial;
    for step in &outcome.trace.steps {
        if step.bounds.upper > prev.upper || step.bounds.lower < prev.lower {
            fail("7", format!(
                "non-monotone trace at iteration {}: {:?} after {:?}",
                step.iteration, step.bounds, prev
            ));
        }
        prev = step.bounds;
    }
    pass("7", format!(
        "initial bounds ({:.0}, {:.0}), {} monotone merges",
        outcome.trace.initial.lower,
        outcome.trace.initial.upper,
        outcome.trace.steps.len()
    ));
}

fn adult_data_path() -> Option<PathBuf> {
    if let Ok(path) = std::env::var("XSECT_ADULT_DATA") {
        return Some(PathBuf::from(path));
    }
    let default = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/adult.data");
    default.exists().then_some(default)
}

#[test]
fn criterion_08_adult_dataset() {
    let Some(path) = adult_data_path() else {
        fail("8", "the canonical UCI adult.data training file (32561 rows) is required; \
place it at crates/core/tests/data/adult.data or set XSECT_ADULT_DATA. The file is not \
redistributable inside this repository and no package mirror in the build sandbox \
carries it, so this criterion cannot run here; see the decisions ledger".into());
    };
    let mut details = Vec::new();
    for (sex, expected) in [("Male", 252.0), ("Female", 139.0)] {
        let rows = adult_experiment(&path, sex, &[0.1, 0.5], 10, 811).unwrap();
        let exact = rows
            .iter()
            .find(|r| r.algorithm.starts_with("naive-seq"))
            .unwrap()
            .mean;
        if exact != expected {
            fail("8", format!("{sex}: exact intersection {exact}, want {expected}"));
        }
        let at = |ratio: f64| {
            rows.iter()
                .find(|r| r.sample_ratio == Some(ratio))
                .expect("sampled row")
        };
        let half = at(0.5);
        let tenth = at(0.1);
        if (half.mean - expected).abs() > 3.0 * half.std {
            fail("8", format!(
                "{sex}: mean estimate {} at ratio 0.5 outside 3σ = {} of {expected}",
                half.mean, 3.0 * half.std
            ));
        }
        if half.std >= tenth.std {
            fail("8", format!(
                "{sex}: std at ratio 0.5 ({}) not below std at ratio 0.1 ({})",
                half.std, tenth.std
            ));
        }
        details.push(format!(
            "{sex}: exact {exact}, ratio-0.5 mean {:.1} (σ {:.1}), ratio-0.1 σ {:.1}",
            half.mean, half.std, tenth.std
        ));
    }
    pass("8", details.join("; "));
}

#[test]
fn criterion_09_laplace_mechanism() {
    let mut rng = seeded_rng(309, 0);
    let epsilon = 0.5;
    let scale = 1.0 / epsilon;
    let draws = 100_000;
    let samples: Vec<f64> = (0..draws)
        .map(|_| laplace_sample(scale, &mut rng).unwrap())
        .collect();
    let mean = samples.iter().sum::<f64>() / draws as f64;
    let variance =
        samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (draws as f64 - 1.0);
    let target = 2.0 / (epsilon * epsilon);
    if mean.abs() > 0.05 {
        fail("9", format!("raw-noise mean {mean:.4} outside ±0.05"));
    }
    if (variance - target).abs() / target > 0.05 {
        fail("9", format!("variance {variance:.3} not within 5% of {target}"));
    }

    // adjacent counts: every well-populated histogram bin must respect
    // the e^ε likelihood ratio up to sampling tolerance
    let adjacent_draws = 10_000;
    let mut histogram_a: BTreeMap<u64, u64> = BTreeMap::new();
    let mut histogram_b: BTreeMap<u64, u64> = BTreeMap::new();
    for _ in 0..adjacent_draws {
        *histogram_a
            .entry(noisy_count(100, epsilon, &mut rng).unwrap().value)
            .or_default() += 1;
        *histogram_b
            .entry(noisy_count(101, epsilon, &mut rng).unwrap().value)
            .or_default() += 1;
    }
    let bound = epsilon.exp();
    let mut checked = 0;
    for (value, &count_a) in &histogram_a {
        let Some(&count_b) = histogram_b.get(value) else {
            continue;
        };
        if count_a < 100 || count_b < 100 {
            continue;
        }
        checked += 1;
        let (a, b) = (count_a as f64, count_b as f64);
        let tolerance = (3.5 * (1.0 / a + 1.0 / b).sqrt()).exp();
        if a / b > bound * tolerance || b / a > bound * tolerance {
            fail("9", format!(
                "bin {value}: ratio {:.3} breaks e^ε = {bound:.3} (tolerance ×{tolerance:.3})",
                (a / b).max(b / a)
            ));
        }
    }
    if checked == 0 {
        fail("9", "no histogram bin had 100 samples on both sides".into());
    }
    pass("9", format!(
        "mean {mean:.4}, variance {variance:.3} (target {target}), {checked} bins within e^ε"
    ));
}

#[test]
fn criterion_10_psi_ca() {
    // 50 random instances against the plaintext oracle, modular backend
    let mut rng = seeded_rng(310, 0);
    let scheme = HomomorphicKeypair::generate_paillier(512, &mut rng).unwrap();
    for instance in 0..50u64 {
        let size_a = rng.gen_range(1u64..=64);
        let size_b = rng.gen_range(1u64..=64);
        let set = |size: u64, rng: &mut rand_chacha::ChaCha8Rng| -> BTreeSet<u64> {
            let mut out = BTreeSet::new();
            while (out.len() as u64) < size {
                out.insert(rng.gen_range(0..192u64));
            }
            out
        };
        let a = set(size_a, &mut rng);
        let b = set(size_b, &mut rng);
        let expected = a.intersection(&b).count() as u64;
        let mut ledger = CostLedger::new();
        let got = psi_ca(&a, &b, &scheme, &mut rng, &mut ledger).unwrap();
        if got != expected {
            fail("10", format!("instance {instance}: psi_ca {got} != oracle {expected}"));
        }
    }

    // ε → ∞ degeneration and noise reconciliation on the fast backend
    let plain = HomomorphicKeypair::plain();
    let inf = PrivacyParams {
        epsilon: f64::INFINITY,
        max_dummies: 16,
    };
    let a: BTreeSet<u64> = (0..48).collect();
    let b: BTreeSet<u64> = (16..64).collect();
    let truth = 32i64;
    let mut l1 = CostLedger::new();
    let mut l2 = CostLedger::new();
    let baseline = psi_ca(&a, &b, &plain, &mut seeded_rng(311, 1), &mut l1).unwrap();
    let (inf_count, inf_record) =
        bn_psi_ca(&a, &b, &inf, 64, &plain, &mut seeded_rng(311, 1), &mut l2).unwrap();
    if inf_count.value != baseline || inf_record.net() != 0 {
        fail("10", format!("ε=∞ bn_psi_ca {} != psi_ca {baseline}", inf_count.value));
    }

    let params = PrivacyParams {
        epsilon: 0.5,
        max_dummies: 16,
    };
    let mut noise_sum = 0i64;
    let runs = 500;
    let mut rng = seeded_rng(311, 2);
    for _ in 0..runs {
        let mut ledger = CostLedger::new();
        let (noisy, record) =
            bn_psi_ca(&a, &b, &params, 64, &plain, &mut rng, &mut ledger).unwrap();
        if noisy.value as i64 - record.net() != truth {
            fail("10", format!(
                "noise record does not reconcile: {} − {} != {truth}",
                noisy.value,
                record.net()
            ));
        }
        noise_sum += noisy.value as i64 - truth;
    }
    let center = noise_sum as f64 / runs as f64;
    if center.abs() > 1.0 {
        fail("10", format!("noisy − true centred at {center:.3}, outside ±1"));
    }
    pass("10", format!(
        "50/50 modular instances exact; ε=∞ equals psi_ca; noise centred at {center:+.3} and reconciles"
    ));
}

#[test]
fn criterion_11_cost_reduction() {
    let n = 100_000u64;
    let k = 10u32;
    let mut ratios = Vec::new();
    for seed in 0..10u64 {
        let endpoints = label_endpoints(n, k, 0.7, 50_000 + seed);
        let mut naive_ledger = CostLedger::new();
        naive_parallel(&endpoints, &mut naive_ledger).unwrap();

        let mut rng = seeded_rng(50_000 + seed, 77);
        let spec = xsect::sampling::make_sample_spec(n, n / 10, &mut rng).unwrap();
        let mut sampled_ledger = CostLedger::new();
        sampled_intersection(&endpoints, &spec, SampleMode::Parallel, &mut sampled_ledger)
            .unwrap();

        let ratio = sampled_ledger.records_transferred as f64
            / naive_ledger.records_transferred as f64;
        if !(0.05..=0.2).contains(&ratio) {
            fail("11", format!("seed {seed}: transfer ratio {ratio:.4} outside [0.05, 0.2]"));
        }
        ratios.push(ratio);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    pass("11", format!("sampled/naive transfer ratio ≈ {mean:.4} over 10 seeds (m/N = 0.1)"));
}

#[test]
fn criterion_12_determinism() {
    let configs = vec![
        ExperimentConfig {
            kind: ExperimentKind::ErrorVsSampleSize,
            dataset_size: 2000,
            providers: 5,
            ratio: 0.7,
            sample_ratios: vec![0.1, 0.5],
            repeats: 4,
            seed: 7,
            epsilon: 0.01,
            accuracy: 0.0,
            normalize: false,
            adult_path: None,
            sex: None,
            out: None,
        },
        ExperimentConfig {
            kind: ExperimentKind::BoundComparison,
            dataset_size: 50_000,
            providers: 1,
            ratio: 0.0,
            sample_ratios: vec![],
            repeats: 1,
            seed: 0,
            epsilon: 0.01,
            accuracy: 0.0,
            normalize: false,
            adult_path: None,
            sex: None,
            out: None,
        },
        ExperimentConfig {
            kind: ExperimentKind::HeuristicConvergence,
            dataset_size: 3000,
            providers: 6,
            ratio: 0.95,
            sample_ratios: vec![],
            repeats: 3,
            seed: 13,
            epsilon: 0.01,
            accuracy: 0.0,
            normalize: false,
            adult_path: None,
            sex: None,
            out: None,
        },
    ];
    for config in configs {
        let mut first = Vec::new();
        write_csv(&run_experiment(&config).unwrap(), &mut first).unwrap();
        let mut second = Vec::new();
        write_csv(&run_experiment(&config).unwrap(), &mut second).unwrap();
        if first != second {
            fail("12", format!("{:?} rerun produced different CSV bytes", config.kind));
        }
    }
    pass("12", "three experiment kinds rerun byte-identically".into());
}
