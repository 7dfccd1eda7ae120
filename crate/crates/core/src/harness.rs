//! Seeded experiment harness.
//!
//! Each experiment runs `repeats` times with seeds `base, base+1, …`,
//! aggregates the measured quantity into mean/standard deviation rows
//! and emits one fixed-schema CSV. Identical configurations produce
//! byte-identical files: every source of randomness is derived from
//! the per-run seed and rows are emitted in a deterministic order.
//!
//! CSV schema (one header, one row per group):
//! `experiment,algorithm,N,k,r,sample_ratio,m,datasets_intersected,mean,std,repeats,records_transferred,predicate_evaluations,messages,ciphertext_operations`
//! with the ledger columns averaged over the runs of the group and
//! fields that do not apply left empty.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bounds::{hoeffding_confidence, scale_up_estimate, serfling_confidence};
use crate::data::{
    evaluate_predicate, generate_synthetic, load_adult, Predicate, ProviderDataset, RecordId,
    SyntheticSpec, LABEL_ATTR,
};
use crate::error::{Error, Result};
use crate::heuristic::heuristic_intersection;
use crate::protocols::{naive_sequential, CostLedger, ProviderEndpoint};
use crate::sampling::make_sample_spec;
use crate::seeded_rng;

/// RNG stream for sampling-contract draws, outside the range of
/// provider-indexed data-generation streams.
const SAMPLE_STREAM: u64 = 1 << 33;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// Confidence of both bounds across sample sizes (the bound
    /// comparison curve data).
    BoundComparison,
    /// Relative error of the sampled estimate per sample ratio and
    /// per number of datasets intersected.
    ErrorVsSampleSize,
    /// Estimated intersection size per algorithm across the iterative
    /// intersection levels.
    AlgorithmComparison,
    /// Lower/upper heuristic bounds per iteration.
    HeuristicConvergence,
    /// Sampled estimation of the fixed four-predicate intersection on
    /// the Adult census file.
    Adult,
}

impl ExperimentKind {
    fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BoundComparison => "bound-comparison",
            ExperimentKind::ErrorVsSampleSize => "error-vs-sample-size",
            ExperimentKind::AlgorithmComparison => "algorithm-comparison",
            ExperimentKind::HeuristicConvergence => "heuristic-convergence",
            ExperimentKind::Adult => "adult",
        }
    }
}

fn default_repeats() -> u32 {
    10
}

fn default_epsilon() -> f64 {
    0.01
}

/// Full description of one experiment.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub dataset_size: u64,
    #[serde(default)]
    pub providers: u32,
    #[serde(default)]
    pub ratio: f64,
    #[serde(default)]
    pub sample_ratios: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: u32,
    #[serde(default)]
    pub seed: u64,
    /// Accuracy ε of the bound-comparison curves.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Heuristic accuracy δ (0 runs every merge).
    #[serde(default)]
    pub accuracy: f64,
    /// Divide errors by N instead of by the exact intersection size.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub adult_path: Option<PathBuf>,
    /// `Male` or `Female` for the Adult experiment.
    #[serde(default)]
    pub sex: Option<String>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        for ratio in &self.sample_ratios {
            if !(*ratio > 0.0 && *ratio <= 1.0) {
                return Err(Error::Config(format!(
                    "sample ratio {ratio} outside (0, 1]"
                )));
            }
        }
        match self.kind {
            ExperimentKind::Adult => {
                if self.adult_path.is_none() {
                    return Err(Error::Config("adult experiment needs adult-path".into()));
                }
            }
            ExperimentKind::BoundComparison => {
                if self.dataset_size == 0 {
                    return Err(Error::Config("dataset-size must be at least 1".into()));
                }
            }
            _ => {
                if self.dataset_size == 0 || self.providers == 0 {
                    return Err(Error::Config(
                        "dataset-size and providers must be at least 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Averaged ledger counters of one row group.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LedgerMeans {
    pub records_transferred: f64,
    pub predicate_evaluations: f64,
    pub messages: f64,
    pub ciphertext_operations: f64,
}

impl LedgerMeans {
    fn average(ledgers: &[CostLedger]) -> Self {
        if ledgers.is_empty() {
            return LedgerMeans::default();
        }
        let n = ledgers.len() as f64;
        LedgerMeans {
            records_transferred: ledgers.iter().map(|l| l.records_transferred as f64).sum::<f64>() / n,
            predicate_evaluations: ledgers.iter().map(|l| l.predicate_evaluations as f64).sum::<f64>() / n,
            messages: ledgers.iter().map(|l| l.messages as f64).sum::<f64>() / n,
            ciphertext_operations: ledgers.iter().map(|l| l.ciphertext_operations as f64).sum::<f64>() / n,
        }
    }
}

/// One aggregated output row.
#[derive(Clone, Debug)]
pub struct StatRow {
    pub experiment: String,
    pub algorithm: String,
    pub dataset_size: u64,
    pub providers: u32,
    pub ratio: f64,
    pub sample_ratio: Option<f64>,
    /// Requested sample size m, where applicable.
    pub sample_size: Option<u64>,
    pub datasets_intersected: Option<u32>,
    pub mean: f64,
    pub std: f64,
    pub repeats: u32,
    pub single_run: bool,
    pub ledger: LedgerMeans,
}

/// Mean and unbiased standard deviation of one group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub count: u32,
}

/// Groups samples by key and aggregates each group; output is ordered
/// by key. Single-sample groups carry a standard deviation of zero.
pub fn summarize<K: Ord + Clone>(samples: &[(K, f64)]) -> Result<Vec<(K, Stats)>> {
    if samples.is_empty() {
        return Err(Error::Domain("nothing to summarize".into()));
    }
    let mut keys: Vec<K> = samples.iter().map(|(k, _)| k.clone()).collect();
    keys.sort();
    keys.dedup();
    let mut out = Vec::with_capacity(keys.len());
    for key in keys {
        let values: Vec<f64> = samples
            .iter()
            .filter(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .collect();
        out.push((key, stats_of(&values)));
    }
    Ok(out)
}

fn stats_of(values: &[f64]) -> Stats {
    let count = values.len() as u32;
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (count as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    Stats { mean, std, count }
}

/// Runs the configured experiment and, when `out` is set, writes the
/// CSV file. Returns the aggregated rows either way.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<StatRow>> {
    config.validate()?;
    let rows = match config.kind {
        ExperimentKind::BoundComparison => bound_comparison(config),
        ExperimentKind::ErrorVsSampleSize => iterative_sampling(config, Quantity::RelativeError),
        ExperimentKind::AlgorithmComparison => iterative_sampling(config, Quantity::Estimate),
        ExperimentKind::HeuristicConvergence => heuristic_convergence(config),
        ExperimentKind::Adult => {
            let path = config.adult_path.as_ref().expect("validated");
            let sex = config.sex.as_deref().unwrap_or("Male");
            adult_experiment(path, sex, &config.sample_ratios, config.repeats, config.seed)
        }
    }?;
    if let Some(path) = &config.out {
        let file = File::create(path)?;
        let mut writer = BufWriter::new(file);
        write_csv(&rows, &mut writer)?;
        writer.flush()?;
    }
    Ok(rows)
}

pub const CSV_HEADER: &str = "experiment,algorithm,N,k,r,sample_ratio,m,datasets_intersected,mean,std,repeats,records_transferred,predicate_evaluations,messages,ciphertext_operations";

/// Writes rows in the fixed schema.
pub fn write_csv<W: Write>(rows: &[StatRow], out: &mut W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        let opt_f = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        let opt_k = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.experiment,
            row.algorithm,
            row.dataset_size,
            row.providers,
            row.ratio,
            opt_f(row.sample_ratio),
            opt_u(row.sample_size),
            opt_k(row.datasets_intersected),
            row.mean,
            row.std,
            row.repeats,
            row.ledger.records_transferred,
            row.ledger.predicate_evaluations,
            row.ledger.messages,
            row.ledger.ciphertext_operations,
        )?;
    }
    Ok(())
}

fn bound_comparison(config: &ExperimentConfig) -> Result<Vec<StatRow>> {
    let n = config.dataset_size;
    let eps = config.epsilon;
    // 200 evenly spaced sample sizes up to N
    let step = (n / 200).max(1);
    let mut rows = Vec::new();
    let mut m = step;
    while m <= n {
        for (algorithm, confidence) in [
            ("hoeffding", hoeffding_confidence(m, eps)),
            ("serfling", serfling_confidence(m, eps, n, 1.0)?),
        ] {
            rows.push(StatRow {
                experiment: config.kind.name().to_string(),
                algorithm: algorithm.to_string(),
                dataset_size: n,
                providers: config.providers,
                ratio: config.ratio,
                sample_ratio: None,
                sample_size: Some(m),
                datasets_intersected: None,
                mean: confidence,
                std: 0.0,
                repeats: 1,
                single_run: true,
                ledger: LedgerMeans::default(),
            });
        }
        m += step;
    }
    Ok(rows)
}

enum Quantity {
    RelativeError,
    Estimate,
}

/// Per-seed raw results of one iterative sampled run.
struct IterativeRun {
    exact_levels: Vec<u64>,
    estimate_levels: Vec<f64>,
    ledger: CostLedger,
}

/// Evaluates the iterative intersection (one dataset added at a time)
/// exactly and through one coordinated sample.
fn iterative_levels(
    datasets: &[ProviderDataset],
    predicate: &Predicate,
    sample_size: u64,
    seed: u64,
    stream: u64,
) -> Result<IterativeRun> {
    let n = datasets[0].size();
    let mut rng = seeded_rng(seed, stream);
    let spec = make_sample_spec(n, sample_size, &mut rng)?;
    let mut ledger = CostLedger::new();

    let mut exact_levels = Vec::with_capacity(datasets.len());
    let mut estimate_levels = Vec::with_capacity(datasets.len());
    let mut exact_acc: Option<BTreeSet<RecordId>> = None;
    let mut sample_acc: Option<BTreeSet<RecordId>> = None;

    for dataset in datasets {
        let endpoint = ProviderEndpoint::new(dataset.clone(), predicate.clone())?;
        let hits = evaluate_predicate(dataset, predicate)?;
        exact_acc = Some(match exact_acc {
            None => hits,
            Some(acc) => acc.intersection(&hits).copied().collect(),
        });
        exact_levels.push(exact_acc.as_ref().unwrap().len() as u64);

        let (sample_hits, bucket_size) = endpoint.sampled_predicate_ids(&spec, &mut ledger);
        sample_acc = Some(match sample_acc {
            None => sample_hits,
            Some(acc) => acc.intersection(&sample_hits).copied().collect(),
        });
        let estimate = if bucket_size == 0 {
            0.0
        } else {
            scale_up_estimate(sample_acc.as_ref().unwrap().len() as u64, bucket_size, n)?
        };
        estimate_levels.push(estimate);
    }
    Ok(IterativeRun {
        exact_levels,
        estimate_levels,
        ledger,
    })
}

fn iterative_sampling(config: &ExperimentConfig, quantity: Quantity) -> Result<Vec<StatRow>> {
    if config.sample_ratios.is_empty() {
        return Err(Error::Config("sample-ratios must not be empty".into()));
    }
    let n = config.dataset_size;
    let k = config.providers;
    let predicate = Predicate::label(LABEL_ATTR);
    let mut rows = Vec::new();

    // (ratio index, level) -> per-seed values, plus naive exact sizes
    let mut naive_levels: Vec<Vec<f64>> = vec![Vec::new(); k as usize];
    let mut sampled: Vec<Vec<Vec<f64>>> =
        vec![vec![Vec::new(); k as usize]; config.sample_ratios.len()];
    let mut ledgers: Vec<Vec<CostLedger>> = vec![Vec::new(); config.sample_ratios.len()];

    for run in 0..config.repeats {
        let seed = config.seed + run as u64;
        let datasets = generate_synthetic(&SyntheticSpec {
            dataset_size: n,
            provider_count: k,
            satisfaction_ratio: config.ratio,
            seed,
        })?;
        let mut exact_of_run: Option<Vec<u64>> = None;
        for (ratio_index, ratio) in config.sample_ratios.iter().enumerate() {
            let sample_size = ((*ratio * n as f64).round() as u64).clamp(1, n);
            // one sample stream per ratio; the run seed stays base+j
            let run_data = iterative_levels(
                &datasets,
                &predicate,
                sample_size,
                seed,
                SAMPLE_STREAM + ratio_index as u64,
            )?;
            for level in 0..k as usize {
                let exact = run_data.exact_levels[level];
                let estimate = run_data.estimate_levels[level];
                let value = match quantity {
                    Quantity::Estimate => estimate,
                    Quantity::RelativeError => {
                        let denominator = if config.normalize {
                            n as f64
                        } else {
                            exact as f64
                        };
                        (estimate - exact as f64).abs() / denominator
                    }
                };
                sampled[ratio_index][level].push(value);
            }
            ledgers[ratio_index].push(run_data.ledger);
            exact_of_run = Some(run_data.exact_levels);
        }
        if let Some(levels) = exact_of_run {
            for (level, value) in levels.iter().enumerate() {
                naive_levels[level].push(*value as f64);
            }
        }
    }

    if matches!(quantity, Quantity::Estimate) {
        for (level, values) in naive_levels.iter().enumerate() {
            let stats = stats_of(values);
            rows.push(StatRow {
                experiment: config.kind.name().to_string(),
                algorithm: "naive-seq".to_string(),
                dataset_size: n,
                providers: k,
                ratio: config.ratio,
                sample_ratio: None,
                sample_size: None,
                datasets_intersected: Some(level as u32 + 1),
                mean: stats.mean,
                std: stats.std,
                repeats: stats.count,
                single_run: stats.count == 1,
                ledger: LedgerMeans::default(),
            });
        }
    }

    for (ratio_index, ratio) in config.sample_ratios.iter().enumerate() {
        let sample_size = ((*ratio * n as f64).round() as u64).clamp(1, n);
        let ledger = LedgerMeans::average(&ledgers[ratio_index]);
        for level in 0..k as usize {
            let stats = stats_of(&sampled[ratio_index][level]);
            rows.push(StatRow {
                experiment: config.kind.name().to_string(),
                algorithm: "sample-par".to_string(),
                dataset_size: n,
                providers: k,
                ratio: config.ratio,
                sample_ratio: Some(*ratio),
                sample_size: Some(sample_size),
                datasets_intersected: Some(level as u32 + 1),
                mean: stats.mean,
                std: stats.std,
                repeats: stats.count,
                single_run: stats.count == 1,
                ledger,
            });
        }
    }
    Ok(rows)
}

fn heuristic_convergence(config: &ExperimentConfig) -> Result<Vec<StatRow>> {
    let n = config.dataset_size;
    let k = config.providers;
    // (iteration, bound-kind) -> per-seed values
    let mut lower: Vec<(u32, f64)> = Vec::new();
    let mut upper: Vec<(u32, f64)> = Vec::new();
    let mut ledgers = Vec::new();

    for run in 0..config.repeats {
        let seed = config.seed + run as u64;
        let datasets = generate_synthetic(&SyntheticSpec {
            dataset_size: n,
            provider_count: k,
            satisfaction_ratio: config.ratio,
            seed,
        })?;
        let endpoints: Vec<ProviderEndpoint> = datasets
            .into_iter()
            .map(|ds| ProviderEndpoint::new(ds, Predicate::label(LABEL_ATTR)))
            .collect::<Result<_>>()?;
        let mut ledger = CostLedger::new();
        let outcome = heuristic_intersection(&endpoints, config.accuracy, &mut ledger)?;
        lower.push((0, outcome.trace.initial.lower));
        upper.push((0, outcome.trace.initial.upper));
        for step in &outcome.trace.steps {
            lower.push((step.iteration as u32, step.bounds.lower));
            upper.push((step.iteration as u32, step.bounds.upper));
        }
        ledgers.push(ledger);
    }

    let ledger = LedgerMeans::average(&ledgers);
    let mut rows = Vec::new();
    for (algorithm, samples) in [("heuristic-lower", lower), ("heuristic-upper", upper)] {
        for (iteration, stats) in summarize(&samples)? {
            rows.push(StatRow {
                experiment: config.kind.name().to_string(),
                algorithm: algorithm.to_string(),
                dataset_size: n,
                providers: k,
                ratio: config.ratio,
                sample_ratio: None,
                sample_size: None,
                datasets_intersected: Some(iteration),
                mean: stats.mean,
                std: stats.std,
                repeats: stats.count,
                single_run: stats.count == 1,
                ledger,
            });
        }
    }
    Ok(rows)
}

/// The fixed Adult vertical split: one attribute per provider.
pub fn adult_split() -> Vec<Vec<String>> {
    [["age"], ["marital-status"], ["sex"], ["income"]]
        .iter()
        .map(|group| group.iter().map(|s| s.to_string()).collect())
        .collect()
}

/// The fixed four predicates of the Adult experiment.
pub fn adult_predicates(sex: &str) -> Result<Vec<Predicate>> {
    if sex != "Male" && sex != "Female" {
        return Err(Error::Config(format!("sex must be Male or Female, got {sex:?}")));
    }
    Ok(vec![
        "age>=30".parse()?,
        "marital-status=Never-married".parse()?,
        format!("sex={sex}").parse()?,
        "income=>50K".parse()?,
    ])
}

/// Loads the Adult file, computes the exact four-predicate
/// intersection, then estimates it through coordinated samples at each
/// ratio, `repeats` seeds each.
pub fn adult_experiment(
    path: &Path,
    sex: &str,
    sample_ratios: &[f64],
    repeats: u32,
    base_seed: u64,
) -> Result<Vec<StatRow>> {
    let datasets = load_adult(path, &adult_split())?;
    let predicates = adult_predicates(sex)?;
    let n = datasets[0].size();
    let endpoints: Vec<ProviderEndpoint> = datasets
        .into_iter()
        .zip(predicates)
        .map(|(ds, predicate)| ProviderEndpoint::new(ds, predicate))
        .collect::<Result<_>>()?;

    let mut exact_ledger = CostLedger::new();
    let exact = naive_sequential(&endpoints, &mut exact_ledger)?;

    let mut rows = vec![StatRow {
        experiment: "adult".to_string(),
        algorithm: format!("naive-seq-{}", sex.to_lowercase()),
        dataset_size: n,
        providers: endpoints.len() as u32,
        ratio: 0.0,
        sample_ratio: None,
        sample_size: None,
        datasets_intersected: Some(endpoints.len() as u32),
        mean: exact.estimated_size,
        std: 0.0,
        repeats: 1,
        single_run: true,
        ledger: LedgerMeans::average(&[exact_ledger]),
    }];

    for ratio in sample_ratios {
        let sample_size = ((*ratio * n as f64).round() as u64).clamp(1, n);
        let mut estimates = Vec::with_capacity(repeats as usize);
        let mut ledgers = Vec::with_capacity(repeats as usize);
        for run in 0..repeats {
            let seed = base_seed + run as u64;
            let mut rng = seeded_rng(seed, SAMPLE_STREAM);
            let spec = make_sample_spec(n, sample_size, &mut rng)?;
            let mut ledger = CostLedger::new();
            let result = crate::protocols::sampled_intersection(
                &endpoints,
                &spec,
                crate::protocols::SampleMode::Parallel,
                &mut ledger,
            )?;
            estimates.push(result.estimated_size);
            ledgers.push(ledger);
        }
        let stats = stats_of(&estimates);
        rows.push(StatRow {
            experiment: "adult".to_string(),
            algorithm: format!("sample-par-{}", sex.to_lowercase()),
            dataset_size: n,
            providers: endpoints.len() as u32,
            ratio: 0.0,
            sample_ratio: Some(*ratio),
            sample_size: Some(sample_size),
            datasets_intersected: Some(endpoints.len() as u32),
            mean: stats.mean,
            std: stats.std,
            repeats: stats.count,
            single_run: stats.count == 1,
            ledger: LedgerMeans::average(&ledgers),
        });
    }
    Ok(rows)
}
