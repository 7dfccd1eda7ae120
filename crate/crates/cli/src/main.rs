//! `xsect`: exact and approximate intersection-cardinality runs over
//! simulated vertically partitioned data providers.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xsect::bounds::{
    hoeffding_confidence, sample_size_hoeffding, sample_size_hoeffding_two_sided,
    sample_size_serfling, serfling_confidence,
};
use xsect::config::parse_run_config;
use xsect::data::{
    evaluate_predicate, exact_intersection, generate_synthetic, write_labels_csv, Predicate,
    SyntheticSpec, LABEL_ATTR,
};
use xsect::error::{Error, Result};
use xsect::harness::{run_experiment, write_csv, ExperimentConfig, ExperimentKind};
use xsect::heuristic::{heuristic_intersection, heuristic_with_sampling, HeuristicOutcome};
use xsect::privacy::{private_heuristic_intersection, HomomorphicKeypair, PrivacyParams};
use xsect::protocols::{
    naive_parallel, naive_sequential, sampled_intersection, CostLedger, IntersectionResult,
    ProviderEndpoint, SampleMode,
};
use xsect::sampling::{make_sample_spec, SampleSpec};
use xsect::seeded_rng;

/// RNG streams for the CLI's own draws, outside the provider-indexed
/// data-generation streams.
const SAMPLE_STREAM: u64 = (1 << 34) + 1;
const KEY_STREAM: u64 = (1 << 34) + 2;
const PROTOCOL_STREAM: u64 = (1 << 34) + 3;

#[derive(Parser)]
#[command(
    name = "xsect",
    version,
    about = "Intersection-set cardinality across vertically partitioned data providers",
    long_about = "Simulates non-cooperating data providers holding vertical slices of one \
record population and estimates how many records satisfy every provider's predicate, \
trading accuracy for computation and network cost."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic provider datasets and write one id,label CSV per provider.
    GenData(GenDataArgs),
    /// Invert a concentration bound into the minimal sample size.
    SampleSize(SampleSizeArgs),
    /// Execute one protocol, printing one CSV row per repeat.
    Run(Box<RunArgs>),
    /// Run a full experiment suite and write its CSV.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Records per provider (N).
    #[arg(long, value_name = "N")]
    dataset_size: u64,
    /// Number of providers (k).
    #[arg(long, value_name = "K")]
    providers: u32,
    /// Probability that a record satisfies the predicate (r).
    #[arg(long, value_name = "R")]
    ratio: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for provider_<i>.csv files.
    #[arg(long, value_name = "DIR")]
    out_dir: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BoundKind {
    Hoeffding,
    Serfling,
}

#[derive(Args)]
struct SampleSizeArgs {
    /// Acceptable relative error ε.
    #[arg(long)]
    epsilon: f64,
    /// Confidence δ: probability of exceeding ε.
    #[arg(long)]
    delta: f64,
    /// Dataset size N (required for the serfling bound).
    #[arg(long, value_name = "N")]
    dataset_size: Option<u64>,
    #[arg(long, value_enum, default_value_t = BoundKind::Hoeffding)]
    bound: BoundKind,
    /// Split δ over both tails (symmetric-error mode).
    #[arg(long)]
    two_sided: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algorithm {
    /// Exact: stream a shrinking candidate set through providers.
    NaiveSeq,
    /// Exact: every provider ships its full predicate set.
    NaivePar,
    /// Sampled estimate, sequential filtering.
    SampleSeq,
    /// Sampled estimate, parallel collection.
    SamplePar,
    /// Bound tightening with exact merges.
    Heuristic,
    /// Bound tightening with sampled merges.
    HeuristicSample,
    /// Bound tightening over noisy counts and BN-PSI-CA merges.
    PrivateHeuristic,
}

impl Algorithm {
    fn name(self) -> &'static str {
        match self {
            Algorithm::NaiveSeq => "naive-seq",
            Algorithm::NaivePar => "naive-par",
            Algorithm::SampleSeq => "sample-seq",
            Algorithm::SamplePar => "sample-par",
            Algorithm::Heuristic => "heuristic",
            Algorithm::HeuristicSample => "heuristic-sample",
            Algorithm::PrivateHeuristic => "private-heuristic",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CryptoBackend {
    /// Insecure identity backend; fast and deterministic.
    Plain,
    /// Paillier at the configured key size.
    Modular,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    algorithm: Algorithm,
    /// Records per provider (N).
    #[arg(long, value_name = "N")]
    dataset_size: u64,
    /// Number of providers (k).
    #[arg(long, value_name = "K")]
    providers: u32,
    /// Predicate satisfaction ratio (r).
    #[arg(long, value_name = "R")]
    ratio: f64,
    /// Sample size as a fraction of N (sampled algorithms; for
    /// private-heuristic, the agreed bucket; default: full data).
    #[arg(long, value_name = "F")]
    sample_ratio: Option<f64>,
    /// Meaning depends on the algorithm: accuracy ε of the sample-size
    /// inversion (sample-seq/par), or the differential-privacy ε
    /// (private-heuristic).
    #[arg(long)]
    epsilon: Option<f64>,
    /// Meaning depends on the algorithm: inversion confidence
    /// (sample-seq/par), or the heuristic accuracy δ (heuristic,
    /// heuristic-sample, private-heuristic).
    #[arg(long)]
    delta: Option<f64>,
    /// Bound used when deriving the sample size from ε/δ.
    #[arg(long, value_enum, default_value_t = BoundKind::Hoeffding)]
    bound: BoundKind,
    /// Confidence for sizing the per-merge samples of heuristic-sample.
    #[arg(long, default_value_t = xsect::heuristic::DEFAULT_SAMPLE_CONFIDENCE)]
    sample_confidence: f64,
    #[arg(long, value_enum, default_value_t = CryptoBackend::Plain)]
    crypto: CryptoBackend,
    /// Paillier modulus size in bits (modular backend).
    #[arg(long, default_value_t = 512)]
    key_bits: u64,
    /// Dummy-count cap per BN-PSI-CA run.
    #[arg(long, default_value_t = 16)]
    max_dummies: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of repeats; run j uses seed+j.
    #[arg(long, default_value_t = 1, value_name = "R")]
    repeats: u32,
    /// Write the convergence trace of the first run (heuristic
    /// algorithms) as per-iteration CSV.
    #[arg(long, value_name = "PATH")]
    emit_trace: Option<PathBuf>,
    /// Write rows to a file instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML run-configuration file (mirrors the experiment flags).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["kind"])]
    config: Option<PathBuf>,
    #[arg(long, value_name = "KIND")]
    kind: Option<String>,
    #[arg(long, value_name = "N", default_value_t = 100_000)]
    dataset_size: u64,
    #[arg(long, value_name = "K", default_value_t = 10)]
    providers: u32,
    #[arg(long, value_name = "R", default_value_t = 0.7)]
    ratio: f64,
    /// Comma-separated sample ratios.
    #[arg(long, value_delimiter = ',', value_name = "F,F,...")]
    sample_ratios: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    repeats: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Accuracy ε for bound-comparison.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Heuristic accuracy δ for heuristic-convergence.
    #[arg(long, default_value_t = 0.0)]
    accuracy: f64,
    /// Normalize errors by N instead of the exact intersection size.
    #[arg(long)]
    normalize: bool,
    /// Path to the Adult census training file.
    #[arg(long, value_name = "PATH")]
    adult_path: Option<PathBuf>,
    /// Male or Female (adult experiment).
    #[arg(long)]
    sex: Option<String>,
    /// Output CSV path.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::GenData(args) => gen_data(args),
        Command::SampleSize(args) => sample_size(args),
        Command::Run(args) => run(*args),
        Command::Experiment(args) => experiment(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn gen_data(args: GenDataArgs) -> Result<()> {
    let datasets = generate_synthetic(&SyntheticSpec {
        dataset_size: args.dataset_size,
        provider_count: args.providers,
        satisfaction_ratio: args.ratio,
        seed: args.seed,
    })?;
    fs::create_dir_all(&args.out_dir)?;
    for dataset in &datasets {
        let path = args.out_dir.join(format!("provider_{}.csv", dataset.provider_id()));
        let mut writer = BufWriter::new(File::create(&path)?);
        write_labels_csv(dataset, &mut writer)?;
        writer.flush()?;
    }
    println!(
        "wrote {} provider file(s) under {}",
        datasets.len(),
        args.out_dir.display()
    );
    Ok(())
}

fn sample_size(args: SampleSizeArgs) -> Result<()> {
    let delta = args.delta;
    let (m, confidence) = match args.bound {
        BoundKind::Hoeffding => {
            let m = if args.two_sided {
                sample_size_hoeffding_two_sided(args.epsilon, delta)?
            } else {
                sample_size_hoeffding(args.epsilon, delta)?
            };
            let mut confidence = hoeffding_confidence(m, args.epsilon);
            if args.two_sided {
                confidence = (2.0 * confidence).min(1.0);
            }
            (m, confidence)
        }
        BoundKind::Serfling => {
            let n = args.dataset_size.ok_or_else(|| {
                Error::Config("the serfling bound needs --dataset-size".into())
            })?;
            let effective_delta = if args.two_sided { delta / 2.0 } else { delta };
            let m = sample_size_serfling(args.epsilon, effective_delta, n, 1.0)?;
            let mut confidence = serfling_confidence(m, args.epsilon, n, 1.0)?;
            if args.two_sided {
                confidence = (2.0 * confidence).min(1.0);
            }
            (m, confidence)
        }
    };
    println!("m={m} confidence={confidence}");
    Ok(())
}

const RUN_CSV_HEADER: &str = "algorithm,N,k,r,m,seed,estimate,exact_size,relative_error,records_transferred,predicate_evaluations,messages,ciphertext_operations";

fn run(args: RunArgs) -> Result<()> {
    if args.repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut sink: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(std::io::stdout().lock()),
    };
    writeln!(sink, "{RUN_CSV_HEADER}")?;

    for repeat in 0..args.repeats {
        let seed = args.seed + repeat as u64;
        let row = run_once(&args, seed, repeat == 0)?;
        writeln!(sink, "{row}")?;
    }
    sink.flush()?;
    Ok(())
}

/// Derives the target sample size from --sample-ratio or the ε/δ
/// bound inversion.
fn target_sample_size(args: &RunArgs, n: u64) -> Result<u64> {
    if let Some(ratio) = args.sample_ratio {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::Config(format!("sample ratio {ratio} outside (0, 1]")));
        }
        return Ok(((ratio * n as f64).round() as u64).clamp(1, n));
    }
    match (args.epsilon, args.delta) {
        (Some(epsilon), Some(delta)) => {
            let m = match args.bound {
                BoundKind::Hoeffding => sample_size_hoeffding(epsilon, delta)?,
                BoundKind::Serfling => sample_size_serfling(epsilon, delta, n, 1.0)?,
            };
            Ok(m.min(n))
        }
        _ => Err(Error::Config(
            "sampled runs need --sample-ratio or both --epsilon and --delta".into(),
        )),
    }
}

fn run_once(args: &RunArgs, seed: u64, first: bool) -> Result<String> {
    let n = args.dataset_size;
    let datasets = generate_synthetic(&SyntheticSpec {
        dataset_size: n,
        provider_count: args.providers,
        satisfaction_ratio: args.ratio,
        seed,
    })?;
    let exact_size = {
        let sets = datasets
            .iter()
            .map(|ds| evaluate_predicate(ds, &Predicate::label(LABEL_ATTR)))
            .collect::<Result<Vec<_>>>()?;
        exact_intersection(&sets)?.len() as f64
    };
    let endpoints: Vec<ProviderEndpoint> = datasets
        .into_iter()
        .map(|ds| ProviderEndpoint::new(ds, Predicate::label(LABEL_ATTR)))
        .collect::<Result<_>>()?;

    let mut ledger = CostLedger::new();
    let mut sample_size_used: Option<u64> = None;
    let accuracy = args.delta.unwrap_or(0.0);

    let result: IntersectionResult = match args.algorithm {
        Algorithm::NaiveSeq => naive_sequential(&endpoints, &mut ledger)?,
        Algorithm::NaivePar => naive_parallel(&endpoints, &mut ledger)?,
        Algorithm::SampleSeq | Algorithm::SamplePar => {
            let m = target_sample_size(args, n)?;
            let mut rng = seeded_rng(seed, SAMPLE_STREAM);
            let spec = make_sample_spec(n, m, &mut rng)?;
            sample_size_used = Some(endpoints[0].bucket_size(&spec));
            let mode = if args.algorithm == Algorithm::SampleSeq {
                SampleMode::Sequential
            } else {
                SampleMode::Parallel
            };
            sampled_intersection(&endpoints, &spec, mode, &mut ledger)?
        }
        Algorithm::Heuristic => {
            let outcome = heuristic_intersection(&endpoints, accuracy, &mut ledger)?;
            finish_heuristic(args, outcome, first)?
        }
        Algorithm::HeuristicSample => {
            let mut rng = seeded_rng(seed, PROTOCOL_STREAM);
            let outcome = heuristic_with_sampling(
                &endpoints,
                accuracy,
                args.sample_confidence,
                &mut rng,
                &mut ledger,
            )?;
            sample_size_used =
                Some(sample_size_hoeffding(accuracy / (args.providers as f64 - 1.0), args.sample_confidence)?.min(n));
            finish_heuristic(args, outcome, first)?
        }
        Algorithm::PrivateHeuristic => {
            let epsilon = args.epsilon.ok_or_else(|| {
                Error::Config("private-heuristic needs --epsilon (privacy budget)".into())
            })?;
            let params = PrivacyParams {
                epsilon,
                max_dummies: args.max_dummies,
            };
            let scheme = match args.crypto {
                CryptoBackend::Plain => HomomorphicKeypair::plain(),
                CryptoBackend::Modular => {
                    let mut key_rng = seeded_rng(seed, KEY_STREAM);
                    HomomorphicKeypair::generate_paillier(args.key_bits, &mut key_rng)?
                }
            };
            let bucket = match args.sample_ratio {
                Some(ratio) => {
                    if !(ratio > 0.0 && ratio <= 1.0) {
                        return Err(Error::Config(format!(
                            "sample ratio {ratio} outside (0, 1]"
                        )));
                    }
                    let m = ((ratio * n as f64).round() as u64).clamp(1, n);
                    let mut rng = seeded_rng(seed, SAMPLE_STREAM);
                    make_sample_spec(n, m, &mut rng)?
                }
                None => SampleSpec::new(seed, 1, 0)?,
            };
            sample_size_used = Some(endpoints[0].bucket_size(&bucket));
            let mut rng = seeded_rng(seed, PROTOCOL_STREAM);
            let outcome = private_heuristic_intersection(
                &endpoints,
                accuracy,
                &params,
                &scheme,
                &bucket,
                &mut rng,
                &mut ledger,
            )?;
            eprintln!(
                "# private-heuristic seed={seed}: cumulative epsilon spent {}",
                outcome.epsilon_spent
            );
            finish_heuristic(args, outcome, first)?
        }
    };

    let relative_error = (result.estimated_size - exact_size).abs() / exact_size;
    let m_column = sample_size_used.map(|m| m.to_string()).unwrap_or_default();
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        args.algorithm.name(),
        n,
        args.providers,
        args.ratio,
        m_column,
        seed,
        result.estimated_size,
        exact_size,
        relative_error,
        result.ledger.records_transferred,
        result.ledger.predicate_evaluations,
        result.ledger.messages,
        result.ledger.ciphertext_operations,
    ))
}

fn finish_heuristic(
    args: &RunArgs,
    outcome: HeuristicOutcome,
    first: bool,
) -> Result<IntersectionResult> {
    if outcome.budget_exhausted {
        eprintln!("# warning: error budget exhausted before the bounds converged");
    }
    if first {
        if let Some(path) = &args.emit_trace {
            let mut writer = BufWriter::new(File::create(path)?);
            outcome.trace.write_csv(&mut writer)?;
            writer.flush()?;
        }
    }
    Ok(outcome.result)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut config: ExperimentConfig = if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        parse_run_config(&text)?.experiment
    } else {
        let kind = match args.kind.as_deref() {
            Some("bound-comparison") => ExperimentKind::BoundComparison,
            Some("error-vs-sample-size") => ExperimentKind::ErrorVsSampleSize,
            Some("algorithm-comparison") => ExperimentKind::AlgorithmComparison,
            Some("heuristic-convergence") => ExperimentKind::HeuristicConvergence,
            Some("adult") => ExperimentKind::Adult,
            Some(other) => {
                return Err(Error::Config(format!("unknown experiment kind {other:?}")))
            }
            None => {
                return Err(Error::Config(
                    "experiment needs --kind or --config".into(),
                ))
            }
        };
        ExperimentConfig {
            kind,
            dataset_size: args.dataset_size,
            providers: args.providers,
            ratio: args.ratio,
            sample_ratios: args.sample_ratios.clone(),
            repeats: args.repeats,
            seed: args.seed,
            epsilon: args.epsilon,
            accuracy: args.accuracy,
            normalize: args.normalize,
            adult_path: args.adult_path.clone(),
            sex: args.sex.clone(),
            out: None,
        }
    };
    if args.out.is_some() {
        config.out = args.out.clone();
    }

    let rows = run_experiment(&config)?;
    if config.out.is_none() {
        let mut stdout = std::io::stdout().lock();
        write_csv(&rows, &mut stdout)?;
    } else {
        println!(
            "wrote {} row(s) to {}",
            rows.len(),
            config.out.as_ref().expect("just set").display()
        );
    }
    Ok(())
}
