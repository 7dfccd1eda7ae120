//! Run-configuration files: a TOML document mirroring
//! [`ExperimentConfig`](crate::harness::ExperimentConfig), with an
//! optional `[sample]` table carrying a fixed sampling contract as the
//! three-field record `(hash_seed, b, bucket_index)`.
//!
//! ```toml
//! kind = "error-vs-sample-size"
//! dataset-size = 100000
//! providers = 10
//! ratio = 0.7
//! sample-ratios = [0.01, 0.1, 0.2]
//! repeats = 10
//! seed = 42
//! out = "errors.csv"
//!
//! [sample]          # optional: pin one bucket instead of drawing
//! hash_seed = 7
//! b = 10
//! bucket_index = 3
//! ```

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::sampling::SampleSpec;

/// A parsed run-configuration file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// Fixed sampling contract; when present, single runs reuse this
    /// bucket instead of drawing a fresh one.
    #[serde(default)]
    pub sample: Option<SampleSpec>,
}

/// Parses and validates a run-configuration document.
pub fn parse_run_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(text)
        .map_err(|err| Error::Config(format!("run config: {err}")))?;
    if let Some(sample) = &config.sample {
        sample.validate()?;
    }
    Ok(config)
}
