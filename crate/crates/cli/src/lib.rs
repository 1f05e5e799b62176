//! Experiment runner: configuration, execution and reporting.
//!
//! A run takes an [`ExperimentConfig`], validates it completely, executes
//! the experiment and returns a [`RunManifest`]. [`run`] also writes
//! `manifest.json` and `summary.csv` to an output directory.
//!
//! Every random draw descends from the config seed through
//! [`experiments::sub_seed`] and per-replicate streams, so results do not
//! depend on the number of threads.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ergopoint::stats::TestReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub mod experiments;

use experiments::{
    BackAndForth, Counterexample, Equivariance, LevySquare, Mollify, OrdersUniform, Outcome, PppVerify, Whirly,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ERGOPOINT_OUT_DIR";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{experiment} failed: {source}")]
    Experiment {
        experiment: ExperimentKind,
        #[source]
        source: ergopoint::Error,
    },
    #[error("manifest has no {0} series")]
    MissingSeries(SeriesKind),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RunError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    PppVerify,
    Equivariance,
    LevySquare,
    Mollify,
    OrdersUniform,
    BackAndForth,
    Whirly,
    Counterexample,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

fn default_replicates() -> usize {
    10_000
}

fn default_alpha() -> f64 {
    ergopoint::stats::DEFAULT_ALPHA
}

fn empty_parameters() -> Value {
    Value::Object(Default::default())
}

/// What to run. `parameters` is the experiment-specific block; missing
/// keys take their defaults and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default = "empty_parameters")]
    pub parameters: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// Parsed parameter block of one experiment.
#[derive(Clone, Debug, PartialEq)]
pub enum Parameters {
    PppVerify(PppVerify),
    Equivariance(Equivariance),
    LevySquare(LevySquare),
    Mollify(Mollify),
    OrdersUniform(OrdersUniform),
    BackAndForth(BackAndForth),
    Whirly(Whirly),
    Counterexample(Counterexample),
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            experiment,
            parameters: empty_parameters(),
            seed: 0,
            replicates: default_replicates(),
            alpha: default_alpha(),
        }
    }

    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| RunError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.into(), source })?;
        ExperimentConfig::from_json(&text)
    }

    pub fn with_parameters(mut self, parameters: Value) -> ExperimentConfig {
        self.parameters = parameters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> ExperimentConfig {
        self.seed = seed;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> ExperimentConfig {
        self.replicates = replicates;
        self
    }

    /// Checks the whole config, including every measure, window and map in
    /// the parameter block, and returns the parsed parameters.
    pub fn validate(&self) -> Result<Parameters> {
        if self.replicates == 0 {
            return Err(RunError::Config("replicates must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RunError::Config(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        fn parse<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
            serde_json::from_value(v.clone()).map_err(|e| RunError::Config(format!("parameters: {e}")))
        }
        let v = &self.parameters;
        let p = match self.experiment {
            ExperimentKind::PppVerify => Parameters::PppVerify(parse(v)?),
            ExperimentKind::Equivariance => Parameters::Equivariance(parse(v)?),
            ExperimentKind::LevySquare => Parameters::LevySquare(parse(v)?),
            ExperimentKind::Mollify => Parameters::Mollify(parse(v)?),
            ExperimentKind::OrdersUniform => Parameters::OrdersUniform(parse(v)?),
            ExperimentKind::BackAndForth => Parameters::BackAndForth(parse(v)?),
            ExperimentKind::Whirly => Parameters::Whirly(parse(v)?),
            ExperimentKind::Counterexample => Parameters::Counterexample(parse(v)?),
        };
        match &p {
            Parameters::PppVerify(x) => x.validate(),
            Parameters::Equivariance(x) => x.validate(),
            Parameters::LevySquare(x) => x.validate(),
            Parameters::Mollify(x) => x.validate(),
            Parameters::OrdersUniform(x) => x.validate(),
            Parameters::BackAndForth(x) => x.validate(),
            Parameters::Whirly(x) => x.validate(),
            Parameters::Counterexample(x) => x.validate(),
        }?;
        Ok(p)
    }
}

impl Parameters {
    fn to_value(&self) -> Result<Value> {
        Ok(match self {
            Parameters::PppVerify(x) => serde_json::to_value(x),
            Parameters::Equivariance(x) => serde_json::to_value(x),
            Parameters::LevySquare(x) => serde_json::to_value(x),
            Parameters::Mollify(x) => serde_json::to_value(x),
            Parameters::OrdersUniform(x) => serde_json::to_value(x),
            Parameters::BackAndForth(x) => serde_json::to_value(x),
            Parameters::Whirly(x) => serde_json::to_value(x),
            Parameters::Counterexample(x) => serde_json::to_value(x),
        }?)
    }

    fn run(&self, cfg: &ExperimentConfig) -> ergopoint::Result<Outcome> {
        match self {
            Parameters::PppVerify(x) => x.run(cfg),
            Parameters::Equivariance(x) => x.run(cfg),
            Parameters::LevySquare(x) => x.run(cfg),
            Parameters::Mollify(x) => x.run(cfg),
            Parameters::OrdersUniform(x) => x.run(cfg),
            Parameters::BackAndForth(x) => x.run(cfg),
            Parameters::Whirly(x) => x.run(cfg),
            Parameters::Counterexample(x) => x.run(cfg),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesKind {
    /// Columns `k, observed, expected`.
    CountHistogram,
    /// Columns `n_terms, partial_sum`.
    DivergenceTrace,
    /// Columns `x, f, delta_conv_f`.
    MollificationProfile,
}

impl fmt::Display for SeriesKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(v.as_str().unwrap_or_default())
    }
}

/// A table of numbers with named columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[&str], rows: Vec<Vec<f64>>) -> Series {
        Series { columns: columns.iter().map(|c| c.to_string()).collect(), rows }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// The config as run, with every parameter default filled in.
    pub config: ExperimentConfig,
    pub reports: Vec<TestReport>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub series: BTreeMap<SeriesKind, Series>,
    pub wall_clock_seconds: f64,
    pub overall_pass: bool,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<RunManifest> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.into(), source })?;
        RunManifest::from_json(&text)
    }

    /// The reports alone, as JSON; identical across re-runs of a config.
    pub fn reports_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.reports)?)
    }

    /// One row per report: `testName,statistic,pValue,pass,N,seed`.
    pub fn summary_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["testName", "statistic", "pValue", "pass", "N", "seed"])?;
        for r in &self.reports {
            w.write_record([
                r.test_name.clone(),
                r.statistic.to_string(),
                r.p_value.to_string(),
                r.pass.to_string(),
                r.sample_size.to_string(),
                r.seed.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| RunError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Validates and executes `config` without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunManifest> {
    let params = config.validate()?;
    let mut echo = config.clone();
    echo.parameters = params.to_value()?;
    let start = Instant::now();
    let outcome = params
        .run(config)
        .map_err(|source| RunError::Experiment { experiment: config.experiment, source })?;
    let overall_pass = outcome.reports.iter().all(|r| r.pass);
    Ok(RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: echo,
        reports: outcome.reports,
        series: outcome.series,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        overall_pass,
    })
}

fn write(path: PathBuf, contents: &str) -> Result<()> {
    fs::write(&path, contents).map_err(|source| RunError::Io { path, source })
}

/// Writes `manifest.json` and `summary.csv` into `dir`.
pub fn write_outputs(manifest: &RunManifest, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io { path: dir.into(), source })?;
    write(dir.join(MANIFEST_FILE), &manifest.to_json()?)?;
    write(dir.join(SUMMARY_FILE), &manifest.summary_csv()?)
}

/// [`execute`] followed by [`write_outputs`]. Nothing is sampled if the
/// config is invalid.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    let manifest = execute(config)?;
    write_outputs(&manifest, out_dir)?;
    Ok(manifest)
}

/// The requested series as CSV, headed by its column names.
pub fn plot_csv(manifest: &RunManifest, kind: SeriesKind) -> Result<String> {
    let series = manifest.series.get(&kind).ok_or(RunError::MissingSeries(kind))?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&series.columns)?;
    for row in &series.rows {
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    csv_string(w)
}

/// Writes the requested series to `path`.
pub fn emit_plot_data(manifest: &RunManifest, kind: SeriesKind, path: &Path) -> Result<()> {
    write(path.to_path_buf(), &plot_csv(manifest, kind)?)
}
