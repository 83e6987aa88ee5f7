//! Seeded, parallel experiment runner. Each experiment reads a typed
//! parameter section, runs its replicas on a pool of `workers` threads with
//! replica `i` seeded by [`derive_seed`]`(seed, i)`, folds the results in
//! replica order, and writes versioned CSV and JSON files plus a manifest.
//! Data files depend on the config but not on the worker count.
//!
//! ```
//! use bbm_lab::harness::{run_experiment, ExperimentConfig, ExperimentId};
//!
//! let dir = tempfile::tempdir().unwrap();
//! let mut cfg = ExperimentConfig::new(ExperimentId::CouplingCheck);
//! cfg.replicas = 20;
//! cfg.out = dir.path().to_path_buf();
//! let manifest = run_experiment(&cfg).unwrap();
//! assert_eq!(manifest.outputs.len(), 2);
//! assert_eq!(manifest.replica_seeds.len(), 20);
//! ```

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use crate::seed::derive_seed;
pub use config::{ExperimentConfig, ExperimentId, OutputFormat};
pub use experiments::{
    check_params, dispatch, green_by_quadrature, plain_cumulant, taboo_step, zeta, AbsorbedTailParams, CouplingParams,
    Ctx, CutoffParams, ExperimentOutput, FrontSummary, GwSemigroupParams, LevyCompareParams, LevyCumulantsParams,
    MesoVsLevyParams, NbbmFrontParams, NbrwFrontParams, SelftestParams, StablePpParams, TailMode, ThetaParams,
    WLaplaceParams,
};
pub use output::{json_bytes, sha256_hex, write_atomic, Cell, CsvTable, SCHEMA_VERSION};

use crate::error::{Error, Result};

/// A file written by a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub code_version: String,
    pub experiment: ExperimentId,
    pub seed: u64,
    pub replicas: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Parameters after defaults were filled in.
    pub params: serde_json::Value,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub replica_seeds: Vec<u64>,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn file_name(experiment: ExperimentId) -> String {
        format!("{experiment}.manifest.json")
    }
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Exit status for a failed run: 2 config or domain, 3 runtime cap,
/// 4 statistical power, 5 I/O, 1 anything else.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::CapExceeded { .. } | Error::WindowOverflow(_) => 3,
        Error::StatisticalPower(_) => 4,
        Error::Io(_) => 5,
        Error::Solver(_) | Error::Construction(_) | Error::SelfTest(_) => 1,
    }
}

/// Runs the configured experiment and writes its files and manifest into
/// `cfg.out`. With zero replicas nothing runs and the output list is empty.
/// A self-test with failed checks still writes its files, then returns
/// [`Error::SelfTest`].
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let started_unix = unix_now();
    let id = cfg.experiment;
    let mut outputs = Vec::new();
    let mut failures = Vec::new();
    let mut params = serde_json::Value::Null;
    if cfg.replicas > 0 {
        let ctx = Ctx::new(cfg.seed, cfg.replicas, cfg.workers)?;
        let out = dispatch(id, &cfg.params, &ctx)?;
        params = out.params.clone();
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        if cfg.format.csv() {
            for t in &out.tables {
                let name = if t.name.is_empty() { format!("{id}.csv") } else { format!("{id}-{}.csv", t.name) };
                files.push((name, t.to_bytes(id.as_str())?));
            }
        }
        if cfg.format.json() {
            let doc = json!({
                "schema_version": SCHEMA_VERSION,
                "experiment": id,
                "seed": cfg.seed,
                "replicas": cfg.replicas,
                "params": out.params,
                "summary": out.summary,
            });
            files.push((format!("{id}.json"), json_bytes(&doc)?));
        }
        for (name, bytes) in files {
            write_atomic(&cfg.out.join(&name), &bytes)?;
            outputs.push(OutputFile { path: name, sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        }
        failures = out.failures;
    }
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        experiment: id,
        seed: cfg.seed,
        replicas: cfg.replicas,
        workers: cfg.workers,
        out: cfg.out.clone(),
        format: cfg.format,
        params,
        started_unix,
        finished_unix: unix_now(),
        replica_seeds: (0..cfg.replicas).map(|i| derive_seed(cfg.seed, i)).collect(),
        outputs,
    };
    write_atomic(&cfg.out.join(RunManifest::file_name(id)), &json_bytes(&manifest)?)?;
    if !failures.is_empty() {
        return Err(Error::SelfTest(failures.join("; ")));
    }
    Ok(manifest)
}
