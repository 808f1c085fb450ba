//! Experiment orchestration: config resolution, seeding, CSV and manifest output.
//!
//! Seeds: the experiment seed is `derive_seed(root, kind index)` and grid
//! point `i` of an experiment uses `derive_seed(experiment seed, i)`. Every
//! CSV row records the seed it was computed from.

pub mod cli;
pub mod config;
mod experiments;
mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};
pub use table::{format_float, Table};

use crate::rng::derive_seed;

const DEFAULT_OUT: &str = "results";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Runtime(_) => 3,
        }
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Runtime(e.to_string())
}

/// Values given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub trees: Option<usize>,
    pub beta_seed: Option<u64>,
    pub depth: Option<u32>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.out, &self.out);
        set(&mut cfg.threads, &self.threads);
        set(&mut cfg.trees, &self.trees);
        set(&mut cfg.beta_seed, &self.beta_seed);
        set(&mut cfg.depth, &self.depth);
        if self.beta_seed.is_some() {
            cfg.beta = None;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedRecord {
    pub label: String,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    experiment: &'static str,
    status: &'static str,
    version: &'static str,
    root_seed: u64,
    experiment_seed: u64,
    threads: Option<usize>,
    config: &'a ExperimentConfig,
    resolved: serde_json::Value,
    derived_seeds: Vec<SeedRecord>,
    notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn write_manifest(path: &Path, m: &Manifest<'_>) -> Result<(), HarnessError> {
    let text = serde_json::to_string_pretty(m).map_err(runtime)?;
    std::fs::write(path, text + "\n")
        .map_err(|e| HarnessError::Runtime(format!("cannot write {}: {e}", path.display())))
}

/// Where a finished run put its artifacts.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub rows: usize,
    pub summary: Option<serde_json::Value>,
}

/// Runs one experiment and writes `<experiment>.csv` and `manifest.json`.
pub fn run(
    kind: ExperimentKind,
    mut config: ExperimentConfig,
    overrides: &Overrides,
) -> Result<RunReport, HarnessError> {
    if let Some(k) = config.experiment {
        if k != kind {
            return Err(HarnessError::Config(format!(
                "config is for `{}` but the command is `{}`",
                k.name(),
                kind.name()
            )));
        }
    }
    overrides.apply(&mut config);
    config.experiment = Some(kind);
    let root = config
        .seed
        .ok_or_else(|| HarnessError::Config("a seed is required: pass --seed or set \"seed\"".into()))?;
    if config.threads == Some(0) {
        return Err(HarnessError::Config("threads must be at least 1".into()));
    }
    let plan = experiments::resolve(kind, &config)?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = config.threads {
            b = b.num_threads(t);
        }
        b.build().map_err(runtime)?
    };

    let out = config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    std::fs::create_dir_all(&out)
        .map_err(|e| HarnessError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    let csv = out.join(format!("{}.csv", kind.name()));
    let manifest_path = out.join("manifest.json");
    let experiment_seed = derive_seed(root, kind.seed_index());

    let mut manifest = Manifest {
        experiment: kind.name(),
        status: "running",
        version: env!("CARGO_PKG_VERSION"),
        root_seed: root,
        experiment_seed,
        threads: config.threads,
        config: &config,
        resolved: plan.describe(),
        derived_seeds: plan.seeds(experiment_seed),
        notes: plan.notes(),
        summary: None,
        outputs: None,
        rows: None,
        wall_time_seconds: None,
        error: None,
    };
    write_manifest(&manifest_path, &manifest)?;

    let start = Instant::now();
    let result = pool.install(|| plan.execute(experiment_seed));
    manifest.wall_time_seconds = Some(start.elapsed().as_secs_f64());
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            manifest.status = "failed";
            manifest.error = Some(e.to_string());
            write_manifest(&manifest_path, &manifest)?;
            return Err(runtime(e));
        }
    };
    outcome.table.write_csv(&csv)?;
    manifest.status = "complete";
    manifest.summary = outcome.summary.clone();
    manifest.outputs = Some(vec![csv.file_name().unwrap().to_string_lossy().into_owned()]);
    manifest.rows = Some(outcome.table.rows.len());
    write_manifest(&manifest_path, &manifest)?;
    Ok(RunReport {
        csv,
        manifest: manifest_path,
        rows: outcome.table.rows.len(),
        summary: outcome.summary,
    })
}
