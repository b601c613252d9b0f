//! Stage orchestration: every stage reads its inputs from the output
//! directory and writes its artifacts back there.

mod check;
mod stages;
mod sweep;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};
use crate::io::{read_json, write_json};
use crate::wavemap::GENERATOR_ID;

pub use check::{check_report, frame_defects, partition_defect, run_check, CheckItem, CheckReport, ENERGY_TOL, RESIDUAL_TOL};
pub use stages::{run_analyze, run_renorm, run_report, run_simulate, RenormArtifact, SimulateReport, TRAJECTORY_DIR};
pub use sweep::{run_sweep, sweep_report, SlopeRow, SweepReport, SweepRow, GAP_THRESHOLD, SLOPE_TARGETS};

pub const MANIFEST: &str = "manifest.json";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Simulate,
    Analyze,
    Renorm,
    Sweep,
    Check,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Simulate,
        Stage::Analyze,
        Stage::Renorm,
        Stage::Sweep,
        Stage::Check,
        Stage::Report,
    ];

    /// Stages of an end-to-end `run`.
    pub const PIPELINE: [Stage; 4] = [Stage::Simulate, Stage::Analyze, Stage::Renorm, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Analyze => "analyze",
            Stage::Renorm => "renorm",
            Stage::Sweep => "sweep",
            Stage::Check => "check",
            Stage::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|st| st.name() == s)
    }
}

/// Exit status for an error: 2 config, 3 numerical guard, 4 missing artifact.
pub fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::Config(_) => 2,
        LabError::BlowUp { .. } | LabError::Singular { .. } | LabError::ChartDomain { .. } => 3,
        LabError::MissingArtifact(_) => 4,
        _ => 1,
    }
}

pub const GUARD: &str = "guard.json";

/// Diagnostic written when a numerical guard aborts a stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardReport {
    pub stage: String,
    pub config_hash: String,
    pub seed: u64,
    pub error: String,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub outputs: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub finished: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub generator: String,
    pub config_hash: String,
    pub seed: u64,
    /// Fully resolved configuration, defaults included.
    pub config: ExperimentConfig,
    pub created: u64,
    pub updated: u64,
    pub stages: BTreeMap<String, StageRecord>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// A configured run bound to an output directory.
#[derive(Debug, Clone)]
pub struct Run {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub hash: String,
}

impl Run {
    pub fn new(config: ExperimentConfig, out: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let hash = config.hash();
        Ok(Self {
            config,
            out: out.into(),
            hash,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn require(&self, name: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(LabError::MissingArtifact(p.display().to_string()))
        }
    }

    /// Fails unless `hash` (read from a prior artifact) matches this config.
    pub fn same_config(&self, what: &str, hash: &str) -> Result<()> {
        if hash != self.hash {
            return Err(LabError::Config(format!(
                "{what} was produced by config {hash}, current config is {}; rerun the producing stage",
                self.hash
            )));
        }
        Ok(())
    }

    pub fn stage(&self, stage: Stage) -> Result<StageRecord> {
        std::fs::create_dir_all(&self.out)?;
        let result = match stage {
            Stage::Simulate => run_simulate(self),
            Stage::Analyze => run_analyze(self),
            Stage::Renorm => run_renorm(self),
            Stage::Sweep => run_sweep(self),
            Stage::Check => run_check(self),
            Stage::Report => run_report(self),
        };
        let record = match result {
            Ok(r) => r,
            Err(e) => {
                if exit_code(&e) == 3 {
                    let diag = GuardReport {
                        stage: stage.name().to_string(),
                        config_hash: self.hash.clone(),
                        seed: self.config.seed,
                        error: e.to_string(),
                        time: match &e {
                            LabError::BlowUp { time, .. } => Some(*time),
                            _ => None,
                        },
                    };
                    write_json(&self.path(GUARD), &diag)?;
                }
                return Err(e);
            }
        };
        self.record(stage, record.clone())?;
        Ok(record)
    }

    fn record(&self, stage: Stage, mut record: StageRecord) -> Result<()> {
        let path = self.path(MANIFEST);
        let t = now();
        let mut manifest = match read_json::<RunManifest>(&path) {
            Ok(m) if m.config_hash == self.hash && m.seed == self.config.seed => m,
            _ => RunManifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: TOOL_VERSION.to_string(),
                generator: GENERATOR_ID.to_string(),
                config_hash: self.hash.clone(),
                seed: self.config.seed,
                config: self.config.clone(),
                created: t,
                updated: t,
                stages: BTreeMap::new(),
            },
        };
        record.finished = t;
        manifest.updated = t;
        manifest.stages.insert(stage.name().to_string(), record);
        write_json(&path, &manifest)
    }
}

pub(crate) fn record(outputs: &[&str], metrics: &[(&str, f64)]) -> StageRecord {
    StageRecord {
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        metrics: metrics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        finished: 0,
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(text).unwrap()
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(exit_code(&LabError::Config("x".into())), 2);
        assert_eq!(exit_code(&LabError::BlowUp { time: 0.1, reason: "x".into() }), 3);
        assert_eq!(exit_code(&LabError::MissingArtifact("x".into())), 4);
        assert_eq!(exit_code(&LabError::InvalidInput("x".into())), 1);
    }

    #[test]
    fn report_requires_prior_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::new(cfg("[grid]\nsizes = [32, 32]"), dir.path()).unwrap();
        let e = run.stage(Stage::Report).unwrap_err();
        assert_eq!(exit_code(&e), 4);
        let e = run.stage(Stage::Analyze).unwrap_err();
        assert_eq!(exit_code(&e), 4);
    }

    #[test]
    fn stale_trajectory_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let a = Run::new(cfg("[grid]\nsizes = [32, 32]"), dir.path()).unwrap();
        a.stage(Stage::Simulate).unwrap();
        let b = Run::new(cfg("[grid]\nsizes = [32, 32]\n[data]\nepsilon = 0.03"), dir.path()).unwrap();
        assert_eq!(exit_code(&b.stage(Stage::Renorm).unwrap_err()), 2);
    }

    #[test]
    fn flat_check_passes_with_zero_nonlinearity() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::new(cfg("[target]\nkind = \"flat-torus\"\n[grid]\nsizes = [32, 32]"), dir.path()).unwrap();
        let report = check_report(&run).unwrap();
        assert!(report.passed, "{:?}", report.failed);
        let nl = report.items.iter().find(|i| i.name == "flat_nonlinear_terms").unwrap();
        assert_eq!(nl.value, 0.0);
    }

    #[test]
    fn pipeline_writes_manifest_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let run = Run::new(cfg("seed = 5\n[grid]\nsizes = [32, 32]"), dir.path()).unwrap();
        for st in Stage::PIPELINE {
            run.stage(st).unwrap();
        }
        let m: RunManifest = read_json(&run.path(MANIFEST)).unwrap();
        assert_eq!(m.config_hash, run.hash);
        assert_eq!(m.stages.len(), 4);
        let s: serde_json::Value = read_json(&run.path("summary.json")).unwrap();
        assert_eq!(s["seed"], 5);
        assert!(s.get("simulate").is_some() && s.get("sweep").is_none());
    }
}
