use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{record, write_text, Run, StageRecord};
use crate::error::Result;
use crate::io::{load_trajectory, read_json, save_trajectory, write_json};
use crate::norms::{norm_report, NormOptions, ParaSpec};
use crate::renorm::{renorm_effectiveness, RenormReport};
use crate::wavemap::{evolve, make_initial_data, EvolveOptions, Evolution, GENERATOR_ID};

pub const TRAJECTORY_DIR: &str = "trajectory";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config_hash: String,
    pub seed: u64,
    pub generator: String,
    pub epsilon: f64,
    pub s: f64,
    pub envelope: Vec<f64>,
    pub step: f64,
    pub steps: usize,
    pub sample_dt: f64,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// `max_t |E(t) − E(0)| / E(0)`, zero for zero data.
    pub energy_drift: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormArtifact {
    pub config_hash: String,
    #[serde(flatten)]
    pub report: RenormReport,
}

pub(crate) fn simulate_in_memory(
    run: &Run,
    epsilon: f64,
    bands: (i32, i32),
    dt_factor: f64,
) -> Result<(Evolution, SimulateReport)> {
    let cfg = &run.config;
    let grid = cfg.build_grid()?;
    let target = cfg.target();
    let mut spec = cfg.data_spec();
    spec.bands = bands;
    let data = make_initial_data(&target, &grid, &spec, epsilon, cfg.seed)?;
    let (steps, step) = cfg.steps(&grid, dt_factor);
    let mut opts = EvolveOptions::new(step, steps);
    opts.sample_every = cfg.evolve.sample_every;
    opts.guard_factor = cfg.evolve.guard_factor;
    let ev = evolve(&data.state, &opts)?;
    let e0 = ev.energies[0];
    let energy_drift = if e0 > 0.0 {
        ev.energies.iter().map(|e| ((e - e0) / e0).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    let report = SimulateReport {
        config_hash: run.hash.clone(),
        seed: cfg.seed,
        generator: GENERATOR_ID.to_string(),
        epsilon,
        s: cfg.s(),
        envelope: data.envelope,
        step,
        steps,
        sample_dt: ev.trajectory.dt,
        times: ev.trajectory.times.clone(),
        energies: ev.energies.clone(),
        energy_drift,
        max_abs: ev.trajectory.slices.iter().map(|s| s.max_abs()).fold(0.0, f64::max),
    };
    Ok((ev, report))
}

pub fn run_simulate(run: &Run) -> Result<StageRecord> {
    let cfg = &run.config;
    let (ev, report) = simulate_in_memory(run, cfg.data.epsilon, cfg.data.bands, cfg.evolve.dt_factor)?;
    save_trajectory(&run.path(TRAJECTORY_DIR), &ev.trajectory, &run.hash)?;
    write_json(&run.path("simulate.json"), &report)?;
    Ok(record(
        &[TRAJECTORY_DIR, "simulate.json"],
        &[
            ("energy_drift", report.energy_drift),
            ("slices", ev.trajectory.len() as f64),
            ("step", report.step),
        ],
    ))
}

fn load(run: &Run) -> Result<crate::wavemap::Trajectory> {
    let dir = run.require(TRAJECTORY_DIR)?;
    let (traj, index) = load_trajectory(&dir)?;
    run.same_config("trajectory", &index.config_hash)?;
    Ok(traj)
}

pub fn run_analyze(run: &Run) -> Result<StageRecord> {
    let traj = load(run)?;
    let cfg = &run.config;
    let k = cfg.norms.para_band.unwrap_or(traj.grid.k_max() - 1);
    let opts = NormOptions {
        pairs: cfg.pairs(),
        sigma: cfg.data.sigma,
        stencil: cfg.evolve.stencil,
        para: Some(ParaSpec::around(k)),
        config_hash: run.hash.clone(),
    };
    let report = norm_report(&traj, &opts)?;
    write_text(&run.path("norms.json"), &(report.to_json()? + "\n"))?;
    write_text(&run.path("norms.csv"), &report.to_csv())?;
    let sk_max = report.sk.iter().map(|r| r.sk).fold(0.0, f64::max);
    let recon = report.para.as_ref().map_or(0.0, |p| p.reconstruction);
    Ok(record(
        &["norms.json", "norms.csv"],
        &[("sk_max", sk_max), ("para_reconstruction", recon)],
    ))
}

pub fn run_renorm(run: &Run) -> Result<StageRecord> {
    let traj = load(run)?;
    let report = renorm_effectiveness(&traj, &run.config.renorm_options(&traj.grid))?;
    report.write_band_csv(&run.path("renorm_bands.csv"))?;
    let artifact = RenormArtifact {
        config_hash: run.hash.clone(),
        report,
    };
    write_json(&run.path("renorm.json"), &artifact)?;
    let r = &artifact.report;
    Ok(record(
        &["renorm.json", "renorm_bands.csv"],
        &[
            ("ident", r.algebra.ident),
            ("divergence_gauge", r.algebra.divergence_gauge),
            ("dangerous", r.effectiveness.dangerous),
            ("box_w", r.effectiveness.box_w),
        ],
    ))
}

/// An artifact from this config, or `None` when absent or stale.
fn optional(run: &Run, name: &str) -> Result<Option<Value>> {
    let p = run.path(name);
    if !p.exists() {
        return Ok(None);
    }
    let v: Value = read_json(&p)?;
    let fresh = v.get("config_hash").and_then(Value::as_str) == Some(run.hash.as_str());
    Ok(fresh.then_some(v))
}

fn pick(v: &Value, keys: &[&str]) -> Value {
    Value::Object(keys.iter().filter_map(|k| v.get(*k).map(|x| (k.to_string(), x.clone()))).collect())
}

/// Collates the stage outputs into `summary.json`, which carries no
/// timestamps or paths so equal runs give equal bytes.
pub fn run_report(run: &Run) -> Result<StageRecord> {
    let norms: Value = read_json(&run.require("norms.json")?)?;
    let renorm: Value = read_json(&run.require("renorm.json")?)?;
    for (what, v) in [("norms.json", &norms), ("renorm.json", &renorm)] {
        let hash = v
            .pointer("/meta/config_hash")
            .or_else(|| v.get("config_hash"))
            .and_then(Value::as_str)
            .unwrap_or_default();
        run.same_config(what, hash)?;
    }
    let mut summary = json!({
        "config_hash": run.hash,
        "seed": run.config.seed,
        "generator": GENERATOR_ID,
        "norms": pick(&norms, &["data_bands", "envelope", "sk", "residuals", "para"]),
        "renorm": pick(&renorm, &["options", "algebra", "norms", "effectiveness"]),
    });
    let map = summary.as_object_mut().expect("object literal");
    if let Some(v) = optional(run, "simulate.json")? {
        map.insert("simulate".into(), pick(&v, &["epsilon", "step", "steps", "energy_drift", "max_abs"]));
    }
    if let Some(v) = optional(run, "sweep.json")? {
        map.insert("sweep".into(), pick(&v, &["epsilons", "slopes", "effectiveness_gap"]));
    }
    if let Some(v) = optional(run, "check.json")? {
        map.insert("check".into(), pick(&v, &["passed", "failed"]));
    }
    write_json(&run.path("summary.json"), &summary)?;
    Ok(record(&["summary.json"], &[]))
}
