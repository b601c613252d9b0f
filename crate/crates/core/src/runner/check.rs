use serde::{Deserialize, Serialize};

use super::stages::simulate_in_memory;
use super::{record, Run, StageRecord};
use crate::error::Result;
use crate::geometry::FrameData;
use crate::grid::Grid;
use crate::io::write_json;
use crate::norms::{norm_report, NormOptions, ParaSpec};
use crate::renorm::renorm_effectiveness;
use crate::wavemap::{cubic_term_e, divcurl_residual, make_initial_data, wave_identity_residual};

/// Time-discretization residuals relative to `max|Φ|`, at any admissible step.
pub const RESIDUAL_TOL: f64 = 1e-4;
pub const ENERGY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub config_hash: String,
    pub passed: bool,
    pub failed: Vec<String>,
    pub items: Vec<CheckItem>,
}

#[derive(Default)]
struct Items(Vec<CheckItem>);

impl Items {
    fn push(&mut self, name: &str, value: f64, tolerance: f64) {
        self.0.push(CheckItem {
            name: name.to_string(),
            value,
            tolerance,
            passed: value.is_finite() && value <= tolerance,
        });
    }
}

/// `(max |C^a_bc + C^a_cb| ∨ |Γ^a_bc + Γ^c_ba|, max |Γ^a_bc − Γ^a_cb − C^a_bc|)`.
pub fn frame_defects(frame: &FrameData) -> (f64, f64) {
    let n = frame.dim();
    let (mut anti, mut round) = (0.0f64, 0.0f64);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                anti = anti
                    .max((frame.c(a, b, c) + frame.c(a, c, b)).abs())
                    .max((frame.gamma(a, b, c) + frame.gamma(c, b, a)).abs());
                let back = frame.gamma(a, b, c) - frame.gamma(a, c, b);
                round = round.max((back - frame.c(a, b, c)).abs());
            }
        }
    }
    (anti, round)
}

/// `max |Σ_k P_k − 1|` over every mode, bands `k_min − 1 ..= k_max + 1`.
pub fn partition_defect(grid: &Grid) -> Result<f64> {
    let mut sum = vec![0.0; grid.len()];
    for k in grid.k_min() - 1..=grid.k_max() + 1 {
        for (s, m) in sum.iter_mut().zip(grid.multiplier(grid.extended_band(k))?) {
            *s += m;
        }
    }
    Ok(sum.iter().fold(0.0f64, |m, s| m.max((s - 1.0).abs())))
}

pub fn check_report(run: &Run) -> Result<CheckReport> {
    let cfg = &run.config;
    let grid = cfg.build_grid()?;
    let target = cfg.target();
    let mut items = Items::default();

    let (anti, round) = frame_defects(target.frame());
    items.push("frame_antisymmetry", anti, 0.0);
    items.push("connection_round_trip", round, 1e-14);
    items.push("partition_of_unity", partition_defect(&grid)?, 1e-12);

    let spec = cfg.data_spec();
    let a = make_initial_data(&target, &grid, &spec, cfg.data.epsilon, cfg.seed)?;
    let b = make_initial_data(&target, &grid, &spec, cfg.data.epsilon, cfg.seed)?;
    let same = a.state.phi == b.state.phi && a.state.phi_t == b.state.phi_t;
    items.push("seeded_data_repeat", if same { 0.0 } else { 1.0 }, 0.0);

    let (ev, sim) = simulate_in_memory(run, cfg.data.epsilon, cfg.data.bands, cfg.evolve.dt_factor)?;
    let traj = &ev.trajectory;
    items.push("energy_drift", sim.energy_drift, ENERGY_TOL);
    let scale = if sim.max_abs > 0.0 { sim.max_abs } else { 1.0 };
    let stencil = cfg.evolve.stencil;
    let dc = divcurl_residual(traj, stencil)?;
    let wave = wave_identity_residual(traj, stencil)?;
    items.push("curl_residual", dc.curl.max / scale, RESIDUAL_TOL);
    items.push("divergence_residual", dc.divergence.max / scale, RESIDUAL_TOL);
    items.push("wave_residual", wave.residual.max / scale, RESIDUAL_TOL);

    let k = cfg.norms.para_band.unwrap_or(grid.k_max() - 1);
    let norms = norm_report(
        traj,
        &NormOptions {
            pairs: cfg.pairs(),
            sigma: cfg.data.sigma,
            stencil,
            para: Some(ParaSpec::around(k)),
            config_hash: run.hash.clone(),
        },
    )?;
    items.push("norm_report_invalid", if norms.is_valid() { 0.0 } else { 1.0 }, 0.0);
    if let Some(p) = &norms.para {
        items.push("para_reconstruction", p.reconstruction, 1e-11);
    }

    let r = renorm_effectiveness(traj, &cfg.renorm_options(&grid))?;
    let al = &r.algebra;
    items.push("r_antisymmetry", al.r_antisymmetry, 1e-13);
    items.push("delta_antisymmetry", al.delta_antisymmetry, 1e-13);
    items.push("chain_identity", al.ident, 1e-12);
    items.push("chain_inverse", al.inverse, 1e-12);
    items.push("divergence_gauge", al.divergence_gauge, 1e-11);

    if target.frame().is_flat() {
        let mut cubic = 0.0f64;
        for slice in &traj.slices {
            cubic = cubic.max(cubic_term_e(slice, target.frame())?.max_abs());
        }
        let e = &r.effectiveness;
        let nonlinear = [cubic, r.norms.r_tilde, r.norms.r_bar, e.dangerous, e.t1, e.t2, e.t3]
            .into_iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        items.push("flat_nonlinear_terms", nonlinear, 0.0);
    }

    let failed: Vec<String> = items.0.iter().filter(|i| !i.passed).map(|i| i.name.clone()).collect();
    Ok(CheckReport {
        config_hash: run.hash.clone(),
        passed: failed.is_empty(),
        failed,
        items: items.0,
    })
}

pub fn run_check(run: &Run) -> Result<StageRecord> {
    let report = check_report(run)?;
    write_json(&run.path("check.json"), &report)?;
    Ok(record(
        &["check.json"],
        &[
            ("passed", if report.passed { 1.0 } else { 0.0 }),
            ("failed", report.failed.len() as f64),
        ],
    ))
}
