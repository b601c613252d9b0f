use serde::{Deserialize, Serialize};

use super::stages::simulate_in_memory;
use super::{record, write_text, Run, StageRecord};
use crate::error::Result;
use crate::fit::loglog_fit;
use crate::io::write_json;
use crate::renorm::renorm_effectiveness;

/// `(metric, target slope, tolerance)` for the fitted amplitude exponents.
pub const SLOPE_TARGETS: [(&str, f64, f64); 4] = [
    ("r_tilde", 1.0, 0.2),
    ("r_bar", 2.0, 0.3),
    ("orthogonality", 2.0, 0.3),
    ("gauge", 2.0, 0.3),
];

/// Required excess of the `‖□W‖` exponent over the `‖R̃·∂Ψ‖` exponent.
pub const GAP_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub r_tilde: f64,
    pub r_bar: f64,
    pub orthogonality: f64,
    pub gauge: f64,
    pub dangerous: f64,
    pub box_psi: f64,
    pub box_w: f64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub remainder: f64,
    pub energy_drift: f64,
}

impl SweepRow {
    pub const COLUMNS: [&'static str; 13] = [
        "epsilon", "r_tilde", "r_bar", "orthogonality", "gauge", "dangerous", "box_psi", "box_w",
        "t1", "t2", "t3", "remainder", "energy_drift",
    ];

    fn values(&self) -> [f64; 13] {
        [
            self.epsilon,
            self.r_tilde,
            self.r_bar,
            self.orthogonality,
            self.gauge,
            self.dangerous,
            self.box_psi,
            self.box_w,
            self.t1,
            self.t2,
            self.t3,
            self.remainder,
            self.energy_drift,
        ]
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        let i = Self::COLUMNS.iter().position(|c| *c == column)?;
        Some(self.values()[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub metric: String,
    /// `None` when some value is zero or non-finite.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
}

impl SlopeRow {
    pub fn passed(&self) -> Option<bool> {
        match (self.slope, self.target, self.tolerance) {
            (Some(s), Some(t), Some(tol)) => Some((s - t).abs() <= tol),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config_hash: String,
    pub epsilons: Vec<f64>,
    pub bands: (i32, i32),
    pub step: f64,
    pub rows: Vec<SweepRow>,
    pub slopes: Vec<SlopeRow>,
    /// `slope(box_w) − slope(dangerous)`.
    pub effectiveness_gap: Option<f64>,
    pub gap_threshold: f64,
}

impl SweepReport {
    pub fn slope(&self, metric: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.metric == metric).and_then(|s| s.slope)
    }

    pub fn rows_csv(&self) -> String {
        let mut s = SweepRow::COLUMNS.join(",") + "\n";
        for r in &self.rows {
            let line: Vec<String> = r.values().iter().map(|v| format!("{v:e}")).collect();
            s += &(line.join(",") + "\n");
        }
        s
    }

    pub fn slopes_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        let mut s = String::from("metric,slope,intercept,target,tolerance\n");
        for r in &self.slopes {
            s += &format!(
                "{},{},{},{},{}\n",
                r.metric,
                opt(r.slope),
                opt(r.intercept),
                opt(r.target),
                opt(r.tolerance)
            );
        }
        s
    }
}

pub fn sweep_report(run: &Run) -> Result<SweepReport> {
    let cfg = &run.config;
    let bands = cfg.sweep_bands(&cfg.build_grid()?);
    let factor = cfg.sweep_dt_factor();
    let mut rows = Vec::with_capacity(cfg.sweep.epsilons.len());
    let mut step = 0.0;
    for &eps in &cfg.sweep.epsilons {
        let (ev, sim) = simulate_in_memory(run, eps, bands, factor)?;
        step = sim.step;
        let r = renorm_effectiveness(&ev.trajectory, &cfg.renorm_options(&ev.trajectory.grid))?;
        let e = r.effectiveness;
        rows.push(SweepRow {
            epsilon: eps,
            r_tilde: r.norms.r_tilde,
            r_bar: r.norms.r_bar,
            orthogonality: r.norms.orthogonality,
            gauge: r.norms.gauge,
            dangerous: e.dangerous,
            box_psi: e.box_psi,
            box_w: e.box_w,
            t1: e.t1,
            t2: e.t2,
            t3: e.t3,
            remainder: e.remainder,
            energy_drift: sim.energy_drift,
        });
    }
    let eps = &cfg.sweep.epsilons;
    let slopes: Vec<SlopeRow> = SweepRow::COLUMNS[1..]
        .iter()
        .map(|&metric| {
            let ys: Vec<f64> = rows.iter().map(|r| r.get(metric).expect("known column")).collect();
            let fit = loglog_fit(eps, &ys).ok();
            let target = SLOPE_TARGETS.iter().find(|t| t.0 == metric);
            SlopeRow {
                metric: metric.to_string(),
                slope: fit.map(|f| f.slope),
                intercept: fit.map(|f| f.intercept),
                target: target.map(|t| t.1),
                tolerance: target.map(|t| t.2),
            }
        })
        .collect();
    let mut report = SweepReport {
        config_hash: run.hash.clone(),
        epsilons: eps.clone(),
        bands,
        step,
        rows,
        slopes,
        effectiveness_gap: None,
        gap_threshold: GAP_THRESHOLD,
    };
    report.effectiveness_gap = match (report.slope("box_w"), report.slope("dangerous")) {
        (Some(a), Some(b)) => Some(a - b),
        _ => None,
    };
    Ok(report)
}

pub fn run_sweep(run: &Run) -> Result<StageRecord> {
    let report = sweep_report(run)?;
    write_text(&run.path("sweep.csv"), &report.rows_csv())?;
    write_text(&run.path("sweep_slopes.csv"), &report.slopes_csv())?;
    write_json(&run.path("sweep.json"), &report)?;
    let mut metrics: Vec<(&str, f64)> = SLOPE_TARGETS
        .iter()
        .filter_map(|t| report.slope(t.0).map(|s| (t.0, s)))
        .collect();
    if let Some(g) = report.effectiveness_gap {
        metrics.push(("effectiveness_gap", g));
    }
    Ok(record(&["sweep.csv", "sweep_slopes.csv", "sweep.json"], &metrics))
}
