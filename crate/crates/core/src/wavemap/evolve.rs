use serde::{Deserialize, Serialize};

use super::{MapState, Trajectory};
use crate::error::{LabError, Result};
use crate::geometry::idx3;
use crate::grid::{spectral_derivative_in_place, Grid};

/// Growth factor (energy or velocity magnitude) at which a run is aborted.
pub const GUARD_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    pub dt: f64,
    pub steps: usize,
    /// Record a sample every this many steps.
    pub sample_every: usize,
    pub guard_factor: f64,
}

impl EvolveOptions {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self {
            dt,
            steps,
            sample_every: 1,
            guard_factor: GUARD_FACTOR,
        }
    }
}

/// Output of [`evolve`].
#[derive(Debug, Clone)]
pub struct Evolution {
    pub trajectory: Trajectory,
    pub final_state: MapState,
    /// Geometric energy at every sample.
    pub energies: Vec<f64>,
}

/// `(∂_iφ^I, Δφ^I)` for every chart component, spectrally.
fn spatial_derivatives(grid: &Grid, phi: &[Vec<f64>]) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let n = grid.dim();
    let kappa = grid.kappa();
    let mut grads = Vec::with_capacity(phi.len());
    let mut laps = Vec::with_capacity(phi.len());
    for comp in phi {
        let spec = grid.fft_forward(comp)?;
        let mut g = Vec::with_capacity(n);
        for axis in 0..n {
            let mut s = spec.clone();
            spectral_derivative_in_place(grid, &mut s, axis);
            g.push(grid.fft_inverse(s)?);
        }
        let mut lap = spec;
        for (c, r) in lap.iter_mut().zip(grid.radius()) {
            let xi = r * kappa;
            *c *= -xi * xi;
        }
        laps.push(grid.fft_inverse(lap)?);
        grads.push(g);
    }
    Ok((grads, laps))
}

/// `∫ h_IJ(∂_tφ^I∂_tφ^J + Σ_i ∂_iφ^I∂_iφ^J) dx`.
pub fn energy(state: &MapState) -> Result<f64> {
    let grid = &state.grid;
    let nf = state.target.dim();
    let (grads, _) = spatial_derivatives(grid, &state.phi)?;
    let mut h = vec![0.0; nf * nf];
    let mut x = vec![0.0; nf];
    let mut total = 0.0;
    for p in 0..grid.len() {
        state.point(p, &mut x);
        state.target.metric(&x, &mut h);
        for i in 0..nf {
            for j in 0..nf {
                let mut d = state.phi_t[i][p] * state.phi_t[j][p];
                for axis in 0..grid.dim() {
                    d += grads[i][axis][p] * grads[j][axis][p];
                }
                total += h[i * nf + j] * d;
            }
        }
    }
    Ok(total * grid.cell_volume())
}

/// Right-hand side of the first-order system: returns `∂_t²φ`.
fn acceleration(state: &MapState, phi: &[Vec<f64>], phi_t: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let grid = &state.grid;
    let nf = state.target.dim();
    let (grads, mut acc) = spatial_derivatives(grid, phi)?;
    if state.target.frame().is_flat() {
        return Ok(acc);
    }
    let mut g = vec![0.0; nf * nf * nf];
    let mut x = vec![0.0; nf];
    let mut quad = vec![0.0; nf * nf];
    for p in 0..grid.len() {
        for i in 0..nf {
            x[i] = phi[i][p];
        }
        if !state.target.in_domain(&x) {
            return Err(LabError::ChartDomain {
                point: x,
                domain: state.target.chart().domain.clone(),
            });
        }
        state.target.christoffel(&x, &mut g);
        for j in 0..nf {
            for k in 0..nf {
                let mut q = -phi_t[j][p] * phi_t[k][p];
                for axis in 0..grid.dim() {
                    q += grads[j][axis][p] * grads[k][axis][p];
                }
                quad[j * nf + k] = q;
            }
        }
        for i in 0..nf {
            let mut s = 0.0;
            for j in 0..nf {
                for k in 0..nf {
                    s += g[idx3(nf, i, j, k)] * quad[j * nf + k];
                }
            }
            acc[i][p] += s;
        }
    }
    Ok(acc)
}

fn axpy(base: &[Vec<f64>], h: f64, dir: &[Vec<f64>]) -> Vec<Vec<f64>> {
    base.iter()
        .zip(dir)
        .map(|(b, d)| b.iter().zip(d).map(|(x, y)| x + h * y).collect())
        .collect()
}

fn max_abs(v: &[Vec<f64>]) -> f64 {
    v.iter().flatten().fold(0.0, |m: f64, x| m.max(x.abs()))
}

fn rk4_step(state: &mut MapState, dt: f64) -> Result<()> {
    let (p0, v0) = (state.phi.clone(), state.phi_t.clone());
    let a1 = acceleration(state, &p0, &v0)?;
    let (p1, v1) = (axpy(&p0, 0.5 * dt, &v0), axpy(&v0, 0.5 * dt, &a1));
    let a2 = acceleration(state, &p1, &v1)?;
    let (p2, v2) = (axpy(&p0, 0.5 * dt, &v1), axpy(&v0, 0.5 * dt, &a2));
    let a3 = acceleration(state, &p2, &v2)?;
    let (p3, v3) = (axpy(&p0, dt, &v2), axpy(&v0, dt, &a3));
    let a4 = acceleration(state, &p3, &v3)?;
    let w = dt / 6.0;
    for i in 0..p0.len() {
        for p in 0..p0[i].len() {
            state.phi[i][p] += w * (v0[i][p] + 2.0 * v1[i][p] + 2.0 * v2[i][p] + v3[i][p]);
            state.phi_t[i][p] += w * (a1[i][p] + 2.0 * a2[i][p] + 2.0 * a3[i][p] + a4[i][p]);
        }
    }
    state.time += dt;
    Ok(())
}

/// Classical RK4 on `(φ, ∂_tφ)`, recording frame components and energy.
pub fn evolve(initial: &MapState, opts: &EvolveOptions) -> Result<Evolution> {
    let grid = &initial.grid;
    if !(opts.dt > 0.0) || opts.dt > 0.5 * grid.min_dx() {
        return Err(LabError::InvalidInput(format!(
            "time step {} violates 0 < dt <= 0.5 min(dx) = {}",
            opts.dt,
            0.5 * grid.min_dx()
        )));
    }
    if opts.sample_every == 0 {
        return Err(LabError::InvalidInput("sample_every must be positive".into()));
    }
    initial.check_domain()?;
    let mut state = initial.clone();
    let e0 = energy(&state)?;
    let m0 = max_abs(&state.phi_t);
    let mut times = vec![state.time];
    let mut slices = vec![state.frame_components()?];
    let mut energies = vec![e0];
    for step in 1..=opts.steps {
        let t_prev = state.time;
        rk4_step(&mut state, opts.dt).map_err(|e| match e {
            LabError::ChartDomain { point, .. } => LabError::BlowUp {
                time: t_prev,
                reason: format!("map left the chart domain at {point:?}"),
            },
            other => other,
        })?;
        // Multiplying avoids drift from accumulated additions.
        state.time = initial.time + step as f64 * opts.dt;
        let m = max_abs(&state.phi_t);
        if !m.is_finite() || state.phi.iter().flatten().any(|x| !x.is_finite()) {
            return Err(LabError::BlowUp {
                time: state.time,
                reason: "non-finite field values".into(),
            });
        }
        if m0 > 0.0 && m > opts.guard_factor * m0 {
            return Err(LabError::BlowUp {
                time: state.time,
                reason: format!("velocity magnitude {m:.3e} exceeds {} x initial {m0:.3e}", opts.guard_factor),
            });
        }
        if step % opts.sample_every == 0 || step == opts.steps {
            let e = energy(&state)?;
            if e0 > 0.0 && e > opts.guard_factor * e0 {
                return Err(LabError::BlowUp {
                    time: state.time,
                    reason: format!("energy {e:.3e} exceeds {} x initial {e0:.3e}", opts.guard_factor),
                });
            }
            if step % opts.sample_every == 0 {
                times.push(state.time);
                slices.push(state.frame_components()?);
                energies.push(e);
            }
        }
    }
    Ok(Evolution {
        trajectory: Trajectory {
            frame: initial.target.frame().clone(),
            target_kind: initial.target.kind(),
            grid: grid.clone(),
            dt: opts.dt * opts.sample_every as f64,
            times,
            slices,
        },
        final_state: state,
        energies,
    })
}
