//! Wave maps in chart coordinates and their frame components.
//!
//! The map `φ` is evolved through the coordinate equation
//! `∂_t²φ^I = Δφ^I + Γ^I_JK(−∂_tφ^J∂_tφ^K + Σ_i ∂_iφ^J∂_iφ^K)`
//! and only then converted to frame components `φ^a_α = ω^a_I ∂_αφ^I`, so the
//! curl identity holds analytically for every sample.

mod data;
mod evolve;
mod identities;

pub use data::{data_band_norms, make_initial_data, InitialData, InitialDataSpec};
pub use evolve::{energy, evolve, EvolveOptions, Evolution, GUARD_FACTOR};
pub use identities::{
    connection_pointwise, cubic_term_e, cubic_term_pointwise, divcurl_residual,
    wave_identity_residual, DivCurlResidual, ResidualNorms, WaveIdentityResidual,
};
pub use data::GENERATOR_ID;
#[allow(unused_imports)]
pub(crate) use identities::{gradients, laplacians, second_time_derivative, time_derivative};

use crate::error::{LabError, Result};
use crate::geometry::{FrameData, TargetInstance};
use crate::grid::{spectral_derivative_in_place, Grid, GridSpec, ScalarField};
use crate::stencil::TimeStencil;

/// A map into the target plus its time derivative, both in chart coordinates.
#[derive(Debug, Clone)]
pub struct MapState {
    pub grid: Grid,
    pub target: TargetInstance,
    /// `phi[I][p]`.
    pub phi: Vec<Vec<f64>>,
    /// `phi_t[I][p]`.
    pub phi_t: Vec<Vec<f64>>,
    pub time: f64,
}

impl MapState {
    /// Constant map at `point` with zero velocity.
    pub fn constant(grid: &Grid, target: &TargetInstance, point: &[f64]) -> Self {
        Self {
            grid: grid.clone(),
            target: target.clone(),
            phi: point.iter().map(|&x| vec![x; grid.len()]).collect(),
            phi_t: vec![vec![0.0; grid.len()]; target.dim()],
            time: 0.0,
        }
    }

    pub fn point(&self, p: usize, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.phi[i][p];
        }
    }

    pub fn check_domain(&self) -> Result<()> {
        let mut x = vec![0.0; self.target.dim()];
        for p in 0..self.grid.len() {
            self.point(p, &mut x);
            if !self.target.in_domain(&x) {
                return Err(LabError::ChartDomain {
                    point: x,
                    domain: self.target.chart().domain.clone(),
                });
            }
        }
        Ok(())
    }

    /// `φ^a_α = ω^a_I ∂_αφ^I`, spatial derivatives taken spectrally.
    pub fn frame_components(&self) -> Result<FrameField> {
        let grid = &self.grid;
        let n = grid.dim();
        let nf = self.target.dim();
        // dphi[I][i][p]
        let dphi: Vec<Vec<Vec<f64>>> = self
            .phi
            .iter()
            .map(|comp| {
                let spec = grid.fft_forward(comp)?;
                (0..n)
                    .map(|axis| {
                        let mut s = spec.clone();
                        spectral_derivative_in_place(grid, &mut s, axis);
                        grid.fft_inverse(s)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut out = FrameField::zeros(grid, nf);
        let mut x = vec![0.0; nf];
        let mut w = vec![0.0; nf * nf];
        for p in 0..grid.len() {
            self.point(p, &mut x);
            self.target.coframe(&x, &mut w)?;
            for a in 0..nf {
                let mut v0 = 0.0;
                for i in 0..nf {
                    v0 += w[a * nf + i] * self.phi_t[i][p];
                }
                let slot = out.slot(a, 0);
                out.comps[slot][p] = v0;
                for axis in 0..n {
                    let mut v = 0.0;
                    for i in 0..nf {
                        v += w[a * nf + i] * dphi[i][axis][p];
                    }
                    let slot = out.slot(a, axis + 1);
                    out.comps[slot][p] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Frame components `φ^a_α` on one time slice; `α = 0` is the time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameField {
    pub grid: Grid,
    pub frame_dim: usize,
    /// `comps[a * (n + 1) + α][p]`.
    pub comps: Vec<Vec<f64>>,
}

impl FrameField {
    pub fn zeros(grid: &Grid, frame_dim: usize) -> Self {
        Self {
            grid: grid.clone(),
            frame_dim,
            comps: vec![vec![0.0; grid.len()]; frame_dim * (grid.dim() + 1)],
        }
    }

    /// Number of space-time slots `n + 1`.
    pub fn slots(&self) -> usize {
        self.grid.dim() + 1
    }

    #[inline]
    pub fn slot(&self, a: usize, alpha: usize) -> usize {
        a * self.slots() + alpha
    }

    pub fn get(&self, a: usize, alpha: usize) -> &[f64] {
        &self.comps[self.slot(a, alpha)]
    }

    pub fn field(&self, a: usize, alpha: usize) -> ScalarField {
        ScalarField::new(&self.grid, self.get(a, alpha).to_vec()).expect("component length")
    }

    /// All components at grid point `p`, laid out `a * (n + 1) + α`.
    pub fn at(&self, p: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c[p];
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

/// Uniformly sampled frame components on `[0, T]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub frame: FrameData,
    pub target_kind: crate::geometry::TargetKind,
    pub grid: Grid,
    /// Spacing between consecutive samples.
    pub dt: f64,
    pub times: Vec<f64>,
    pub slices: Vec<FrameField>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn t_span(&self) -> (f64, f64) {
        (
            self.times.first().copied().unwrap_or(0.0),
            self.times.last().copied().unwrap_or(0.0),
        )
    }

    pub fn require(&self, stencil: TimeStencil) -> Result<std::ops::Range<usize>> {
        stencil.interior(self.len())
    }

    pub fn grid_spec(&self) -> GridSpec {
        self.grid.spec()
    }
}
