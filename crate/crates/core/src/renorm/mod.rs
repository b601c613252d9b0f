//! Connection matrices, the div-curl potential `Δ̃`, the `U` chain and the
//! gauge-transformed band field `W = U⁻¹Ψ`.
//!
//! Everything except `□U`, `□W` and `□Δ̃` is slice-local: time derivatives of
//! `Φ` come from the curl and divergence identities, which hold exactly on
//! wave-map solutions.

mod chain;
mod connection;
mod pipeline;
mod potential;

pub use chain::{build_u, gauge_transform, RenormChain};
pub use connection::{build_r, frame_time_derivative, ConnectionField};
pub use pipeline::{
    renorm_effectiveness, AlgebraDefects, BandRow, ChainNorms, ChainOrientation, Effectiveness,
    RenormOptions, RenormReport, ResolvedOptions,
};
pub use potential::{exterior_defect, solve_potential, ExteriorDefect, PotentialChain};

pub use crate::norms::error_norm;

use rustfft::num_complex::Complex64;

use crate::grid::{spectral_derivative_in_place, Grid};

/// Index of `M^a_b` in a flattened `N × N` matrix.
#[inline]
pub(crate) fn mi(n: usize, a: usize, b: usize) -> usize {
    a * n + b
}

pub(crate) fn spectra(grid: &Grid, fields: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    fields
        .iter()
        .map(|f| grid.fft_forward(f).expect("field on grid"))
        .collect()
}

pub(crate) fn masked(spec: &[Complex64], mult: &[f64]) -> Vec<Complex64> {
    spec.iter().zip(mult).map(|(s, m)| s * m).collect()
}

pub(crate) fn deriv(grid: &Grid, spec: &[Complex64], axis: usize) -> Vec<Complex64> {
    let mut s = spec.to_vec();
    spectral_derivative_in_place(grid, &mut s, axis);
    s
}

pub(crate) fn real(grid: &Grid, spec: Vec<Complex64>) -> Vec<f64> {
    grid.fft_inverse(spec).expect("spectrum on grid")
}

/// Pointwise Frobenius magnitude of a collection of fields.
pub(crate) fn frobenius<S: AsRef<[f64]>>(fields: &[S]) -> Vec<f64> {
    let len = fields.first().map(|f| f.as_ref().len()).unwrap_or(0);
    let mut out = vec![0.0; len];
    for f in fields {
        for (o, v) in out.iter_mut().zip(f.as_ref()) {
            *o += v * v;
        }
    }
    out.iter_mut().for_each(|o| *o = o.sqrt());
    out
}

pub(crate) fn max_abs<S: AsRef<[f64]>>(fields: &[S]) -> f64 {
    fields
        .iter()
        .flat_map(|f| f.as_ref().iter())
        .fold(0.0, |m: f64, v| m.max(v.abs()))
}
