use rustfft::num_complex::Complex64;

use super::{deriv, masked, max_abs, mi, real, spectra, ConnectionField};
use crate::error::{LabError, Result};
use crate::grid::{Grid, Projection};

/// Antisymmetry tolerance for `Δ̃_k`, relative to its scale.
pub const POTENTIAL_ANTISYMMETRY_TOL: f64 = 1e-13;

/// `Δ̃ = Σ_k Δ̃_k` on one slice with spatial and time derivatives.
#[derive(Debug, Clone)]
pub struct PotentialChain {
    pub grid: Grid,
    pub frame_dim: usize,
    pub bands: Vec<i32>,
    /// `delta_k[band][a * N + b][p]`.
    pub delta_k: Vec<Vec<Vec<f64>>>,
    /// `delta_k_d[band][(a * N + b) * slots + μ][p]`, `μ = 0` is `∂_t`.
    pub delta_k_d: Vec<Vec<Vec<f64>>>,
    pub delta: Vec<Vec<f64>>,
    pub delta_d: Vec<Vec<f64>>,
    /// `R̄ = R̃ − ∂Δ̃`, laid out like `R`.
    pub r_bar: Vec<Vec<f64>>,
    pub antisymmetry: f64,
}

impl PotentialChain {
    pub fn slots(&self) -> usize {
        self.grid.dim() + 1
    }

    /// Assembles a chain from prescribed band potentials and their time
    /// derivatives. Spatial derivatives are spectral. `r_bar` is left zero.
    pub fn from_bands(
        grid: &Grid,
        frame_dim: usize,
        bands: Vec<i32>,
        delta_k: Vec<Vec<Vec<f64>>>,
        delta_k_t: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if delta_k.len() != bands.len() || delta_k_t.len() != bands.len() {
            return Err(LabError::InvalidInput("one potential per band required".into()));
        }
        let slots = grid.dim() + 1;
        let nn = frame_dim * frame_dim;
        let mut delta_k_d = Vec::with_capacity(bands.len());
        for (d, dt) in delta_k.iter().zip(&delta_k_t) {
            if d.len() != nn || dt.len() != nn {
                return Err(LabError::InvalidInput("potential must be N×N".into()));
            }
            let mut out = vec![Vec::new(); nn * slots];
            for ab in 0..nn {
                let s = grid.fft_forward(&d[ab])?;
                out[ab * slots] = dt[ab].clone();
                for i in 1..slots {
                    out[ab * slots + i] = real(grid, deriv(grid, &s, i - 1));
                }
            }
            delta_k_d.push(out);
        }
        let delta = sum_bands(&delta_k);
        let delta_d = sum_bands(&delta_k_d);
        let antisymmetry = delta_k
            .iter()
            .map(|d| antisymmetry_defect(frame_dim, d))
            .fold(0.0, f64::max);
        Ok(Self {
            grid: grid.clone(),
            frame_dim,
            bands,
            r_bar: vec![vec![0.0; grid.len()]; nn * slots],
            delta_k,
            delta_k_d,
            delta,
            delta_d,
            antisymmetry,
        })
    }

    pub fn band_index(&self, k: i32) -> Result<usize> {
        self.bands.iter().position(|&b| b == k).ok_or(LabError::DyadicRange {
            k,
            min: *self.bands.first().unwrap_or(&0),
            max: *self.bands.last().unwrap_or(&0),
        })
    }
}

fn sum_bands(per_band: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let mut iter = per_band.iter();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let mut acc = first.clone();
    for band in iter {
        for (a, b) in acc.iter_mut().zip(band) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }
    acc
}

fn antisymmetry_defect(nf: usize, m: &[Vec<f64>]) -> f64 {
    let scale = max_abs(m);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for a in 0..nf {
        for b in a..nf {
            for (u, v) in m[mi(nf, a, b)].iter().zip(&m[mi(nf, b, a)]) {
                worst = worst.max((u + v).abs());
            }
        }
    }
    worst / scale
}

/// Chain bands for a cutoff: `P_{≤k_cut}` reaches into band `k_cut + 1`.
pub(crate) fn chain_bands(grid: &Grid, k_cut: i32) -> Result<Vec<i32>> {
    let top = k_cut + 1;
    if k_cut < grid.k_min() || top > grid.k_max() {
        return Err(LabError::DyadicRange {
            k: k_cut,
            min: grid.k_min(),
            max: grid.k_max() - 1,
        });
    }
    Ok((grid.k_min()..=top).collect())
}

/// `−i ξ_i S_i / |ξ|²` with the mean mode set to zero.
fn elliptic(grid: &Grid, comps: &[&[Complex64]]) -> Vec<Complex64> {
    let kappa = grid.kappa();
    let mut acc = vec![Complex64::default(); grid.len()];
    for (i, s) in comps.iter().enumerate() {
        for (a, d) in acc.iter_mut().zip(deriv(grid, s, i)) {
            *a += d;
        }
    }
    for (a, r) in acc.iter_mut().zip(grid.radius()) {
        let xi2 = (r * kappa) * (r * kappa);
        *a = if xi2 == 0.0 { Complex64::default() } else { -*a / xi2 };
    }
    acc
}

/// Solves `∇²Δ̃_k = ∂^i(P_kR̃_i)` per band, for `R̃` and `∂_tR̃`, and fills `R̄`.
pub fn solve_potential(conn: &ConnectionField) -> Result<PotentialChain> {
    let grid = &conn.grid;
    let nf = conn.frame_dim;
    let slots = conn.slots();
    let bands = chain_bands(grid, conn.k_cut)?;
    if conn.antisymmetry > super::connection::R_ANTISYMMETRY_TOL {
        return Err(LabError::Antisymmetry {
            defect: conn.antisymmetry,
            tolerance: super::connection::R_ANTISYMMETRY_TOL,
        });
    }
    let rt = spectra(grid, &conn.r_tilde);
    let rtt = spectra(grid, &conn.r_tilde_t);
    let nn = nf * nf;
    let mut full = Vec::with_capacity(nn);
    let mut full_t = Vec::with_capacity(nn);
    for ab in 0..nn {
        let sp: Vec<&[Complex64]> = (1..slots).map(|i| rt[ab * slots + i].as_slice()).collect();
        let spt: Vec<&[Complex64]> = (1..slots).map(|i| rtt[ab * slots + i].as_slice()).collect();
        full.push(elliptic(grid, &sp));
        full_t.push(elliptic(grid, &spt));
    }
    let mut delta_k = Vec::with_capacity(bands.len());
    let mut delta_k_d = Vec::with_capacity(bands.len());
    for &k in &bands {
        let chi = grid.multiplier(Projection::Band(k))?;
        let mut dk = Vec::with_capacity(nn);
        let mut dkd = vec![Vec::new(); nn * slots];
        for ab in 0..nn {
            let s = masked(&full[ab], &chi);
            dkd[ab * slots] = real(grid, masked(&full_t[ab], &chi));
            for i in 1..slots {
                dkd[ab * slots + i] = real(grid, deriv(grid, &s, i - 1));
            }
            dk.push(real(grid, s));
        }
        delta_k.push(dk);
        delta_k_d.push(dkd);
    }
    let antisymmetry = delta_k
        .iter()
        .map(|d| antisymmetry_defect(nf, d))
        .fold(0.0, f64::max);
    if antisymmetry > POTENTIAL_ANTISYMMETRY_TOL {
        return Err(LabError::Antisymmetry {
            defect: antisymmetry,
            tolerance: POTENTIAL_ANTISYMMETRY_TOL,
        });
    }
    let delta = sum_bands(&delta_k);
    let delta_d = sum_bands(&delta_k_d);
    let r_bar = conn
        .r_tilde
        .iter()
        .zip(&delta_d)
        .map(|(r, d)| r.iter().zip(d).map(|(x, y)| x - y).collect())
        .collect();
    Ok(PotentialChain {
        grid: grid.clone(),
        frame_dim: nf,
        bands,
        delta_k,
        delta_k_d,
        delta,
        delta_d,
        r_bar,
        antisymmetry,
    })
}

/// `F_(k)μν = ∂_μ(P_kR̄_ν) − ∂_ν(P_kR̄_μ)` on one slice, with the divergence
/// gauge and `R̄_0` consistency residuals of the same band.
#[derive(Debug, Clone)]
pub struct ExteriorDefect {
    pub k: i32,
    /// `f[((a * N + b) * slots + μ) * slots + ν][p]`.
    pub f: Vec<Vec<f64>>,
    pub p_r_tilde: Vec<Vec<f64>>,
    pub p_r_bar: Vec<Vec<f64>>,
    /// `max |∂^i(P_kR̄_i)|`.
    pub divergence: f64,
    /// `max |∇²(P_kR̄_0) + ∂^iF_(k)0i|`.
    pub r0_consistency: f64,
}

pub fn exterior_defect(
    conn: &ConnectionField,
    pot: &PotentialChain,
    k: i32,
) -> Result<ExteriorDefect> {
    let grid = &conn.grid;
    let b = pot.band_index(k)?;
    let nf = conn.frame_dim;
    let nn = nf * nf;
    let slots = conn.slots();
    let chi = grid.multiplier(Projection::Band(k))?;
    let kappa = grid.kappa();
    let zero = vec![Complex64::default(); grid.len()];
    let mut f = vec![vec![0.0; grid.len()]; nn * slots * slots];
    let mut p_r_tilde = Vec::with_capacity(nn * slots);
    let mut p_r_bar = Vec::with_capacity(nn * slots);
    let mut divergence = 0.0f64;
    let mut r0_consistency = 0.0f64;
    for ab in 0..nn {
        let d = grid.fft_forward(&pot.delta_k[b][ab])?;
        let d_t = grid.fft_forward(&pot.delta_k_d[b][ab * slots])?;
        // Spectra of P_kR̄_μ and ∂_t(P_kR̄_μ); μ = 0 time derivative unused.
        let mut bar = Vec::with_capacity(slots);
        let mut bar_t = Vec::with_capacity(slots);
        for mu in 0..slots {
            let s = masked(&grid.fft_forward(&conn.r_tilde[ab * slots + mu])?, &chi);
            p_r_tilde.push(real(grid, s.clone()));
            if mu == 0 {
                bar.push(s.iter().zip(&d_t).map(|(x, y)| x - y).collect::<Vec<_>>());
                bar_t.push(zero.clone());
            } else {
                let dd = deriv(grid, &d, mu - 1);
                let ddt = deriv(grid, &d_t, mu - 1);
                let st = masked(&grid.fft_forward(&conn.r_tilde_t[ab * slots + mu])?, &chi);
                bar.push(s.iter().zip(&dd).map(|(x, y)| x - y).collect());
                bar_t.push(st.iter().zip(&ddt).map(|(x, y)| x - y).collect());
            }
        }
        for s in &bar {
            p_r_bar.push(real(grid, s.clone()));
        }
        let d_of = |i: usize, s: &[Complex64]| deriv(grid, s, i - 1);
        let mut div = zero.clone();
        let mut cons: Vec<Complex64> = bar[0]
            .iter()
            .zip(grid.radius())
            .map(|(s, r)| -s * (r * kappa) * (r * kappa))
            .collect();
        for i in 1..slots {
            for (x, y) in div.iter_mut().zip(d_of(i, &bar[i])) {
                *x += y;
            }
            // F_0i = ∂_t P_kR̄_i − ∂_i P_kR̄_0.
            let f0i: Vec<Complex64> =
                bar_t[i].iter().zip(d_of(i, &bar[0])).map(|(x, y)| x - y).collect();
            for (x, y) in cons.iter_mut().zip(d_of(i, &f0i)) {
                *x += y;
            }
            let f0i = real(grid, f0i);
            let base = ab * slots * slots;
            f[base + i * slots] = f0i.iter().map(|v| -v).collect();
            f[base + i] = f0i;
            for j in (i + 1)..slots {
                let fij: Vec<Complex64> = d_of(i, &bar[j])
                    .iter()
                    .zip(d_of(j, &bar[i]))
                    .map(|(x, y)| x - y)
                    .collect();
                let fij = real(grid, fij);
                f[base + j * slots + i] = fij.iter().map(|v| -v).collect();
                f[base + i * slots + j] = fij;
            }
        }
        divergence = divergence.max(max_abs(&[real(grid, div)]));
        r0_consistency = r0_consistency.max(max_abs(&[real(grid, cons)]));
    }
    Ok(ExteriorDefect {
        k,
        f,
        p_r_tilde,
        p_r_bar,
        divergence,
        r0_consistency,
    })
}

impl PotentialChain {
    /// The potential of `−R̃`.
    pub fn negated(&self) -> Self {
        let neg = |v: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.iter().map(|f| f.iter().map(|x| -x).collect()).collect()
        };
        Self {
            grid: self.grid.clone(),
            frame_dim: self.frame_dim,
            bands: self.bands.clone(),
            delta_k: self.delta_k.iter().map(neg).collect(),
            delta_k_d: self.delta_k_d.iter().map(neg).collect(),
            delta: neg(&self.delta),
            delta_d: neg(&self.delta_d),
            r_bar: neg(&self.r_bar),
            antisymmetry: self.antisymmetry,
        }
    }
}
