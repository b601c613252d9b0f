use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FrameField, MapState};
use crate::error::{LabError, Result};
use crate::geometry::TargetInstance;
use crate::grid::{BumpProfile, Grid};
use crate::norms::{band_norms_all, canonical_envelope};

/// Identifier of the pseudo-random generator used for every draw.
pub const GENERATOR_ID: &str = "rand_chacha::ChaCha8Rng/0.9";

/// Shape of the random initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialDataSpec {
    /// Inclusive range of dyadic bands carrying data.
    pub bands: (i32, i32),
    /// Envelope slack exponent.
    pub sigma: f64,
    /// Amplitude of the velocity relative to the position data.
    pub velocity_ratio: f64,
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        Self {
            bands: (0, 1),
            sigma: 0.25,
            velocity_ratio: 1.0,
        }
    }
}

/// Generated data with the envelope it was normalized against.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub state: MapState,
    /// Prescribed envelope `c_k` for `k = k_min ..= k_max`.
    pub envelope: Vec<f64>,
    /// Regularity index of the data norm, `n/2`.
    pub s: f64,
}

fn conjugate_index(grid: &Grid, p: usize) -> usize {
    let mut q = 0;
    for a in 0..grid.dim() {
        let n = grid.sizes()[a];
        let j = (p / grid.strides()[a]) % n;
        q += ((n - j) % n) * grid.strides()[a];
    }
    q
}

/// Real field with deterministic modulus profile and random phases.
fn random_phase_field(grid: &Grid, modulus: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut spec = vec![Complex64::default(); grid.len()];
    for p in 0..grid.len() {
        let q = conjugate_index(grid, p);
        if q < p || modulus[p] == 0.0 {
            continue;
        }
        if q == p {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            spec[p] = Complex64::new(sign * modulus[p], 0.0);
            continue;
        }
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let z = Complex64::from_polar(modulus[p], theta);
        spec[p] = z;
        spec[q] = z.conj();
    }
    grid.fft_inverse(spec)
}

/// Per-band data norm `Σ_a [(Σ_i ‖P_kφ^a_i‖²_{Ḣ^{s−1}})^{1/2} + ‖P_kφ^a_0‖_{Ḣ^{s−1}}]`
/// for `k = k_min ..= k_max`.
pub fn data_band_norms(phi: &FrameField, s: f64) -> Vec<f64> {
    let grid = &phi.grid;
    let bands = (grid.k_max() - grid.k_min() + 1) as usize;
    let mut out = vec![0.0; bands];
    for a in 0..phi.frame_dim {
        let mut spatial = vec![0.0; bands];
        for i in 1..phi.slots() {
            for (acc, b) in spatial.iter_mut().zip(band_norms_all(&phi.field(a, i), s - 1.0)) {
                *acc += b * b;
            }
        }
        let time = band_norms_all(&phi.field(a, 0), s - 1.0);
        for k in 0..bands {
            out[k] += spatial[k].sqrt() + time[k];
        }
    }
    out
}

/// Random band-limited data of envelope size `eps`, mapped through `exp_map`.
///
/// Each tangent component has spectral modulus `Σ_{k∈bands} χ(2^{−k}r)` and
/// uniformly random phases, so linear band norms do not depend on the seed.
pub fn make_initial_data(
    target: &TargetInstance,
    grid: &Grid,
    spec: &InitialDataSpec,
    eps: f64,
    seed: u64,
) -> Result<InitialData> {
    let (lo, hi) = spec.bands;
    if lo > hi {
        return Err(LabError::InvalidInput(format!("empty data band range [{lo}, {hi}]")));
    }
    grid.validate(crate::grid::Projection::Interval(lo, hi))?;
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(LabError::InvalidInput(format!("amplitude {eps} must be finite and >= 0")));
    }
    let nf = target.dim();
    let n = grid.dim();
    let s = n as f64 / 2.0;
    let modulus: Vec<f64> = grid
        .radius()
        .iter()
        .map(|&r| (lo..=hi).map(|k| BumpProfile.chi(r * 2f64.powi(-k))).sum())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Vec<f64>> = (0..nf)
        .map(|_| random_phase_field(grid, &modulus, &mut rng))
        .collect::<Result<_>>()?;
    let mut w: Vec<Vec<f64>> = (0..nf)
        .map(|_| random_phase_field(grid, &modulus, &mut rng))
        .collect::<Result<_>>()?;

    // Linear-order frame components: φ^a_i = ∂_i v^a, φ^a_0 = ratio · w^a.
    let mut lin = FrameField::zeros(grid, nf);
    for a in 0..nf {
        let spec_v = grid.fft_forward(&v[a])?;
        for axis in 0..n {
            let mut d = spec_v.clone();
            crate::grid::spectral_derivative_in_place(grid, &mut d, axis);
            let slot = lin.slot(a, axis + 1);
            lin.comps[slot] = grid.fft_inverse(d)?;
        }
        let slot = lin.slot(a, 0);
        lin.comps[slot] = w[a].iter().map(|x| x * spec.velocity_ratio).collect();
    }
    let base_env = canonical_envelope(&data_band_norms(&lin, s), spec.sigma);
    let l2 = base_env.iter().map(|c| c * c).sum::<f64>().sqrt();
    let lambda = if eps == 0.0 || l2 == 0.0 { 0.0 } else { eps / l2 };
    for comp in &mut v {
        comp.iter_mut().for_each(|x| *x *= lambda);
    }
    for comp in &mut w {
        comp.iter_mut().for_each(|x| *x *= lambda * spec.velocity_ratio);
    }

    let base = target.base_point();
    let mut state = MapState::constant(grid, target, &base);
    let mut tangent = vec![0.0; nf];
    let mut e = vec![0.0; nf * nf];
    for p in 0..grid.len() {
        for a in 0..nf {
            tangent[a] = v[a][p];
        }
        let x = target.exp_map(&base, &tangent)?;
        target.frame_vectors(&x, &mut e);
        for i in 0..nf {
            state.phi[i][p] = x[i];
            state.phi_t[i][p] = (0..nf).map(|a| e[i * nf + a] * w[a][p]).sum();
        }
    }
    Ok(InitialData {
        state,
        envelope: base_env.iter().map(|c| c * lambda).collect(),
        s,
    })
}
