use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{mixed_norm, Exponent, MixedNormSpec};
use crate::error::{LabError, Result};
use crate::grid::{lp_norm, Grid, Projection, ScalarField};

/// The seven bootstrap pairs, kept when admissible in dimension `n`.
pub fn default_pairs(n: usize) -> Vec<MixedNormSpec> {
    let nf = n as f64;
    let mut pairs = Vec::new();
    if n > 3 {
        pairs.push(MixedNormSpec::new(2.0, 2.0 * (nf - 1.0) / (nf - 3.0)));
    }
    pairs.extend([
        MixedNormSpec::new(2.0, 4.0),
        MixedNormSpec::new(2.0, nf - 1.0),
        MixedNormSpec::new(2.0, f64::INFINITY),
        MixedNormSpec::new(f64::INFINITY, 2.0),
        MixedNormSpec::new(f64::INFINITY, f64::INFINITY),
        MixedNormSpec::new(4.0, 2.0 * (nf - 1.0)),
    ]);
    pairs.retain(|p| p.is_admissible(n));
    pairs.dedup();
    pairs
}

/// Physical frequency of band `k`: `κ 2^k`.
pub fn band_scale(grid: &Grid, k: i32) -> f64 {
    grid.kappa() * 2f64.powi(k)
}

/// `sup_{(q,r)} λ^{1/q + n/r − 1}(‖Φ‖_{L^qL^r} + λ^{−1}‖∂_tΦ‖_{L^qL^r})`
/// with `λ = κ 2^k`, over pointwise magnitudes sampled every `dt`.
pub fn sk_norm<S: AsRef<[f64]>>(
    grid: &Grid,
    dt: f64,
    field: &[S],
    field_t: &[S],
    k: i32,
    pairs: &[MixedNormSpec],
) -> Result<f64> {
    let n = grid.dim();
    if pairs.is_empty() {
        return Err(LabError::InvalidInput("no admissible exponent pairs".into()));
    }
    if let Some(p) = pairs.iter().find(|p| !p.is_admissible(n)) {
        return Err(LabError::InvalidInput(format!("{p} is not admissible for n = {n}")));
    }
    if field.len() != field_t.len() {
        return Err(LabError::InvalidInput("field and time derivative lengths differ".into()));
    }
    let lambda = band_scale(grid, k);
    let dv = grid.cell_volume();
    Ok(pairs
        .iter()
        .map(|&p| {
            let w = lambda.powf(p.q.reciprocal() + n as f64 * p.r.reciprocal() - 1.0);
            w * (mixed_norm(field, dt, dv, p) + mixed_norm(field_t, dt, dv, p) / lambda)
        })
        .fold(0.0, f64::max))
}

/// Exact solution of `−φ_tt + Δφ = F` with static forcing, sampled at `times`.
/// Returns `(φ, φ_t)` per sample.
pub fn free_wave(
    phi0: &ScalarField,
    phi1: &ScalarField,
    forcing: Option<&ScalarField>,
    times: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = phi0.grid();
    let a = phi0.fft();
    let b = phi1.fft();
    let f = forcing.map(|f| f.fft());
    let kappa = grid.kappa();
    let mut out = Vec::with_capacity(times.len());
    let mut out_t = Vec::with_capacity(times.len());
    for &t in times {
        let mut s = vec![Complex64::default(); grid.len()];
        let mut st = vec![Complex64::default(); grid.len()];
        for (p, r) in grid.radius().iter().enumerate() {
            let w = r * kappa;
            let fp = f.as_ref().map_or(Complex64::default(), |f| f[p]);
            if w == 0.0 {
                s[p] = a[p] + b[p] * t - fp * (0.5 * t * t);
                st[p] = b[p] - fp * t;
                continue;
            }
            let (sn, cs) = (w * t).sin_cos();
            s[p] = a[p] * cs + b[p] * (sn / w) - fp * ((1.0 - cs) / (w * w));
            st[p] = -a[p] * (w * sn) + b[p] * cs - fp * (sn / w);
        }
        out.push(grid.fft_inverse(s)?);
        out_t.push(grid.fft_inverse(st)?);
    }
    Ok((out, out_t))
}

fn check_banded(f: &ScalarField, k: i32, what: &str) -> Result<()> {
    let grid = f.grid();
    let chi = grid.multiplier(Projection::Band(k))?;
    let spec = f.fft();
    let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let stray = spec
        .iter()
        .zip(&chi)
        .filter(|(_, &m)| m == 0.0)
        .map(|(c, _)| c.norm())
        .fold(0.0, f64::max);
    if stray > 1e-12 * peak.max(f64::MIN_POSITIVE) {
        return Err(LabError::InvalidInput(format!(
            "{what} is not supported in band {k}"
        )));
    }
    Ok(())
}

/// Result of one [`strichartz_check`] draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrichartzRatio {
    pub sk: f64,
    pub denominator: f64,
    /// Observed `‖φ‖_{S_k}` over the data-and-forcing norm; 0 when both vanish.
    pub ratio: f64,
}

/// Linear Strichartz ratio for band-`k` data and static band-`k` forcing on
/// `[0, t_end]` with `samples` uniform time samples.
#[allow(clippy::too_many_arguments)]
pub fn strichartz_check(
    k: i32,
    phi0: &ScalarField,
    phi1: &ScalarField,
    forcing: Option<&ScalarField>,
    t_end: f64,
    samples: usize,
    pairs: &[MixedNormSpec],
) -> Result<StrichartzRatio> {
    let grid = phi0.grid();
    if samples < 2 || t_end <= 0.0 {
        return Err(LabError::InvalidInput("need at least two samples on a positive interval".into()));
    }
    check_banded(phi0, k, "position data")?;
    check_banded(phi1, k, "velocity data")?;
    if let Some(f) = forcing {
        check_banded(f, k, "forcing")?;
    }
    let dt = t_end / (samples - 1) as f64;
    let times: Vec<f64> = (0..samples).map(|i| i as f64 * dt).collect();
    let (phi, phi_t) = free_wave(phi0, phi1, forcing, &times)?;
    let sk = sk_norm(grid, dt, &phi, &phi_t, k, pairs)?;
    let n = grid.dim() as f64;
    let lambda = band_scale(grid, k);
    let forcing_norm = forcing.map_or(0.0, |f| t_end * f.lp_norm(2.0));
    let denominator = phi0.hdot_norm((n - 2.0) / 2.0)
        + phi1.hdot_norm((n - 4.0) / 2.0)
        + lambda.powf((n - 4.0) / 2.0) * forcing_norm;
    let ratio = if denominator == 0.0 { 0.0 } else { sk / denominator };
    Ok(StrichartzRatio {
        sk,
        denominator,
        ratio,
    })
}

/// `‖P_0(fg) − f P_0 g‖_{L^r} / (‖∇f‖_{L^p} ‖g‖_{L^q})`, requiring
/// `1/r = 1/p + 1/q`. A vanishing left side gives 0.
pub fn commutator_check(
    f: &ScalarField,
    g: &ScalarField,
    r: Exponent,
    p: Exponent,
    q: Exponent,
) -> Result<f64> {
    if (r.reciprocal() - p.reciprocal() - q.reciprocal()).abs() > 1e-12 {
        return Err(LabError::InvalidInput(format!(
            "exponents r = {r}, p = {p}, q = {q} are not Hölder-compatible"
        )));
    }
    let grid = f.grid();
    if grid != g.grid() {
        return Err(LabError::InvalidInput("fields on different grids".into()));
    }
    let p0 = Projection::Band(grid.k_min());
    let fg = f.mul(g).project(p0)?;
    let f_pg = f.mul(&g.project(p0)?);
    let left = fg.sub(&f_pg).lp_norm(r.value());
    if left == 0.0 {
        return Ok(0.0);
    }
    let grads: Vec<ScalarField> = (0..grid.dim())
        .map(|a| f.derivative(a))
        .collect::<Result<_>>()?;
    let mag: Vec<f64> = (0..grid.len())
        .map(|i| grads.iter().map(|d| d.values()[i].powi(2)).sum::<f64>().sqrt())
        .collect();
    let right = lp_norm(&mag, grid.cell_volume(), p.value()) * g.lp_norm(q.value());
    Ok(left / right)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn default_pairs_by_dimension() {
        let two = default_pairs(2);
        assert_eq!(two, vec![MixedNormSpec::new(f64::INFINITY, 2.0), MixedNormSpec::new(f64::INFINITY, f64::INFINITY)]);
        let five = default_pairs(5);
        assert!(five.contains(&MixedNormSpec::new(2.0, f64::INFINITY)));
        assert_eq!(five.len(), 5);
        let g = Grid::cube(2, 8, 2.0 * PI).unwrap();
        let z = vec![vec![0.0; g.len()]; 3];
        assert!(sk_norm(&g, 0.1, &z, &z, 0, &[]).is_err());
        assert!(sk_norm(&g, 0.1, &z, &z, 0, &[MixedNormSpec::new(2.0, 2.0)]).is_err());
        assert_eq!(sk_norm(&g, 0.1, &z, &z, 0, &two).unwrap(), 0.0);
    }

    #[test]
    fn zero_data_ratio_is_zero() {
        let g = Grid::cube(2, 16, 2.0 * PI).unwrap();
        let z = ScalarField::zeros(&g);
        let r = strichartz_check(1, &z, &z, None, 1.0, 5, &default_pairs(2)).unwrap();
        assert_eq!(r.ratio, 0.0);
    }

    /// `φ = cos(ωt) cos(8x)` sampled so that `ωt = π/2` is hit.
    #[test]
    fn single_mode_closed_form() {
        let g = Grid::cube(2, 64, 2.0 * PI).unwrap();
        let k = 3;
        let omega = 8.0;
        let phi0 = ScalarField::from_fn(&g, |x| (omega * x[0]).cos());
        let phi1 = ScalarField::zeros(&g);
        let t_end = PI / omega;
        let samples = 9;
        let pairs = default_pairs(2);
        let got = strichartz_check(k, &phi0, &phi1, None, t_end, samples, &pairs).unwrap();
        // Oracle: L^∞_t of |cos(ωt)| and ω|sin(ωt)| on the samples is 1 and ω.
        let vol = 4.0 * PI * PI;
        let l2 = (vol / 2.0).sqrt();
        let lambda: f64 = 8.0;
        let a = lambda.powf(2.0 / 2.0 - 1.0) * (l2 + omega * l2 / lambda);
        let b = lambda.powf(-1.0) * (1.0 + omega / lambda);
        let sk = a.max(b);
        let data = omega.powf(0.0) * l2;
        assert!((got.sk - sk).abs() < 1e-10 * sk, "{} {}", got.sk, sk);
        assert!((got.ratio - sk / data).abs() < 1e-10);
    }

    #[test]
    fn forcing_is_exact() {
        let g = Grid::cube(1, 32, 2.0 * PI).unwrap();
        let m = 4.0;
        let f = ScalarField::from_fn(&g, |x| (m * x[0]).sin());
        let z = ScalarField::zeros(&g);
        let times = [0.0, 0.3, 0.7];
        let (phi, phi_t) = free_wave(&z, &z, Some(&f), &times).unwrap();
        for (i, &t) in times.iter().enumerate() {
            for p in 0..g.len() {
                let x = g.coordinate(p, 0);
                let want = -(1.0 - (m * t).cos()) / (m * m) * (m * x).sin();
                let want_t = -(m * t).sin() / m * (m * x).sin();
                assert!((phi[i][p] - want).abs() < 1e-13);
                assert!((phi_t[i][p] - want_t).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn misbanded_input_rejected() {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let phi0 = ScalarField::from_fn(&g, |x| x[0].cos());
        let z = ScalarField::zeros(&g);
        assert!(strichartz_check(3, &phi0, &z, None, 1.0, 4, &default_pairs(2)).is_err());
    }

    #[test]
    fn commutator_edge_cases() {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let c = ScalarField::constant(&g, 2.0);
        let h = ScalarField::from_fn(&g, |x| (x[0] + 2.0 * x[1]).sin() + x[1].cos());
        let two = Exponent(2.0);
        let inf = Exponent::INF;
        assert_eq!(commutator_check(&c, &h, two, inf, two).unwrap(), 0.0);
        assert_eq!(commutator_check(&h, &ScalarField::zeros(&g), two, inf, two).unwrap(), 0.0);
        assert!(commutator_check(&h, &h, two, two, two).is_err());
        let r = commutator_check(&h, &h, two, inf, two).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }
}
