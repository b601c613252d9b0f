use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Projection, ScalarField};

/// `‖P_k f‖_{Ḣ^s}`, exact in Fourier space.
pub fn band_sobolev_norm(f: &ScalarField, k: i32, s: f64) -> Result<f64> {
    let grid = f.grid();
    grid.validate(Projection::Band(k))?;
    let spec = f.fft();
    Ok(weighted_band(grid, &spec, Projection::Band(k), s))
}

fn weighted_band(
    grid: &crate::grid::Grid,
    spec: &[rustfft::num_complex::Complex64],
    proj: Projection,
    s: f64,
) -> f64 {
    let kappa = grid.kappa();
    let sum: f64 = spec
        .iter()
        .zip(grid.radius())
        .filter(|(_, &r)| r > 0.0)
        .map(|(c, &r)| {
            let m = grid.symbol(proj, r);
            (r * kappa).powf(2.0 * s) * m * m * c.norm_sqr()
        })
        .sum();
    (grid.volume() * sum).sqrt() / grid.len() as f64
}

/// `‖P_k f‖_{Ḣ^s}` for every `k = k_min ..= k_max`, one transform.
pub fn band_norms_all(f: &ScalarField, s: f64) -> Vec<f64> {
    let grid = f.grid();
    let spec = f.fft();
    (grid.k_min()..=grid.k_max())
        .map(|k| weighted_band(grid, &spec, Projection::Band(k), s))
        .collect()
}

/// `c_k = Σ_{k'} 2^{−σ|k−k'|} b_{k'}` over the given index range.
pub fn canonical_envelope(bands: &[f64], sigma: f64) -> Vec<f64> {
    (0..bands.len())
        .map(|k| {
            bands
                .iter()
                .enumerate()
                .map(|(j, b)| 2f64.powf(-sigma * (k as f64 - j as f64).abs()) * b)
                .sum()
        })
        .collect()
}

/// `Σ_{j∈ℤ} 2^{−σ|j|}`, the constant in `‖c‖_{ℓ²} ≤ C‖f‖_{Ḣ^s}`.
pub fn envelope_constant(sigma: f64) -> f64 {
    let q = 2f64.powf(-sigma);
    (1.0 + q) / (1.0 - q)
}

/// A frequency envelope over the resolvable range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub sigma: f64,
    pub k_min: i32,
    pub c: Vec<f64>,
}

impl Envelope {
    pub fn new(sigma: f64, k_min: i32, c: Vec<f64>) -> Result<Self> {
        if !(sigma > 0.0 && sigma < 0.5) {
            return Err(LabError::InvalidInput(format!("sigma {sigma} outside (0, 1/2)")));
        }
        Ok(Self { sigma, k_min, c })
    }

    pub fn l2_norm(&self) -> f64 {
        self.c.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn get(&self, k: i32) -> Option<f64> {
        usize::try_from(k - self.k_min).ok().and_then(|i| self.c.get(i).copied())
    }

    /// Smallest `K` with `c_k ≤ K·2^{σ|k−k'|}c_{k'}` over all pairs.
    pub fn slack_constant(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, &ci) in self.c.iter().enumerate() {
            for (j, &cj) in self.c.iter().enumerate() {
                if ci == 0.0 {
                    continue;
                }
                let bound = 2f64.powf(self.sigma * (i as f64 - j as f64).abs()) * cj;
                worst = worst.max(if bound == 0.0 { f64::INFINITY } else { ci / bound });
            }
        }
        worst
    }

    /// For `n ≥ 5` the slack must also satisfy `σ < (n−4)/4`.
    pub fn dimension_flag(&self, n: usize) -> bool {
        n < 5 || self.sigma < (n as f64 - 4.0) / 4.0
    }
}

/// Canonical envelope of a field's `Ḣ^s` band norms.
pub fn make_envelope(f: &ScalarField, s: f64, sigma: f64) -> Result<Envelope> {
    let bands = band_norms_all(f, s);
    Envelope::new(sigma, f.grid().k_min(), canonical_envelope(&bands, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use std::f64::consts::PI;

    #[test]
    fn zero_field() {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let f = ScalarField::zeros(&g);
        assert_eq!(band_sobolev_norm(&f, 1, 1.0).unwrap(), 0.0);
        let e = make_envelope(&f, 1.0, 0.25).unwrap();
        assert!(e.c.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn single_mode_weight() {
        // unit L² mass: ‖a cos(2x)‖² = a² (2π)² / 2
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let a = (2.0f64).sqrt() / (2.0 * PI);
        let f = ScalarField::from_fn(&g, |x| a * (2.0 * x[0]).cos());
        assert!((f.lp_norm(2.0) - 1.0).abs() < 1e-13);
        assert!((band_sobolev_norm(&f, 1, 1.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_band_envelope_is_geometric() {
        let g = Grid::cube(2, 64, 2.0 * PI).unwrap();
        let f = ScalarField::from_fn(&g, |x| (4.0 * x[1]).sin());
        let b = band_sobolev_norm(&f, 2, 0.5).unwrap();
        let e = make_envelope(&f, 0.5, 0.3).unwrap();
        for k in 0..=3 {
            let expect = 2f64.powf(-0.3 * (k as f64 - 2.0).abs()) * b;
            assert!((e.get(k).unwrap() - expect).abs() < 1e-13 * b);
        }
    }

    #[test]
    fn sigma_validated() {
        assert!(Envelope::new(0.5, 0, vec![]).is_err());
        assert!(Envelope::new(0.0, 0, vec![]).is_err());
        let e = Envelope::new(0.3, 0, vec![1.0]).unwrap();
        assert!(!e.dimension_flag(5));
        assert!(e.dimension_flag(6));
    }
}
