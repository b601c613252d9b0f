use super::{masked, mi, spectra};
use crate::error::{LabError, Result};
use crate::geometry::FrameData;
use crate::grid::{Grid, Projection};
use crate::wavemap::{gradients, FrameField};

/// Largest relative antisymmetry defect tolerated in `R`.
pub const R_ANTISYMMETRY_TOL: f64 = 1e-13;

/// `∂_tΦ` on a solution slice, from the curl and divergence identities:
/// `∂_tφ^a_i = ∂_iφ^a_0 + C^a_bc φ^b_i φ^c_0`,
/// `∂_tφ^a_0 = ∂_iφ^a_i + Γ^a_bc φ^b_β φ^c_γ m^{βγ}`.
pub fn frame_time_derivative(phi: &FrameField, frame: &FrameData) -> Result<FrameField> {
    let grid = &phi.grid;
    let nf = frame.dim();
    let slots = phi.slots();
    let grad = gradients(grid, &phi.comps)?;
    let mut out = FrameField::zeros(grid, nf);
    for p in 0..grid.len() {
        let v = |b: usize, mu: usize| phi.comps[b * slots + mu][p];
        for a in 0..nf {
            for i in 1..slots {
                let mut s = grad[a * slots][i - 1][p];
                for b in 0..nf {
                    for c in 0..nf {
                        s += frame.c(a, b, c) * v(b, i) * v(c, 0);
                    }
                }
                out.comps[a * slots + i][p] = s;
            }
            let mut s = 0.0;
            for i in 1..slots {
                s += grad[a * slots + i][i - 1][p];
            }
            for b in 0..nf {
                for c in 0..nf {
                    let g = frame.gamma(a, b, c);
                    if g != 0.0 {
                        let mut q = -v(b, 0) * v(c, 0);
                        for i in 1..slots {
                            q += v(b, i) * v(c, i);
                        }
                        s += g * q;
                    }
                }
            }
            out.comps[a * slots][p] = s;
        }
    }
    Ok(out)
}

/// `R^a_{bμ} = Γ^a_cb φ^c_μ` on one slice, with its low-pass part and the
/// time derivative of the low-pass part.
#[derive(Debug, Clone)]
pub struct ConnectionField {
    pub grid: Grid,
    pub frame_dim: usize,
    pub k_cut: i32,
    /// `r[(a * N + b) * slots + μ][p]`.
    pub r: Vec<Vec<f64>>,
    pub r_tilde: Vec<Vec<f64>>,
    pub r_tilde_t: Vec<Vec<f64>>,
    /// Relative antisymmetry defect of `R`.
    pub antisymmetry: f64,
}

impl ConnectionField {
    pub fn slots(&self) -> usize {
        self.grid.dim() + 1
    }

    #[inline]
    pub fn idx(&self, a: usize, b: usize, mu: usize) -> usize {
        mi(self.frame_dim, a, b) * self.slots() + mu
    }
}

fn contract(frame: &FrameData, phi: &FrameField) -> Vec<Vec<f64>> {
    let nf = frame.dim();
    let slots = phi.slots();
    let len = phi.grid.len();
    let mut r = vec![vec![0.0; len]; nf * nf * slots];
    for a in 0..nf {
        for b in 0..nf {
            for mu in 0..slots {
                let out = &mut r[mi(nf, a, b) * slots + mu];
                for c in 0..nf {
                    let g = frame.gamma(a, c, b);
                    if g != 0.0 {
                        for (o, v) in out.iter_mut().zip(&phi.comps[c * slots + mu]) {
                            *o += g * v;
                        }
                    }
                }
            }
        }
    }
    r
}

fn antisymmetry_defect(nf: usize, slots: usize, r: &[Vec<f64>]) -> f64 {
    let scale = super::max_abs(r);
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for a in 0..nf {
        for b in 0..nf {
            for mu in 0..slots {
                let x = &r[mi(nf, a, b) * slots + mu];
                let y = &r[mi(nf, b, a) * slots + mu];
                for (u, v) in x.iter().zip(y) {
                    worst = worst.max((u + v).abs());
                }
            }
        }
    }
    worst / scale
}

/// Builds `R`, `R̃ = P_{≤k_cut}R` and `∂_tR̃`.
///
/// `phi_t` defaults to [`frame_time_derivative`].
pub fn build_r(
    phi: &FrameField,
    phi_t: Option<&FrameField>,
    frame: &FrameData,
    k_cut: i32,
) -> Result<ConnectionField> {
    if frame.dim() != phi.frame_dim {
        return Err(LabError::InvalidInput("frame and field dimensions differ".into()));
    }
    let grid = &phi.grid;
    let low = grid.multiplier(Projection::Le(k_cut))?;
    let owned;
    let phi_t = match phi_t {
        Some(f) => f,
        None => {
            owned = frame_time_derivative(phi, frame)?;
            &owned
        }
    };
    let nf = frame.dim();
    let slots = phi.slots();
    let r = contract(frame, phi);
    let antisymmetry = antisymmetry_defect(nf, slots, &r);
    if antisymmetry > R_ANTISYMMETRY_TOL {
        return Err(LabError::Antisymmetry {
            defect: antisymmetry,
            tolerance: R_ANTISYMMETRY_TOL,
        });
    }
    let lowpass = |fields: &[Vec<f64>]| -> Vec<Vec<f64>> {
        spectra(grid, fields)
            .iter()
            .map(|s| super::real(grid, masked(s, &low)))
            .collect()
    };
    let r_tilde = lowpass(&r);
    let r_tilde_t = lowpass(&contract(frame, phi_t));
    Ok(ConnectionField {
        grid: grid.clone(),
        frame_dim: nf,
        k_cut,
        r,
        r_tilde,
        r_tilde_t,
        antisymmetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TargetInstance;
    use crate::wavemap::{evolve, make_initial_data, EvolveOptions, InitialDataSpec};
    use std::f64::consts::PI;

    #[test]
    fn zero_and_flat_give_zero() {
        let g = Grid::cube(2, 16, 2.0 * PI).unwrap();
        let su2 = TargetInstance::su2();
        let z = FrameField::zeros(&g, 3);
        let c = build_r(&z, None, su2.frame(), 0).unwrap();
        assert!(super::super::max_abs(&c.r) == 0.0);
        let mut f = FrameField::zeros(&g, 3);
        f.comps.iter_mut().flatten().for_each(|v| *v = 0.3);
        let flat = FrameData::flat(3);
        let c = build_r(&f, None, &flat, 0).unwrap();
        assert!(super::super::max_abs(&c.r) == 0.0);
    }

    #[test]
    fn spot_value_matches_index_loop() {
        let g = Grid::cube(1, 8, 2.0 * PI).unwrap();
        let frame = TargetInstance::su2().frame().clone();
        let mut f = FrameField::zeros(&g, 3);
        for (i, c) in f.comps.iter_mut().enumerate() {
            c[3] = 0.1 * (i as f64 + 1.0).sqrt();
        }
        let c = build_r(&f, None, &frame, 0).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                for mu in 0..2 {
                    let mut want = 0.0;
                    for cc in 0..3 {
                        want += frame.gamma(a, cc, b) * f.comps[cc * 2 + mu][3];
                    }
                    assert!((c.r[c.idx(a, b, mu)][3] - want).abs() < 1e-14);
                }
            }
        }
    }

    /// The identity-based `∂_tΦ` agrees with a time stencil on a solution.
    #[test]
    fn identity_time_derivative_matches_stencil() {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let t = TargetInstance::su2();
        let d = make_initial_data(&t, &g, &InitialDataSpec::default(), 0.05, 2).unwrap();
        let dt = 0.02;
        let ev = evolve(&d.state, &EvolveOptions::new(dt, 4)).unwrap();
        let tr = &ev.trajectory;
        let fd = crate::wavemap::time_derivative(tr, crate::stencil::TimeStencil::Fourth, 2);
        let id = frame_time_derivative(&tr.slices[2], t.frame()).unwrap();
        let scale = super::super::max_abs(&fd);
        let err = fd
            .iter()
            .flatten()
            .zip(id.comps.iter().flatten())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-5 * scale, "{err} vs {scale}");
    }
}
