use serde::{Deserialize, Serialize};

use super::{FrameField, Trajectory};
use crate::error::{LabError, Result};
use crate::geometry::FrameData;
use crate::grid::{spectral_derivative_in_place, Grid};
use crate::stencil::{apply, TimeStencil};

/// Max and space-time `L²` size of a residual over the interior slices.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualNorms {
    pub max: f64,
    pub l2: f64,
}

impl ResidualNorms {
    fn accumulate(&mut self, values: &[f64], weight: f64) {
        for v in values {
            self.max = self.max.max(v.abs());
            self.l2 += weight * v * v;
        }
    }

    fn finish(mut self) -> Self {
        self.l2 = self.l2.sqrt();
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DivCurlResidual {
    /// All `(α, β)` pairs of the curl identity.
    pub curl: ResidualNorms,
    /// The divergence identity, which holds only on solutions.
    pub divergence: ResidualNorms,
}

fn check_frame(frame: &FrameData, phi: &FrameField) -> Result<()> {
    if frame.dim() != phi.frame_dim {
        return Err(LabError::InvalidInput(format!(
            "frame of dimension {} applied to {} components",
            frame.dim(),
            phi.frame_dim
        )));
    }
    Ok(())
}

/// `E^a_α` at one point; `phi` and `out` are laid out `a * slots + α`.
pub fn cubic_term_pointwise(frame: &FrameData, slots: usize, phi: &[f64], out: &mut [f64]) {
    let nf = frame.dim();
    let metric = |mu: usize| if mu == 0 { -1.0 } else { 1.0 };
    // S^{nc} = m^{μν} φ^n_μ φ^c_ν
    let mut s = vec![0.0; nf * nf];
    for i in 0..nf {
        for j in 0..nf {
            s[i * nf + j] = (0..slots)
                .map(|mu| metric(mu) * phi[i * slots + mu] * phi[j * slots + mu])
                .sum();
        }
    }
    let mut g = vec![0.0; nf];
    for (c, gc) in g.iter_mut().enumerate() {
        for m in 0..nf {
            for n in 0..nf {
                *gc += frame.gamma(c, m, n) * s[m * nf + n];
            }
        }
    }
    // coefficient matrix K^a_m with E^a_α = K^a_m φ^m_α
    let mut kmat = vec![0.0; nf * nf];
    for a in 0..nf {
        for m in 0..nf {
            let mut acc = 0.0;
            for b in 0..nf {
                for c in 0..nf {
                    let gam = frame.gamma(a, b, c);
                    if gam != 0.0 {
                        for n in 0..nf {
                            acc += gam
                                * (frame.c(b, m, n) * s[n * nf + c] + frame.c(c, m, n) * s[n * nf + b]);
                        }
                    }
                }
                acc -= frame.c(a, m, b) * g[b];
            }
            kmat[a * nf + m] = acc;
        }
    }
    for a in 0..nf {
        for alpha in 0..slots {
            out[a * slots + alpha] = (0..nf).map(|m| kmat[a * nf + m] * phi[m * slots + alpha]).sum();
        }
    }
}

/// The cubic term of the frame-component wave equation, pointwise.
pub fn cubic_term_e(phi: &FrameField, frame: &FrameData) -> Result<FrameField> {
    check_frame(frame, phi)?;
    let mut out = FrameField::zeros(&phi.grid, phi.frame_dim);
    let total = phi.comps.len();
    let mut a = vec![0.0; total];
    let mut e = vec![0.0; total];
    for p in 0..phi.grid.len() {
        phi.at(p, &mut a);
        cubic_term_pointwise(frame, phi.slots(), &a, &mut e);
        for (c, v) in out.comps.iter_mut().zip(&e) {
            c[p] = *v;
        }
    }
    Ok(out)
}

/// Spectral gradient of every component: `grad[comp][axis][p]`.
pub(crate) fn gradients(grid: &Grid, comps: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>> {
    comps
        .iter()
        .map(|c| {
            let spec = grid.fft_forward(c)?;
            (0..grid.dim())
                .map(|axis| {
                    let mut s = spec.clone();
                    spectral_derivative_in_place(grid, &mut s, axis);
                    grid.fft_inverse(s)
                })
                .collect()
        })
        .collect()
}

pub(crate) fn laplacians(grid: &Grid, comps: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let kappa = grid.kappa();
    comps
        .iter()
        .map(|c| {
            let mut spec = grid.fft_forward(c)?;
            for (s, r) in spec.iter_mut().zip(grid.radius()) {
                *s *= -(r * kappa) * (r * kappa);
            }
            grid.fft_inverse(spec)
        })
        .collect()
}

/// Time derivative of every component at slice `i`.
pub(crate) fn time_derivative(traj: &Trajectory, stencil: TimeStencil, i: usize) -> Vec<Vec<f64>> {
    let ncomp = traj.slices[i].comps.len();
    (0..ncomp)
        .map(|c| apply(stencil.first(), i, 1.0 / traj.dt, |j| &traj.slices[j].comps[c]))
        .collect()
}

pub(crate) fn second_time_derivative(
    traj: &Trajectory,
    stencil: TimeStencil,
    i: usize,
) -> Vec<Vec<f64>> {
    let ncomp = traj.slices[i].comps.len();
    (0..ncomp)
        .map(|c| {
            apply(stencil.second(), i, 1.0 / (traj.dt * traj.dt), |j| {
                &traj.slices[j].comps[c]
            })
        })
        .collect()
}

/// Residuals of the curl identity `∂_βφ^a_α − ∂_αφ^a_β = C^a_bc φ^b_α φ^c_β`
/// and of the divergence identity `∂^αφ^a_α + Γ^a_bc φ^b_β φ^c_γ m^{βγ} = 0`.
pub fn divcurl_residual(traj: &Trajectory, stencil: TimeStencil) -> Result<DivCurlResidual> {
    let range = traj.require(stencil)?;
    let grid = &traj.grid;
    let frame = &traj.frame;
    let nf = frame.dim();
    let slots = grid.dim() + 1;
    let weight = traj.dt * grid.cell_volume();
    let mut curl = ResidualNorms::default();
    let mut div = ResidualNorms::default();
    let mut buf = vec![0.0; grid.len()];
    for i in range {
        let phi = &traj.slices[i];
        check_frame(frame, phi)?;
        let grad = gradients(grid, &phi.comps)?;
        let dt = time_derivative(traj, stencil, i);
        // ∂_β of component (a, α)
        let d = |a: usize, alpha: usize, beta: usize, p: usize| -> f64 {
            let c = a * slots + alpha;
            if beta == 0 {
                dt[c][p]
            } else {
                grad[c][beta - 1][p]
            }
        };
        for a in 0..nf {
            for alpha in 0..slots {
                for beta in (alpha + 1)..slots {
                    for (p, r) in buf.iter_mut().enumerate() {
                        let mut quad = 0.0;
                        for b in 0..nf {
                            for c in 0..nf {
                                quad += frame.c(a, b, c)
                                    * phi.comps[b * slots + alpha][p]
                                    * phi.comps[c * slots + beta][p];
                            }
                        }
                        *r = d(a, alpha, beta, p) - d(a, beta, alpha, p) - quad;
                    }
                    curl.accumulate(&buf, weight);
                }
            }
            for (p, r) in buf.iter_mut().enumerate() {
                let mut v = -d(a, 0, 0, p);
                for j in 1..slots {
                    v += d(a, j, j, p);
                }
                for b in 0..nf {
                    for c in 0..nf {
                        let gam = frame.gamma(a, b, c);
                        if gam == 0.0 {
                            continue;
                        }
                        let mut s = -phi.comps[b * slots][p] * phi.comps[c * slots][p];
                        for j in 1..slots {
                            s += phi.comps[b * slots + j][p] * phi.comps[c * slots + j][p];
                        }
                        v += gam * s;
                    }
                }
                *r = v;
            }
            div.accumulate(&buf, weight);
        }
    }
    Ok(DivCurlResidual {
        curl: curl.finish(),
        divergence: div.finish(),
    })
}

/// Size of `□Φ + 2R_μ·∂^μΦ − E` together with the size of `□Φ` itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveIdentityResidual {
    pub residual: ResidualNorms,
    pub box_phi: ResidualNorms,
}

/// Residual of the frame-component wave equation on a trajectory.
pub fn wave_identity_residual(traj: &Trajectory, stencil: TimeStencil) -> Result<WaveIdentityResidual> {
    let range = traj.require(stencil)?;
    let grid = &traj.grid;
    let frame = &traj.frame;
    let nf = frame.dim();
    let slots = grid.dim() + 1;
    let weight = traj.dt * grid.cell_volume();
    let mut res = ResidualNorms::default();
    let mut boxn = ResidualNorms::default();
    let total = nf * slots;
    let mut point = vec![0.0; total];
    let mut e = vec![0.0; total];
    let mut r_buf = vec![0.0; total * nf];
    let mut box_vals = vec![0.0; total];
    let mut res_vals = vec![0.0; total];
    for i in range {
        let phi = &traj.slices[i];
        check_frame(frame, phi)?;
        let grad = gradients(grid, &phi.comps)?;
        let lap = laplacians(grid, &phi.comps)?;
        let dt = time_derivative(traj, stencil, i);
        let dtt = second_time_derivative(traj, stencil, i);
        for p in 0..grid.len() {
            phi.at(p, &mut point);
            cubic_term_pointwise(frame, slots, &point, &mut e);
            connection_pointwise(frame, slots, &point, &mut r_buf);
            for a in 0..nf {
                for alpha in 0..slots {
                    let c = a * slots + alpha;
                    let bx = -dtt[c][p] + lap[c][p];
                    // 2 R^a_{bμ} m^{μν} ∂_ν φ^b_α
                    let mut drive = 0.0;
                    for b in 0..nf {
                        let cb = b * slots + alpha;
                        drive -= r_buf[(a * nf + b) * slots] * dt[cb][p];
                        for j in 1..slots {
                            drive += r_buf[(a * nf + b) * slots + j] * grad[cb][j - 1][p];
                        }
                    }
                    box_vals[c] = bx;
                    res_vals[c] = bx + 2.0 * drive - e[c];
                }
            }
            res.accumulate(&res_vals, weight);
            boxn.accumulate(&box_vals, weight);
        }
    }
    Ok(WaveIdentityResidual {
        residual: res.finish(),
        box_phi: boxn.finish(),
    })
}

/// `R^a_{bμ} = Γ^a_cb φ^c_μ` at one point, laid out `(a * N + b) * slots + μ`.
pub fn connection_pointwise(frame: &FrameData, slots: usize, phi: &[f64], out: &mut [f64]) {
    let nf = frame.dim();
    for a in 0..nf {
        for b in 0..nf {
            for mu in 0..slots {
                out[(a * nf + b) * slots + mu] =
                    (0..nf).map(|c| frame.gamma(a, c, b) * phi[c * slots + mu]).sum();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TargetInstance;

    /// Literal six-fold loop over `(b, c, m, n, μ, ν)`.
    fn naive_e(frame: &FrameData, slots: usize, phi: &[f64], a: usize, alpha: usize) -> f64 {
        let nf = frame.dim();
        let m = |mu: usize, nu: usize| {
            if mu != nu {
                0.0
            } else if mu == 0 {
                -1.0
            } else {
                1.0
            }
        };
        let f = |x: usize, mu: usize| phi[x * slots + mu];
        let mut total = 0.0;
        for b in 0..nf {
            for c in 0..nf {
                for mm in 0..nf {
                    for nn in 0..nf {
                        for mu in 0..slots {
                            for nu in 0..slots {
                                let w = m(mu, nu);
                                total += w
                                    * frame.gamma(a, b, c)
                                    * (frame.c(b, mm, nn) * f(mm, alpha) * f(nn, mu) * f(c, nu)
                                        + frame.c(c, mm, nn) * f(mm, alpha) * f(nn, nu) * f(b, mu));
                                total -= w
                                    * frame.c(a, b, c)
                                    * f(b, alpha)
                                    * frame.gamma(c, mm, nn)
                                    * f(mm, mu)
                                    * f(nn, nu);
                            }
                        }
                    }
                }
            }
        }
        total
    }

    #[test]
    fn cubic_matches_naive_loop() {
        let frame = TargetInstance::su2().frame().clone();
        let slots = 3;
        let phi: Vec<f64> = (0..9).map(|i| 0.1 * (i as f64 * 1.7).sin() + 0.05 * i as f64).collect();
        let mut e = vec![0.0; 9];
        cubic_term_pointwise(&frame, slots, &phi, &mut e);
        for a in 0..3 {
            for alpha in 0..slots {
                let want = naive_e(&frame, slots, &phi, a, alpha);
                assert!((e[a * slots + alpha] - want).abs() < 1e-14, "{a}{alpha}");
            }
        }
    }

    #[test]
    fn cubic_vanishes_on_flat_and_zero() {
        let flat = FrameData::flat(3);
        let phi = vec![0.3; 9];
        let mut e = vec![1.0; 9];
        cubic_term_pointwise(&flat, 3, &phi, &mut e);
        assert!(e.iter().all(|&x| x == 0.0));
        let su2 = TargetInstance::su2().frame().clone();
        cubic_term_pointwise(&su2, 3, &[0.0; 9], &mut e);
        assert!(e.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn connection_is_antisymmetric() {
        let frame = TargetInstance::su2().frame().clone();
        let phi: Vec<f64> = (0..12).map(|i| (i as f64).cos()).collect();
        let mut r = vec![0.0; 36];
        connection_pointwise(&frame, 4, &phi, &mut r);
        for a in 0..3 {
            for b in 0..3 {
                for mu in 0..4 {
                    assert_eq!(r[(a * 3 + b) * 4 + mu], -r[(b * 3 + a) * 4 + mu]);
                }
            }
        }
    }
}
