use super::{mi, PotentialChain};
use crate::error::{LabError, Result};
use crate::geometry::invert_small;
use crate::grid::Grid;
use crate::wavemap::FrameField;

/// Determinant floor below which `U` counts as singular.
pub const SINGULAR_U_TOL: f64 = 1e-8;

/// `U = I + Σ U_k` with `U_k = Δ̃_k U_{<k}` on one slice.
#[derive(Debug, Clone)]
pub struct RenormChain {
    pub grid: Grid,
    pub frame_dim: usize,
    /// Bands actually used, ascending.
    pub bands: Vec<i32>,
    pub u_k: Vec<Vec<Vec<f64>>>,
    pub u: Vec<Vec<f64>>,
    pub u_inv: Vec<Vec<f64>>,
    /// `du[(a * N + b) * slots + μ]`.
    pub du: Vec<Vec<f64>>,
    /// `∂Δ̃` restricted to the used bands, laid out like `du`.
    pub d_delta: Vec<Vec<f64>>,
    /// Max over points and steps of the identity-ledger residual.
    pub ident_defect: f64,
    pub inverse_defect: f64,
    /// Pointwise Frobenius magnitudes.
    pub orthogonality: Vec<f64>,
    pub orthogonality_grad: Vec<f64>,
    pub gauge: Vec<f64>,
}

impl RenormChain {
    pub fn slots(&self) -> usize {
        self.grid.dim() + 1
    }
}

fn mul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

fn tmul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[k * n + i] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

fn det(n: usize, m: &[f64]) -> f64 {
    nalgebra::DMatrix::from_row_slice(n, n, m).determinant()
}

/// Runs the recursion over the top `depth` bands of `pot`.
pub fn build_u(pot: &PotentialChain, depth: usize) -> Result<RenormChain> {
    let nb = pot.bands.len();
    if depth == 0 || depth > nb {
        return Err(LabError::InvalidInput(format!(
            "chain depth {depth} outside 1..={nb}"
        )));
    }
    let floor = nb - depth;
    let grid = &pot.grid;
    let n = pot.frame_dim;
    let nn = n * n;
    let slots = pot.slots();
    let len = grid.len();
    let used: Vec<usize> = (floor..nb).collect();

    let mut u_k = vec![vec![vec![0.0; len]; nn]; depth];
    let mut u = vec![vec![0.0; len]; nn];
    let mut u_inv = vec![vec![0.0; len]; nn];
    let mut du = vec![vec![0.0; len]; nn * slots];
    let mut d_delta = vec![vec![0.0; len]; nn * slots];
    let mut orthogonality = vec![0.0; len];
    let mut orthogonality_grad = vec![0.0; len];
    let mut gauge = vec![0.0; len];
    let mut ident_defect = 0.0f64;
    let mut inverse_defect = 0.0f64;

    let mut cur = vec![0.0; nn];
    let mut dcur = vec![0.0; nn * slots];
    let mut dk = vec![0.0; nn];
    let mut dkd = vec![0.0; nn];
    let mut step = vec![0.0; nn];
    let mut tmp = vec![0.0; nn];
    let mut ledger = vec![0.0; nn];
    let mut gram = vec![0.0; nn];
    let mut inv = vec![0.0; nn];

    for p in 0..len {
        cur.iter_mut().for_each(|v| *v = 0.0);
        for a in 0..n {
            cur[mi(n, a, a)] = 1.0;
        }
        dcur.iter_mut().for_each(|v| *v = 0.0);
        ledger.iter_mut().for_each(|v| *v = 0.0);
        for (slot, &b) in used.iter().enumerate() {
            for ab in 0..nn {
                dk[ab] = pot.delta_k[b][ab][p];
            }
            mul(n, &dk, &cur, &mut step);
            // ∂U_k = ∂Δ̃_k U_{<k} + Δ̃_k ∂U_{<k}.
            let mut dstep = vec![0.0; nn * slots];
            for mu in 0..slots {
                for ab in 0..nn {
                    dkd[ab] = pot.delta_k_d[b][ab * slots + mu][p];
                    d_delta[ab * slots + mu][p] += dkd[ab];
                }
                mul(n, &dkd, &cur, &mut tmp);
                let dprev: Vec<f64> = (0..nn).map(|ab| dcur[ab * slots + mu]).collect();
                let mut tmp2 = vec![0.0; nn];
                mul(n, &dk, &dprev, &mut tmp2);
                for ab in 0..nn {
                    dstep[ab * slots + mu] = tmp[ab] + tmp2[ab];
                }
            }
            tmul(n, &step, &step, &mut tmp);
            for ab in 0..nn {
                ledger[ab] += tmp[ab];
                cur[ab] += step[ab];
                u_k[slot][ab][p] = step[ab];
            }
            for (d, s) in dcur.iter_mut().zip(&dstep) {
                *d += s;
            }
            tmul(n, &cur, &cur, &mut gram);
            let mut r = 0.0f64;
            for a in 0..n {
                for c in 0..n {
                    let id = if a == c { 1.0 } else { 0.0 };
                    r = r.max((gram[mi(n, a, c)] - id - ledger[mi(n, a, c)]).abs());
                }
            }
            ident_defect = ident_defect.max(r);
        }
        let dt = det(n, &cur);
        if dt.abs() < SINGULAR_U_TOL || !dt.is_finite() {
            return Err(LabError::Singular {
                det: dt,
                threshold: SINGULAR_U_TOL,
            });
        }
        invert_small(&cur, n, &mut inv)?;
        mul(n, &cur, &inv, &mut tmp);
        for a in 0..n {
            for c in 0..n {
                let id = if a == c { 1.0 } else { 0.0 };
                inverse_defect = inverse_defect.max((tmp[mi(n, a, c)] - id).abs());
            }
        }
        tmul(n, &cur, &cur, &mut gram);
        let mut o = 0.0;
        for a in 0..n {
            for c in 0..n {
                let id = if a == c { 1.0 } else { 0.0 };
                o += (gram[mi(n, a, c)] - id).powi(2);
            }
        }
        orthogonality[p] = o.sqrt();
        let mut og = 0.0;
        let mut gd = 0.0;
        let mut dmu = vec![0.0; nn];
        let mut dd = vec![0.0; nn];
        for mu in 0..slots {
            for ab in 0..nn {
                dmu[ab] = dcur[ab * slots + mu];
                dd[ab] = d_delta[ab * slots + mu][p];
            }
            // ∂(UᵗU) = ∂Uᵗ U + Uᵗ ∂U.
            tmul(n, &dmu, &cur, &mut tmp);
            tmul(n, &cur, &dmu, &mut gram);
            og += tmp.iter().zip(&gram).map(|(x, y)| (x + y).powi(2)).sum::<f64>();
            mul(n, &dd, &cur, &mut tmp);
            gd += dmu.iter().zip(&tmp).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
        }
        orthogonality_grad[p] = og.sqrt();
        gauge[p] = gd.sqrt();
        for ab in 0..nn {
            u[ab][p] = cur[ab];
            u_inv[ab][p] = inv[ab];
            for mu in 0..slots {
                du[ab * slots + mu][p] = dcur[ab * slots + mu];
            }
        }
    }
    Ok(RenormChain {
        grid: grid.clone(),
        frame_dim: n,
        bands: used.iter().map(|&b| pot.bands[b]).collect(),
        u_k,
        u,
        u_inv,
        du,
        d_delta,
        ident_defect,
        inverse_defect,
        orthogonality,
        orthogonality_grad,
        gauge,
    })
}

/// Pointwise `M^a_b F^b_α` for a matrix field `m[a * N + b]`.
pub(crate) fn apply_matrix<S: AsRef<[f64]>>(m: &[S], field: &FrameField) -> FrameField {
    let n = field.frame_dim;
    let slots = field.slots();
    let mut out = FrameField::zeros(&field.grid, n);
    for a in 0..n {
        for b in 0..n {
            let mab = m[mi(n, a, b)].as_ref();
            for al in 0..slots {
                let src = &field.comps[b * slots + al];
                let dst = &mut out.comps[a * slots + al];
                for ((d, x), y) in dst.iter_mut().zip(mab).zip(src) {
                    *d += x * y;
                }
            }
        }
    }
    out
}

/// `W = U⁻¹Ψ`.
pub fn gauge_transform(psi: &FrameField, chain: &RenormChain) -> Result<FrameField> {
    if psi.frame_dim != chain.frame_dim || psi.grid.len() != chain.grid.len() {
        return Err(LabError::InvalidInput("field and chain do not match".into()));
    }
    Ok(apply_matrix(&chain.u_inv, psi))
}
