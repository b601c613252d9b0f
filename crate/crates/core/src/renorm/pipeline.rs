use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::apply_matrix;
use super::potential::chain_bands;
use super::{
    build_r, build_u, deriv, exterior_defect, frame_time_derivative, frobenius, gauge_transform,
    max_abs, mi, real, solve_potential,
};
use crate::error::{LabError, Result};
use crate::geometry::FrameData;
use crate::grid::{lp_norm, Grid, Projection};
use crate::norms::{time_norm, Exponent};
use crate::stencil::TimeStencil;
use crate::wavemap::{laplacians, FrameField, Trajectory};

/// Which potential drives the `U` recursion.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChainOrientation {
    /// `U_k = Δ̃_k U_{<k}`.
    AsWritten,
    /// `U_k = −Δ̃_k U_{<k}`, which cancels `R̃·∂Ψ` in `□W`.
    #[default]
    Renormalizing,
}

impl ChainOrientation {
    fn sign(self) -> f64 {
        match self {
            Self::AsWritten => 1.0,
            Self::Renormalizing => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormOptions {
    /// Low-pass cutoff; defaults to `max(k_min, k_max − 3)`.
    pub k_cut: Option<i32>,
    /// Number of chain bands counted down from the top; defaults to all.
    pub depth: Option<usize>,
    /// Band of `Ψ = P_{k_ref}Φ`; defaults to `k_max`.
    pub k_ref: Option<i32>,
    pub stencil: TimeStencil,
    pub orientation: ChainOrientation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOptions {
    pub k_cut: i32,
    pub depth: usize,
    pub k_ref: i32,
    pub chain_bands: Vec<i32>,
    pub stencil: TimeStencil,
    pub orientation: ChainOrientation,
}

impl RenormOptions {
    pub fn resolve(&self, grid: &Grid) -> Result<ResolvedOptions> {
        let k_cut = self
            .k_cut
            .unwrap_or_else(|| (grid.k_max() - 3).max(grid.k_min()));
        let bands = chain_bands(grid, k_cut)?;
        let depth = self.depth.unwrap_or(bands.len());
        if depth == 0 || depth > bands.len() {
            return Err(LabError::InvalidInput(format!(
                "chain depth {depth} outside 1..={}",
                bands.len()
            )));
        }
        let k_ref = self.k_ref.unwrap_or(grid.k_max());
        grid.validate(Projection::Band(k_ref))?;
        Ok(ResolvedOptions {
            k_cut,
            depth,
            k_ref,
            chain_bands: bands[bands.len() - depth..].to_vec(),
            stencil: self.stencil,
            orientation: self.orientation,
        })
    }
}

/// Per-band defect table, one row per chain band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRow {
    pub k: i32,
    /// `‖P_kR̃‖_{L¹L^∞}`.
    pub r_tilde: f64,
    /// `‖P_kR̄‖_{L¹L^∞}`.
    pub r_bar: f64,
    pub r_bar_sup: f64,
    pub f_l1: f64,
    pub f_sup: f64,
    pub delta_sup: f64,
    /// Observed `‖□Δ̃_k‖_{L²L^{n−1}}`.
    pub box_delta: f64,
    pub divergence: f64,
    pub r0_consistency: f64,
}

/// `L¹L²` norms of the pieces of the transformed equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Effectiveness {
    /// `R̃_μ∂^μΨ`.
    pub dangerous: f64,
    pub box_psi: f64,
    pub box_w: f64,
    /// `−2U⁻¹(∂_μU + ∂_μΔ̃U)∂^μW`.
    pub t1: f64,
    /// `−2U⁻¹∂_μΔ̃ ∂^μU W`.
    pub t2: f64,
    /// `−U⁻¹(□U)W`.
    pub t3: f64,
    /// `□W − T1 − T2 − T3`.
    pub remainder: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDefects {
    pub r_antisymmetry: f64,
    pub delta_antisymmetry: f64,
    pub ident: f64,
    pub inverse: f64,
    pub reconstruction: f64,
    pub divergence_gauge: f64,
    pub r0_consistency: f64,
    /// `max |∂_tΔ̃ (elliptic) − ∂_tΔ̃ (stencil)|`.
    pub dt_delta: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainNorms {
    /// `‖R̃‖_{L¹L^∞}`.
    pub r_tilde: f64,
    /// `‖R̄‖_{L¹L^∞}`.
    pub r_bar: f64,
    /// `‖UᵗU − I‖_{L^∞L^∞}`.
    pub orthogonality: f64,
    pub orthogonality_grad: f64,
    /// `‖∂U − ∂D·U‖_{L¹L^∞}` with `D` the chain potential.
    pub gauge: f64,
    pub du_sup: f64,
    /// `‖∂U‖_{L²L^{n−1}}`.
    pub du: f64,
    /// `‖□U‖_{L²L^{n−1}}`.
    pub box_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormReport {
    pub options: ResolvedOptions,
    pub slices: usize,
    pub dt: f64,
    pub algebra: AlgebraDefects,
    pub norms: ChainNorms,
    pub effectiveness: Effectiveness,
    pub bands: Vec<BandRow>,
}

impl RenormReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn band_csv(&self) -> String {
        let mut s = String::from(
            "k,r_tilde,r_bar,r_bar_sup,f_l1,f_sup,delta_sup,box_delta,divergence,r0_consistency\n",
        );
        for b in &self.bands {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                b.k,
                b.r_tilde,
                b.r_bar,
                b.r_bar_sup,
                b.f_l1,
                b.f_sup,
                b.delta_sup,
                b.box_delta,
                b.divergence,
                b.r0_consistency
            );
        }
        s
    }

    pub fn write_band_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.band_csv())?;
        Ok(())
    }
}

/// Matrix field times matrix field, pointwise.
fn matmul(n: usize, a: &[&[f64]], b: &[&[f64]]) -> Vec<Vec<f64>> {
    let len = a[0].len();
    let mut out = vec![vec![0.0; len]; n * n];
    for i in 0..n {
        for j in 0..n {
            let o = &mut out[mi(n, i, j)];
            for k in 0..n {
                for ((o, x), y) in o.iter_mut().zip(a[mi(n, i, k)]).zip(b[mi(n, k, j)]) {
                    *o += x * y;
                }
            }
        }
    }
    out
}

fn mu_part(m: &[Vec<f64>], nn: usize, slots: usize, mu: usize) -> Vec<&[f64]> {
    (0..nn).map(|ab| m[ab * slots + mu].as_slice()).collect()
}

fn metric(mu: usize) -> f64 {
    if mu == 0 {
        -1.0
    } else {
        1.0
    }
}

fn axpy(acc: &mut FrameField, c: f64, x: &FrameField) {
    for (a, b) in acc.comps.iter_mut().zip(&x.comps) {
        a.iter_mut().zip(b).for_each(|(u, v)| *u += c * v);
    }
}

/// Everything the stencils need from one slice.
struct Stored {
    u: Vec<Vec<f64>>,
    u_inv: Vec<Vec<f64>>,
    w: FrameField,
    psi: FrameField,
    delta_k: Vec<Vec<Vec<f64>>>,
    delta: Vec<Vec<f64>>,
    delta_t: Vec<Vec<f64>>,
    t12: (FrameField, FrameField),
}

#[derive(Default)]
struct Series {
    r_tilde: Vec<f64>,
    r_bar: Vec<f64>,
    orth: Vec<f64>,
    orth_grad: Vec<f64>,
    gauge: Vec<f64>,
    du_sup: Vec<f64>,
    du: Vec<f64>,
    dangerous: Vec<f64>,
    band_r_tilde: Vec<Vec<f64>>,
    band_r_bar: Vec<Vec<f64>>,
    band_f: Vec<Vec<f64>>,
    band_delta: Vec<Vec<f64>>,
    band_div: Vec<f64>,
    band_r0: Vec<f64>,
    // Interior slices only.
    box_u: Vec<f64>,
    box_psi: Vec<f64>,
    box_w: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    t3: Vec<f64>,
    remainder: Vec<f64>,
    band_box_delta: Vec<Vec<f64>>,
}

fn sup_frob<S: AsRef<[f64]>>(fields: &[S]) -> f64 {
    frobenius(fields).iter().fold(0.0, |m, v| m.max(*v))
}

fn lp_frob<S: AsRef<[f64]>>(grid: &Grid, fields: &[S], p: f64) -> f64 {
    lp_norm(&frobenius(fields), grid.cell_volume(), p)
}

struct Ctx<'a> {
    frame: &'a FrameData,
    grid: &'a Grid,
    opts: &'a ResolvedOptions,
    psi_mult: Vec<f64>,
    space_exp: f64,
}

fn slice_local(
    ctx: &Ctx,
    phi: &FrameField,
    alg: &mut AlgebraDefects,
    ser: &mut Series,
) -> Result<Stored> {
    let grid = ctx.grid;
    let opts = ctx.opts;
    let n = ctx.frame.dim();
    let nn = n * n;
    let slots = grid.dim() + 1;
    let phi_t = frame_time_derivative(phi, ctx.frame)?;
    let conn = build_r(phi, Some(&phi_t), ctx.frame, opts.k_cut)?;
    let pot = solve_potential(&conn)?;
    alg.r_antisymmetry = alg.r_antisymmetry.max(conn.antisymmetry);
    alg.delta_antisymmetry = alg.delta_antisymmetry.max(pot.antisymmetry);
    ser.r_tilde.push(sup_frob(&conn.r_tilde));
    ser.r_bar.push(sup_frob(&pot.r_bar));

    let first = pot.bands.len() - opts.depth;
    for (slot, &k) in opts.chain_bands.iter().enumerate() {
        let ext = exterior_defect(&conn, &pot, k)?;
        alg.divergence_gauge = alg.divergence_gauge.max(ext.divergence);
        alg.r0_consistency = alg.r0_consistency.max(ext.r0_consistency);
        if ser.band_r_tilde.len() <= slot {
            ser.band_r_tilde.push(Vec::new());
            ser.band_r_bar.push(Vec::new());
            ser.band_f.push(Vec::new());
            ser.band_delta.push(Vec::new());
            ser.band_box_delta.push(Vec::new());
            ser.band_div.push(0.0);
            ser.band_r0.push(0.0);
        }
        ser.band_div[slot] = ser.band_div[slot].max(ext.divergence);
        ser.band_r0[slot] = ser.band_r0[slot].max(ext.r0_consistency);
        ser.band_r_tilde[slot].push(sup_frob(&ext.p_r_tilde));
        ser.band_r_bar[slot].push(sup_frob(&ext.p_r_bar));
        ser.band_f[slot].push(sup_frob(&ext.f));
        ser.band_delta[slot].push(sup_frob(&pot.delta_k[first + slot]));
    }

    let sign = opts.orientation.sign();
    let chain = match opts.orientation {
        ChainOrientation::AsWritten => build_u(&pot, opts.depth)?,
        ChainOrientation::Renormalizing => build_u(&pot.negated(), opts.depth)?,
    };
    alg.ident = alg.ident.max(chain.ident_defect);
    alg.inverse = alg.inverse.max(chain.inverse_defect);
    ser.orth.push(chain.orthogonality.iter().fold(0.0, |m, v| m.max(*v)));
    ser.orth_grad.push(chain.orthogonality_grad.iter().fold(0.0, |m, v| m.max(*v)));
    ser.gauge.push(chain.gauge.iter().fold(0.0, |m, v| m.max(*v)));
    ser.du_sup.push(sup_frob(&chain.du));
    ser.du.push(lp_frob(grid, &chain.du, ctx.space_exp));

    // Ψ = P_{k_ref}Φ and its space-time gradient.
    let band = |f: &FrameField| -> Result<(FrameField, Vec<Vec<rustfft::num_complex::Complex64>>)> {
        let mut out = FrameField::zeros(grid, n);
        let mut specs = Vec::with_capacity(f.comps.len());
        for (o, c) in out.comps.iter_mut().zip(&f.comps) {
            let s = super::masked(&grid.fft_forward(c)?, &ctx.psi_mult);
            *o = real(grid, s.clone());
            specs.push(s);
        }
        Ok((out, specs))
    };
    let (psi, psi_hat) = band(phi)?;
    let (psi_t, _) = band(&phi_t)?;
    let mut dpsi = vec![psi_t];
    for i in 1..slots {
        let mut d = FrameField::zeros(grid, n);
        for (o, s) in d.comps.iter_mut().zip(&psi_hat) {
            *o = real(grid, deriv(grid, s, i - 1));
        }
        dpsi.push(d);
    }
    let w = gauge_transform(&psi, &chain)?;
    let back = apply_matrix(&chain.u, &w);
    let rec = back
        .comps
        .iter()
        .flatten()
        .zip(psi.comps.iter().flatten())
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    alg.reconstruction = alg.reconstruction.max(rec);

    // Dangerous term R̃_μ ∂^μΨ.
    let mut danger = FrameField::zeros(grid, n);
    for mu in 0..slots {
        let rt = mu_part(&conn.r_tilde, nn, slots, mu);
        axpy(&mut danger, metric(mu), &apply_matrix(&rt, &dpsi[mu]));
    }
    ser.dangerous.push(lp_frob(grid, &danger.comps, 2.0));

    // ∂_μW = U⁻¹(∂_μΨ − ∂_μU W), then the slice-local terms of □W.
    let true_dd: Vec<Vec<f64>> = chain
        .d_delta
        .iter()
        .map(|f| f.iter().map(|x| sign * x).collect())
        .collect();
    let u_ref: Vec<&[f64]> = chain.u.iter().map(|v| v.as_slice()).collect();
    let mut t1_inner = FrameField::zeros(grid, n);
    let mut t2_inner = FrameField::zeros(grid, n);
    for mu in 0..slots {
        let du = mu_part(&chain.du, nn, slots, mu);
        let dd = mu_part(&true_dd, nn, slots, mu);
        let mut dw = dpsi[mu].clone();
        axpy(&mut dw, -1.0, &apply_matrix(&du, &w));
        let dw = apply_matrix(&chain.u_inv, &dw);
        let mut coef = matmul(n, &dd, &u_ref);
        for (c, d) in coef.iter_mut().zip(&du) {
            c.iter_mut().zip(d.iter()).for_each(|(x, y)| *x += y);
        }
        axpy(&mut t1_inner, metric(mu), &apply_matrix(&coef, &dw));
        let ddu = matmul(n, &dd, &du);
        axpy(&mut t2_inner, metric(mu), &apply_matrix(&ddu, &w));
    }
    let scale = |f: FrameField, c: f64| {
        let mut f = f;
        f.comps.iter_mut().flatten().for_each(|v| *v *= c);
        f
    };
    let t1 = scale(apply_matrix(&chain.u_inv, &t1_inner), -2.0);
    let t2 = scale(apply_matrix(&chain.u_inv, &t2_inner), -2.0);

    let delta_t = (0..nn).map(|ab| pot.delta_d[ab * slots].clone()).collect();
    Ok(Stored {
        u: chain.u,
        u_inv: chain.u_inv,
        w,
        psi,
        delta_k: pot.delta_k[first..].to_vec(),
        delta: pot.delta,
        delta_t,
        t12: (t1, t2),
    })
}

/// `□f = −∂_t²f + Δf` at the centre of the window.
fn wave_op<F>(grid: &Grid, weights: &[(isize, f64)], h: usize, dt: f64, count: usize, get: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(usize, usize) -> Vec<f64>,
{
    let centre: Vec<Vec<f64>> = (0..count).map(|c| get(h, c)).collect();
    let mut out = laplacians(grid, &centre)?;
    // Differences against the centre keep constants exact.
    for (c, o) in out.iter_mut().enumerate() {
        for &(off, wgt) in weights {
            if off == 0 {
                continue;
            }
            let f = get((h as isize + off) as usize, c);
            o.iter_mut()
                .zip(f.iter().zip(&centre[c]))
                .for_each(|(x, (y, z))| *x -= wgt * (y - z) / (dt * dt));
        }
    }
    Ok(out)
}

fn stencil_terms(
    ctx: &Ctx,
    win: &VecDeque<Stored>,
    dt: f64,
    alg: &mut AlgebraDefects,
    ser: &mut Series,
) -> Result<()> {
    let grid = ctx.grid;
    let h = ctx.opts.stencil.half_width();
    let n = ctx.frame.dim();
    let nn = n * n;
    let ncomp = win[h].w.comps.len();
    let second = ctx.opts.stencil.second();
    let box_u = wave_op(grid, second, h, dt, nn, |j, c| win[j].u[c].clone())?;
    let box_w = wave_op(grid, second, h, dt, ncomp, |j, c| win[j].w.comps[c].clone())?;
    let box_psi = wave_op(grid, second, h, dt, ncomp, |j, c| win[j].psi.comps[c].clone())?;
    ser.box_u.push(lp_frob(grid, &box_u, ctx.space_exp));
    ser.box_w.push(lp_frob(grid, &box_w, 2.0));
    ser.box_psi.push(lp_frob(grid, &box_psi, 2.0));
    for slot in 0..win[h].delta_k.len() {
        let bd = wave_op(grid, second, h, dt, nn, |j, c| win[j].delta_k[slot][c].clone())?;
        ser.band_box_delta[slot].push(lp_frob(grid, &bd, ctx.space_exp));
    }
    let centre = &win[h];
    let bu_w = apply_matrix(&box_u, &centre.w);
    let mut t3 = apply_matrix(&centre.u_inv, &bu_w);
    t3.comps.iter_mut().flatten().for_each(|v| *v = -*v);
    let (t1, t2) = &centre.t12;
    ser.t1.push(lp_frob(grid, &t1.comps, 2.0));
    ser.t2.push(lp_frob(grid, &t2.comps, 2.0));
    ser.t3.push(lp_frob(grid, &t3.comps, 2.0));
    let rem: Vec<Vec<f64>> = (0..ncomp)
        .map(|c| {
            (0..grid.len())
                .map(|p| box_w[c][p] - t1.comps[c][p] - t2.comps[c][p] - t3.comps[c][p])
                .collect()
        })
        .collect();
    ser.remainder.push(lp_frob(grid, &rem, 2.0));
    let first = ctx.opts.stencil.first();
    for ab in 0..nn {
        let mut d = vec![0.0; grid.len()];
        for &(off, wgt) in first {
            let f = &win[(h as isize + off) as usize].delta[ab];
            d.iter_mut().zip(f).for_each(|(x, y)| *x += wgt * y / dt);
        }
        let e = max_abs(&[d
            .iter()
            .zip(&centre.delta_t[ab])
            .map(|(x, y)| x - y)
            .collect::<Vec<_>>()]);
        alg.dt_delta = alg.dt_delta.max(e);
    }
    Ok(())
}

/// Runs potential, chain, gauge transform and the `□W` decomposition over a
/// stored trajectory.
pub fn renorm_effectiveness(traj: &Trajectory, options: &RenormOptions) -> Result<RenormReport> {
    let grid = &traj.grid;
    let opts = options.resolve(grid)?;
    traj.require(opts.stencil)?;
    if traj.times.len() != traj.slices.len() {
        return Err(LabError::InvalidInput("times and slices differ in length".into()));
    }
    for w in traj.times.windows(2) {
        if ((w[1] - w[0]) - traj.dt).abs() > 1e-9 * traj.dt.max(1.0) {
            return Err(LabError::InvalidInput("non-uniform time sampling".into()));
        }
    }
    let ctx = Ctx {
        frame: &traj.frame,
        grid,
        opts: &opts,
        psi_mult: grid.multiplier(Projection::Band(opts.k_ref))?,
        space_exp: (grid.dim().saturating_sub(1)).max(1) as f64,
    };
    let h = opts.stencil.half_width();
    let mut alg = AlgebraDefects::default();
    let mut ser = Series::default();
    let mut win = VecDeque::with_capacity(2 * h + 1);
    for slice in &traj.slices {
        if slice.frame_dim != traj.frame.dim() {
            return Err(LabError::InvalidInput("slice frame dimension mismatch".into()));
        }
        win.push_back(slice_local(&ctx, slice, &mut alg, &mut ser)?);
        if win.len() == 2 * h + 1 {
            stencil_terms(&ctx, &win, traj.dt, &mut alg, &mut ser)?;
            win.pop_front();
        }
    }
    let dt = traj.dt;
    let one = Exponent(1.0);
    let two = Exponent(2.0);
    let inf = Exponent::INF;
    let norms = ChainNorms {
        r_tilde: time_norm(&ser.r_tilde, dt, one),
        r_bar: time_norm(&ser.r_bar, dt, one),
        orthogonality: time_norm(&ser.orth, dt, inf),
        orthogonality_grad: time_norm(&ser.orth_grad, dt, inf),
        gauge: time_norm(&ser.gauge, dt, one),
        du_sup: time_norm(&ser.du_sup, dt, inf),
        du: time_norm(&ser.du, dt, two),
        box_u: time_norm(&ser.box_u, dt, two),
    };
    let effectiveness = Effectiveness {
        dangerous: time_norm(&ser.dangerous, dt, one),
        box_psi: time_norm(&ser.box_psi, dt, one),
        box_w: time_norm(&ser.box_w, dt, one),
        t1: time_norm(&ser.t1, dt, one),
        t2: time_norm(&ser.t2, dt, one),
        t3: time_norm(&ser.t3, dt, one),
        remainder: time_norm(&ser.remainder, dt, one),
    };
    let bands = opts
        .chain_bands
        .iter()
        .enumerate()
        .map(|(s, &k)| BandRow {
            k,
            r_tilde: time_norm(&ser.band_r_tilde[s], dt, one),
            r_bar: time_norm(&ser.band_r_bar[s], dt, one),
            r_bar_sup: time_norm(&ser.band_r_bar[s], dt, inf),
            f_l1: time_norm(&ser.band_f[s], dt, one),
            f_sup: time_norm(&ser.band_f[s], dt, inf),
            delta_sup: time_norm(&ser.band_delta[s], dt, inf),
            box_delta: time_norm(&ser.band_box_delta[s], dt, two),
            divergence: ser.band_div[s],
            r0_consistency: ser.band_r0[s],
        })
        .collect();
    Ok(RenormReport {
        options: opts,
        slices: traj.len(),
        dt,
        algebra: alg,
        norms,
        effectiveness,
        bands,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::TargetInstance;
    use crate::wavemap::{evolve, make_initial_data, EvolveOptions, InitialDataSpec, MapState};
    use std::f64::consts::PI;

    fn run(target: &TargetInstance, eps: f64) -> RenormReport {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let spec = InitialDataSpec {
            bands: (0, 2),
            ..Default::default()
        };
        let d = make_initial_data(target, &g, &spec, eps, 4).unwrap();
        let ev = evolve(&d.state, &EvolveOptions::new(0.02, 8)).unwrap();
        renorm_effectiveness(&ev.trajectory, &RenormOptions::default()).unwrap()
    }

    #[test]
    fn defaults_at_baseline() {
        let g = Grid::cube(2, 64, 2.0 * PI).unwrap();
        let r = RenormOptions::default().resolve(&g).unwrap();
        assert_eq!((r.k_cut, r.depth, r.k_ref), (0, 2, 3));
        assert_eq!(r.chain_bands, vec![0, 1]);
        let bad = RenormOptions {
            depth: Some(3),
            ..Default::default()
        };
        assert!(bad.resolve(&g).is_err());
    }

    #[test]
    fn zero_map_gives_zero_report() {
        let g = Grid::cube(2, 16, 2.0 * PI).unwrap();
        let t = TargetInstance::su2();
        let st = MapState::constant(&g, &t, &t.base_point());
        let ev = evolve(&st, &EvolveOptions::new(0.05, 6)).unwrap();
        let r = renorm_effectiveness(&ev.trajectory, &RenormOptions::default()).unwrap();
        let e = r.effectiveness;
        for v in [e.dangerous, e.box_psi, e.box_w, e.t1, e.t2, e.t3, e.remainder] {
            assert_eq!(v, 0.0);
        }
        assert_eq!(r.norms.r_tilde, 0.0);
        assert_eq!(r.norms.orthogonality, 0.0);
    }

    #[test]
    fn flat_target_leaves_band_unchanged() {
        let r = run(&TargetInstance::flat_torus(2), 0.05);
        let e = r.effectiveness;
        assert_eq!(e.box_w, e.box_psi);
        assert_eq!(e.t1 + e.t2 + e.t3 + e.dangerous, 0.0);
        assert_eq!(r.norms.gauge, 0.0);
    }

    #[test]
    fn su2_algebra_holds() {
        let r = run(&TargetInstance::su2(), 0.05);
        let a = r.algebra;
        assert!(a.ident <= 1e-12 && a.inverse <= 1e-12);
        assert!(a.divergence_gauge <= 1e-11 && a.r0_consistency <= 1e-10);
        assert!(a.r_antisymmetry <= 1e-13 && a.delta_antisymmetry <= 1e-13);
        assert!(a.reconstruction <= 1e-12);
        assert!(r.norms.r_tilde > 0.0 && r.norms.r_bar < r.norms.r_tilde);
        // Time-stencil derivative of Δ̃ against the elliptic one.
        assert!(a.dt_delta < 1e-6, "{}", a.dt_delta);
        let csv = r.band_csv();
        assert_eq!(csv.lines().count(), 1 + r.bands.len());
        let back: RenormReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    /// With the renormalizing orientation the `∂W` coefficient is quadratic,
    /// with the literal recursion it is linear.
    #[test]
    fn orientation_controls_cancellation() {
        let g = Grid::cube(2, 32, 2.0 * PI).unwrap();
        let t = TargetInstance::su2();
        let spec = InitialDataSpec {
            bands: (0, 2),
            ..Default::default()
        };
        let d = make_initial_data(&t, &g, &spec, 0.05, 4).unwrap();
        let ev = evolve(&d.state, &EvolveOptions::new(0.02, 8)).unwrap();
        let mut opts = RenormOptions::default();
        let good = renorm_effectiveness(&ev.trajectory, &opts).unwrap();
        opts.orientation = ChainOrientation::AsWritten;
        let bad = renorm_effectiveness(&ev.trajectory, &opts).unwrap();
        assert!(good.effectiveness.t1 < 1e-2 * bad.effectiveness.t1);
        assert!(bad.effectiveness.t1 > good.effectiveness.dangerous);
    }
}
