use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::para::{ParaAccumulator, ParaReport, ParaSpec, ProductTerm};
use super::{band_scale, canonical_envelope, mixed_norm, sk_norm, MixedNormSpec};
use crate::error::{LabError, Result};
use crate::grid::{GridSpec, Projection};
use crate::renorm::{build_r, frame_time_derivative};
use crate::stencil::TimeStencil;
use crate::wavemap::{
    data_band_norms, divcurl_residual, gradients, wave_identity_residual, FrameField,
    ResidualNorms, Trajectory,
};

/// One `(k, q, r)` cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedRow {
    pub k: i32,
    pub spec: MixedNormSpec,
    /// `‖P_kΦ‖_{L^qL^r}`.
    pub norm: f64,
    /// `‖∂_tP_kΦ‖_{L^qL^r}`.
    pub norm_t: f64,
    /// The `S_k` summand for this pair.
    pub weighted: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkRow {
    pub k: i32,
    pub sk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub identity: String,
    pub norms: ResidualNorms,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormMeta {
    pub grid: GridSpec,
    pub dt: f64,
    pub slices: usize,
    pub config_hash: String,
}

/// Band norms of a trajectory: `S_k`, mixed norms, data envelope, identity
/// residuals and the product decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub meta: NormMeta,
    /// Data band norms at the first slice, `k = k_min ..= k_max`.
    pub data_bands: Vec<f64>,
    pub envelope: Vec<f64>,
    pub sigma: f64,
    pub sk: Vec<SkRow>,
    pub mixed: Vec<MixedRow>,
    pub residuals: Vec<ResidualRow>,
    pub para: Option<ParaReport>,
}

impl NormReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat CSV, one row per `(k, q, r)`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,q,r,norm,norm_t,weighted,sk\n");
        for row in &self.mixed {
            let sk = self
                .sk
                .iter()
                .find(|r| r.k == row.k)
                .map_or(0.0, |r| r.sk);
            let _ = writeln!(
                s,
                "{},{},{},{:e},{:e},{:e},{:e}",
                row.k, row.spec.q, row.spec.r, row.norm, row.norm_t, row.weighted, sk
            );
        }
        s
    }

    pub fn is_valid(&self) -> bool {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        self.data_bands.iter().chain(&self.envelope).all(|&v| ok(v))
            && self.sk.iter().all(|r| ok(r.sk))
            && self
                .mixed
                .iter()
                .all(|r| ok(r.norm) && ok(r.norm_t) && ok(r.weighted))
            && self
                .residuals
                .iter()
                .all(|r| ok(r.norms.max) && ok(r.norms.l2))
    }
}

/// Options for [`norm_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct NormOptions {
    pub pairs: Vec<MixedNormSpec>,
    pub sigma: f64,
    pub stencil: TimeStencil,
    pub para: Option<ParaSpec>,
    pub config_hash: String,
}

fn magnitude(comps: &[Vec<f64>]) -> Vec<f64> {
    let len = comps.first().map_or(0, |c| c.len());
    (0..len)
        .map(|p| comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .collect()
}

fn band_of(field: &FrameField, k: i32) -> Result<Vec<Vec<f64>>> {
    let grid = &field.grid;
    let m = grid.multiplier(Projection::Band(k))?;
    field
        .comps
        .iter()
        .map(|c| {
            let s = grid.fft_forward(c)?;
            grid.fft_inverse(s.iter().zip(&m).map(|(a, b)| a * b).collect())
        })
        .collect()
}

/// `R^a_{bμ} m^{μν} ∂_νφ^b_α` as product terms, one per `(a, α)`.
fn wave_products<'a>(
    r: &'a [Vec<f64>],
    dphi: &'a [Vec<Vec<f64>>],
    nf: usize,
    slots: usize,
) -> Vec<ProductTerm<'a>> {
    let mut terms = Vec::with_capacity(nf * slots);
    for a in 0..nf {
        for al in 0..slots {
            let mut pairs = Vec::new();
            for b in 0..nf {
                for mu in 0..slots {
                    let sign = if mu == 0 { -1.0 } else { 1.0 };
                    pairs.push((
                        r[(a * nf + b) * slots + mu].as_slice(),
                        dphi[b * slots + al][mu].as_slice(),
                        sign,
                    ));
                }
            }
            terms.push(ProductTerm { pairs });
        }
    }
    terms
}

pub fn norm_report(traj: &Trajectory, opts: &NormOptions) -> Result<NormReport> {
    if traj.is_empty() {
        return Err(LabError::TooFewSlices { got: 0, need: 1 });
    }
    let grid = &traj.grid;
    let n = grid.dim();
    let nf = traj.frame.dim();
    let slots = n + 1;
    let dv = grid.cell_volume();
    let bands: Vec<i32> = (grid.k_min()..=grid.k_max()).collect();
    let mut band_mag: Vec<Vec<Vec<f64>>> = vec![Vec::new(); bands.len()];
    let mut band_mag_t: Vec<Vec<Vec<f64>>> = vec![Vec::new(); bands.len()];
    let mut para = opts.para.map(|s| ParaAccumulator::new(grid, s));
    for slice in &traj.slices {
        let phi_t = frame_time_derivative(slice, &traj.frame)?;
        for (i, &k) in bands.iter().enumerate() {
            band_mag[i].push(magnitude(&band_of(slice, k)?));
            band_mag_t[i].push(magnitude(&band_of(&phi_t, k)?));
        }
        if let Some(acc) = para.as_mut() {
            let conn = build_r(slice, Some(&phi_t), &traj.frame, grid.k_min())?;
            let grad = gradients(grid, &slice.comps)?;
            let dphi: Vec<Vec<Vec<f64>>> = (0..nf * slots)
                .map(|c| {
                    let mut v = vec![phi_t.comps[c].clone()];
                    v.extend(grad[c].iter().cloned());
                    v
                })
                .collect();
            acc.push(&wave_products(&conn.r, &dphi, nf, slots))?;
        }
    }
    let mut sk = Vec::with_capacity(bands.len());
    let mut mixed = Vec::new();
    for (i, &k) in bands.iter().enumerate() {
        let lambda = band_scale(grid, k);
        for &p in &opts.pairs {
            let norm = mixed_norm(&band_mag[i], traj.dt, dv, p);
            let norm_t = mixed_norm(&band_mag_t[i], traj.dt, dv, p);
            let w = lambda.powf(p.q.reciprocal() + n as f64 * p.r.reciprocal() - 1.0);
            mixed.push(MixedRow {
                k,
                spec: p,
                norm,
                norm_t,
                weighted: w * (norm + norm_t / lambda),
            });
        }
        sk.push(SkRow {
            k,
            sk: sk_norm(grid, traj.dt, &band_mag[i], &band_mag_t[i], k, &opts.pairs)?,
        });
    }
    let s = n as f64 / 2.0;
    let data_bands = data_band_norms(&traj.slices[0], s);
    let envelope = canonical_envelope(&data_bands, opts.sigma);
    let mut residuals = Vec::new();
    if traj.len() >= opts.stencil.min_slices() {
        let dc = divcurl_residual(traj, opts.stencil)?;
        let wi = wave_identity_residual(traj, opts.stencil)?;
        for (name, norms) in [
            ("curl", dc.curl),
            ("divergence", dc.divergence),
            ("wave", wi.residual),
            ("box_phi", wi.box_phi),
        ] {
            residuals.push(ResidualRow {
                identity: name.into(),
                norms,
            });
        }
    }
    Ok(NormReport {
        meta: NormMeta {
            grid: grid.spec(),
            dt: traj.dt,
            slices: traj.len(),
            config_hash: opts.config_hash.clone(),
        },
        data_bands,
        envelope,
        sigma: opts.sigma,
        sk,
        mixed,
        residuals,
        para: para.map(|a| a.finish(traj.dt)),
    })
}
