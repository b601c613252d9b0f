//! Bounded-parallelizable targets described by their orthonormal frames.
//!
//! A target is stored as its frame data (structure coefficients `C^a_bc` and
//! connection coefficients `Γ^a_bc`) together with one coordinate chart in
//! which the frame vectors, the metric and the chart Christoffel symbols can
//! be evaluated pointwise.
//!
//! Index order everywhere is row-major `(a, b, c)`: the entry `C^a_bc` lives
//! at `(a * N + b) * N + c`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Largest antisymmetry violation accepted in input structure coefficients,
/// relative to their magnitude.
pub const ANTISYMMETRY_TOL: f64 = 1e-12;

/// Determinant floor below which a frame is treated as singular.
pub const SINGULAR_FRAME_TOL: f64 = 1e-10;

/// Default centered-difference step for the bracket oracle.
pub const DEFAULT_BRACKET_STEP: f64 = 1e-4;

#[inline]
pub fn idx3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

/// Frame data of a parallelizable target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameData {
    dim: usize,
    structure: Vec<f64>,
    connection: Vec<f64>,
}

impl FrameData {
    /// Frame data of a flat target: all coefficients vanish.
    pub fn flat(dim: usize) -> Self {
        Self {
            dim,
            structure: vec![0.0; dim * dim * dim],
            connection: vec![0.0; dim * dim * dim],
        }
    }

    /// Builds frame data from structure coefficients, deriving the
    /// connection with [`connection_from_structure`].
    pub fn from_structure(dim: usize, structure: &[f64]) -> Result<Self> {
        let (structure, connection) = connection_from_structure(dim, structure)?;
        Ok(Self {
            dim,
            structure,
            connection,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `C^a_bc`.
    #[inline]
    pub fn c(&self, a: usize, b: usize, c: usize) -> f64 {
        self.structure[idx3(self.dim, a, b, c)]
    }

    /// `Γ^a_bc`.
    #[inline]
    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        self.connection[idx3(self.dim, a, b, c)]
    }

    pub fn structure(&self) -> &[f64] {
        &self.structure
    }

    pub fn connection(&self) -> &[f64] {
        &self.connection
    }

    pub fn is_flat(&self) -> bool {
        self.structure.iter().all(|&x| x == 0.0) && self.connection.iter().all(|&x| x == 0.0)
    }

    /// Nested `[a][b][c]` arrays, the layout used for JSON dumps.
    pub fn nested(values: &[f64], dim: usize) -> Vec<Vec<Vec<f64>>> {
        (0..dim)
            .map(|a| {
                (0..dim)
                    .map(|b| (0..dim).map(|c| values[idx3(dim, a, b, c)]).collect())
                    .collect()
            })
            .collect()
    }

    /// JSON dump with documented index order.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "dim": self.dim,
            "index_order": "[a][b][c] for C^a_bc and Gamma^a_bc",
            "structure": Self::nested(&self.structure, self.dim),
            "connection": Self::nested(&self.connection, self.dim),
        })
    }
}

/// Derives `Γ^a_bc = ½(C^a_bc + C^b_ac + C^c_ab)` from structure coefficients.
///
/// Returns the antisymmetrized structure coefficients alongside the
/// connection. The connection is written pairwise so that `Γ^a_bc = −Γ^c_ba`
/// holds bit-for-bit.
pub fn connection_from_structure(dim: usize, structure: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if structure.len() != dim * dim * dim {
        return Err(LabError::InvalidInput(format!(
            "structure array has {} entries, expected {}",
            structure.len(),
            dim * dim * dim
        )));
    }
    let scale = structure.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut defect = 0.0f64;
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                let s = structure[idx3(dim, a, b, c)] + structure[idx3(dim, a, c, b)];
                defect = defect.max(s.abs());
            }
        }
    }
    if defect > ANTISYMMETRY_TOL * scale {
        return Err(LabError::Antisymmetry {
            defect,
            tolerance: ANTISYMMETRY_TOL * scale,
        });
    }

    // x - y and y - x are exact negatives in IEEE arithmetic.
    let mut cs = vec![0.0; structure.len()];
    for a in 0..dim {
        for b in 0..dim {
            for c in 0..dim {
                cs[idx3(dim, a, b, c)] =
                    0.5 * (structure[idx3(dim, a, b, c)] - structure[idx3(dim, a, c, b)]);
            }
        }
    }

    let mut gamma = vec![0.0; cs.len()];
    for a in 0..dim {
        for b in 0..dim {
            for c in (a + 1)..dim {
                let g = 0.5
                    * (cs[idx3(dim, a, b, c)] + cs[idx3(dim, b, a, c)] + cs[idx3(dim, c, a, b)]);
                gamma[idx3(dim, a, b, c)] = g;
                gamma[idx3(dim, c, b, a)] = -g;
            }
        }
    }
    Ok((cs, gamma))
}

/// Which built-in target a [`TargetInstance`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    FlatTorus,
    Su2,
    HyperbolicPlane,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            TargetKind::FlatTorus => "flat-torus",
            TargetKind::Su2 => "su2",
            TargetKind::HyperbolicPlane => "hyperbolic-plane",
        }
    }
}

impl std::str::FromStr for TargetKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat-torus" => Ok(TargetKind::FlatTorus),
            "su2" => Ok(TargetKind::Su2),
            "hyperbolic-plane" => Ok(TargetKind::HyperbolicPlane),
            other => Err(LabError::Config(format!("unknown target '{other}'"))),
        }
    }
}

/// Coordinate chart descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartInfo {
    pub coordinates: Vec<String>,
    pub domain: String,
}

/// A built-in target: frame data plus a chart where the frame can be evaluated.
///
/// * flat torus `T^N`: chart `[0, 2π)^N`, frame `∂_I`;
/// * SU(2) as unit quaternions `q = (√(1−|u|²), u)` with the round metric of
///   `S³ ⊂ R⁴`; chart = vector part `u`, `|u| < 1`; frame `e_a = q·i_a`
///   (left-invariant), giving `C^a_bc = 2ε_abc` and `Γ^a_bc = ε_abc`;
/// * hyperbolic plane, upper half-plane `(x, y)`, `y > 0`, frame
///   `{y∂_x, y∂_y}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetInstance {
    kind: TargetKind,
    frame: FrameData,
    chart: ChartInfo,
}

fn levi_civita(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl TargetInstance {
    pub fn flat_torus(dim: usize) -> Self {
        Self {
            kind: TargetKind::FlatTorus,
            frame: FrameData::flat(dim),
            chart: ChartInfo {
                coordinates: (1..=dim).map(|i| format!("x{i}")).collect(),
                domain: "[0, 2pi)^N, periodic".into(),
            },
        }
    }

    pub fn su2() -> Self {
        let mut c = vec![0.0; 27];
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    c[idx3(3, a, b, d)] = 2.0 * levi_civita(a, b, d);
                }
            }
        }
        Self {
            kind: TargetKind::Su2,
            frame: FrameData::from_structure(3, &c).expect("su(2) constants are antisymmetric"),
            chart: ChartInfo {
                coordinates: vec!["u1".into(), "u2".into(), "u3".into()],
                domain: "|u| < 1 (hemisphere q0 > 0 of the unit quaternions)".into(),
            },
        }
    }

    pub fn hyperbolic_plane() -> Self {
        // [y∂x, y∂y] = −y∂x, so C^1_12 = −1.
        let mut c = vec![0.0; 8];
        c[idx3(2, 0, 0, 1)] = -1.0;
        c[idx3(2, 0, 1, 0)] = 1.0;
        Self {
            kind: TargetKind::HyperbolicPlane,
            frame: FrameData::from_structure(2, &c).expect("H^2 constants are antisymmetric"),
            chart: ChartInfo {
                coordinates: vec!["x".into(), "y".into()],
                domain: "upper half-plane y > 0".into(),
            },
        }
    }

    /// Built-in by kind; `torus_dim` only matters for the flat torus.
    pub fn from_kind(kind: TargetKind, torus_dim: usize) -> Self {
        match kind {
            TargetKind::FlatTorus => Self::flat_torus(torus_dim),
            TargetKind::Su2 => Self::su2(),
            TargetKind::HyperbolicPlane => Self::hyperbolic_plane(),
        }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn frame(&self) -> &FrameData {
        &self.frame
    }

    pub fn chart(&self) -> &ChartInfo {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// Base point used when generating data.
    pub fn base_point(&self) -> Vec<f64> {
        match self.kind {
            TargetKind::FlatTorus => vec![PI; self.dim()],
            TargetKind::Su2 => vec![0.0; 3],
            TargetKind::HyperbolicPlane => vec![0.0, 1.0],
        }
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        if p.len() != self.dim() || p.iter().any(|x| !x.is_finite()) {
            return false;
        }
        match self.kind {
            TargetKind::FlatTorus => true,
            TargetKind::Su2 => p.iter().map(|x| x * x).sum::<f64>() < 1.0,
            TargetKind::HyperbolicPlane => p[1] > 0.0,
        }
    }

    fn check_domain(&self, p: &[f64]) -> Result<()> {
        if self.in_domain(p) {
            Ok(())
        } else {
            Err(LabError::ChartDomain {
                point: p.to_vec(),
                domain: self.chart.domain.clone(),
            })
        }
    }

    /// Frame vectors in chart components: `e[I * N + a] = e_a^I`.
    pub fn frame_vectors(&self, p: &[f64], e: &mut [f64]) {
        let n = self.dim();
        e.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            TargetKind::FlatTorus => {
                for i in 0..n {
                    e[i * n + i] = 1.0;
                }
            }
            TargetKind::Su2 => {
                let f = su2_height(p);
                // vec(q · i_a) = f e_a + u × e_a
                for i in 0..3 {
                    for a in 0..3 {
                        let mut v = if i == a { f } else { 0.0 };
                        for j in 0..3 {
                            v += levi_civita(i, j, a) * p[j];
                        }
                        e[i * 3 + a] = v;
                    }
                }
            }
            TargetKind::HyperbolicPlane => {
                e[0] = p[1];
                e[3] = p[1];
            }
        }
    }

    /// Dual coframe: `w[a * N + I] = ω^a_I`.
    pub fn coframe(&self, p: &[f64], w: &mut [f64]) -> Result<()> {
        let n = self.dim();
        match self.kind {
            TargetKind::FlatTorus => {
                w.iter_mut().for_each(|x| *x = 0.0);
                for i in 0..n {
                    w[i * n + i] = 1.0;
                }
                Ok(())
            }
            TargetKind::HyperbolicPlane => {
                self.check_domain(p)?;
                w.iter_mut().for_each(|x| *x = 0.0);
                w[0] = 1.0 / p[1];
                w[3] = 1.0 / p[1];
                Ok(())
            }
            TargetKind::Su2 => {
                let mut e = [0.0; 9];
                self.frame_vectors(p, &mut e);
                invert3(&e, w)
            }
        }
    }

    /// Chart metric `h[I * N + J]`.
    pub fn metric(&self, p: &[f64], h: &mut [f64]) {
        let n = self.dim();
        h.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            TargetKind::FlatTorus => {
                for i in 0..n {
                    h[i * n + i] = 1.0;
                }
            }
            TargetKind::Su2 => {
                let f2 = 1.0 - p.iter().map(|x| x * x).sum::<f64>();
                for i in 0..3 {
                    for j in 0..3 {
                        h[i * 3 + j] = if i == j { 1.0 } else { 0.0 } + p[i] * p[j] / f2;
                    }
                }
            }
            TargetKind::HyperbolicPlane => {
                let y2 = p[1] * p[1];
                h[0] = 1.0 / y2;
                h[3] = 1.0 / y2;
            }
        }
    }

    /// Chart Christoffel symbols `g[(I * N + J) * N + K] = Γ^I_JK`.
    pub fn christoffel(&self, p: &[f64], g: &mut [f64]) {
        let n = self.dim();
        g.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            TargetKind::FlatTorus => {}
            TargetKind::Su2 => {
                let f2 = 1.0 - p.iter().map(|x| x * x).sum::<f64>();
                for i in 0..3 {
                    for j in 0..3 {
                        for k in 0..3 {
                            let d = if j == k { 1.0 } else { 0.0 };
                            g[idx3(3, i, j, k)] = p[i] * (d + p[j] * p[k] / f2);
                        }
                    }
                }
            }
            TargetKind::HyperbolicPlane => {
                let inv = 1.0 / p[1];
                g[idx3(n, 0, 0, 1)] = -inv;
                g[idx3(n, 0, 1, 0)] = -inv;
                g[idx3(n, 1, 0, 0)] = inv;
                g[idx3(n, 1, 1, 1)] = -inv;
            }
        }
    }

    /// Geodesic from `base` with initial velocity `tangent^a e_a`, at unit time.
    pub fn exp_map(&self, base: &[f64], tangent: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(base)?;
        if tangent.len() != self.dim() {
            return Err(LabError::InvalidInput("tangent dimension mismatch".into()));
        }
        let out = match self.kind {
            TargetKind::FlatTorus => base
                .iter()
                .zip(tangent)
                .map(|(x, v)| (x + v).rem_euclid(2.0 * PI))
                .collect(),
            TargetKind::Su2 => {
                let q = Quat::from_chart(base);
                let r = q.mul(&Quat::exp(tangent));
                if r.w <= 0.0 {
                    return Err(LabError::ChartDomain {
                        point: r.vector().to_vec(),
                        domain: self.chart.domain.clone(),
                    });
                }
                r.vector().to_vec()
            }
            TargetKind::HyperbolicPlane => self.geodesic_rk4(base, tangent, 64)?,
        };
        self.check_domain(&out)?;
        Ok(out)
    }

    fn geodesic_rk4(&self, base: &[f64], tangent: &[f64], steps: usize) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut e = vec![0.0; n * n];
        self.frame_vectors(base, &mut e);
        let mut state = vec![0.0; 2 * n];
        state[..n].copy_from_slice(base);
        for i in 0..n {
            state[n + i] = (0..n).map(|a| e[i * n + a] * tangent[a]).sum();
        }
        let h = 1.0 / steps as f64;
        let mut g = vec![0.0; n * n * n];
        let mut rhs = |s: &[f64], out: &mut [f64]| -> Result<()> {
            self.check_domain(&s[..n])?;
            self.christoffel(&s[..n], &mut g);
            for i in 0..n {
                out[i] = s[n + i];
                let mut acc = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        acc += g[idx3(n, i, j, k)] * s[n + j] * s[n + k];
                    }
                }
                out[n + i] = -acc;
            }
            Ok(())
        };
        let mut k1 = vec![0.0; 2 * n];
        let mut k2 = vec![0.0; 2 * n];
        let mut k3 = vec![0.0; 2 * n];
        let mut k4 = vec![0.0; 2 * n];
        let mut tmp = vec![0.0; 2 * n];
        for _ in 0..steps {
            rhs(&state, &mut k1)?;
            for i in 0..2 * n {
                tmp[i] = state[i] + 0.5 * h * k1[i];
            }
            rhs(&tmp, &mut k2)?;
            for i in 0..2 * n {
                tmp[i] = state[i] + 0.5 * h * k2[i];
            }
            rhs(&tmp, &mut k3)?;
            for i in 0..2 * n {
                tmp[i] = state[i] + h * k3[i];
            }
            rhs(&tmp, &mut k4)?;
            for i in 0..2 * n {
                state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        state.truncate(n);
        Ok(state)
    }

    /// Structure coefficients recovered from the frame by centered finite
    /// differences of the Lie bracket, expanded back in the frame.
    ///
    /// Independent of the stored [`FrameData`]; used as its oracle.
    pub fn structure_constants_numeric(&self, p: &[f64], h_step: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        self.check_domain(p)?;
        if !(h_step > 0.0) {
            return Err(LabError::InvalidInput("finite-difference step must be positive".into()));
        }
        let mut e = vec![0.0; n * n];
        self.frame_vectors(p, &mut e);
        let det = det_small(&e, n);
        if det.abs() < SINGULAR_FRAME_TOL {
            return Err(LabError::Singular {
                det,
                threshold: SINGULAR_FRAME_TOL,
            });
        }
        // de[J][I * n + a] = ∂_J e_a^I
        let mut de = vec![vec![0.0; n * n]; n];
        let mut plus = vec![0.0; n * n];
        let mut minus = vec![0.0; n * n];
        for j in 0..n {
            let mut pp = p.to_vec();
            let mut pm = p.to_vec();
            pp[j] += h_step;
            pm[j] -= h_step;
            self.check_domain(&pp)?;
            self.check_domain(&pm)?;
            self.frame_vectors(&pp, &mut plus);
            self.frame_vectors(&pm, &mut minus);
            for k in 0..n * n {
                de[j][k] = (plus[k] - minus[k]) / (2.0 * h_step);
            }
        }
        let mut w = vec![0.0; n * n];
        invert_small(&e, n, &mut w)?;
        let mut c = vec![0.0; n * n * n];
        let mut bracket = vec![0.0; n];
        for b in 0..n {
            for cc in 0..n {
                for i in 0..n {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += e[j * n + b] * de[j][i * n + cc] - e[j * n + cc] * de[j][i * n + b];
                    }
                    bracket[i] = acc;
                }
                for a in 0..n {
                    c[idx3(n, a, b, cc)] = (0..n).map(|i| w[a * n + i] * bracket[i]).sum();
                }
            }
        }
        Ok(c)
    }
}

fn su2_height(u: &[f64]) -> f64 {
    (1.0 - u.iter().map(|x| x * x).sum::<f64>()).max(0.0).sqrt()
}

/// Minimal quaternion arithmetic for the SU(2) target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub fn from_chart(u: &[f64]) -> Self {
        Self {
            w: su2_height(u),
            x: u[0],
            y: u[1],
            z: u[2],
        }
    }

    /// `exp(v^a i_a) = cos|v| + sin|v| v̂·i`.
    pub fn exp(v: &[f64]) -> Self {
        let theta = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let s = if theta < 1e-8 {
            1.0 - theta * theta / 6.0
        } else {
            theta.sin() / theta
        };
        Self {
            w: theta.cos(),
            x: s * v[0],
            y: s * v[1],
            z: s * v[2],
        }
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn vector(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

fn det_small(m: &[f64], n: usize) -> f64 {
    nalgebra::DMatrix::from_row_slice(n, n, m).determinant()
}

fn invert3(m: &[f64], out: &mut [f64]) -> Result<()> {
    invert_small(m, 3, out)
}

/// Inverse of a small row-major matrix; errors below the singular-frame floor.
pub(crate) fn invert_small(m: &[f64], n: usize, out: &mut [f64]) -> Result<()> {
    let mat = nalgebra::DMatrix::from_row_slice(n, n, m);
    let det = mat.determinant();
    if det.abs() < SINGULAR_FRAME_TOL {
        return Err(LabError::Singular {
            det,
            threshold: SINGULAR_FRAME_TOL,
        });
    }
    let inv = mat
        .try_inverse()
        .ok_or(LabError::Singular { det, threshold: SINGULAR_FRAME_TOL })?;
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = inv[(i, j)];
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn targets() -> Vec<TargetInstance> {
        vec![
            TargetInstance::flat_torus(3),
            TargetInstance::su2(),
            TargetInstance::hyperbolic_plane(),
        ]
    }

    #[test]
    fn flat_structure_gives_zero_connection() {
        let fd = FrameData::from_structure(4, &vec![0.0; 64]).unwrap();
        assert!(fd.connection().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn su2_epsilon_gives_half_epsilon() {
        let mut c = vec![0.0; 27];
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    c[idx3(3, a, b, d)] = levi_civita(a, b, d);
                }
            }
        }
        let fd = FrameData::from_structure(3, &c).unwrap();
        // brute force over all 27 triples
        for a in 0..3 {
            for b in 0..3 {
                for d in 0..3 {
                    let expect = 0.5 * levi_civita(a, b, d);
                    assert!((fd.gamma(a, b, d) - expect).abs() < 1e-15, "{a}{b}{d}");
                }
            }
        }
    }

    #[test]
    fn rejects_non_antisymmetric_structure() {
        let mut c = vec![0.0; 8];
        c[idx3(2, 0, 0, 1)] = 1.0;
        c[idx3(2, 0, 1, 0)] = 0.5;
        assert!(matches!(
            FrameData::from_structure(2, &c),
            Err(LabError::Antisymmetry { .. })
        ));
    }

    #[test]
    fn builtin_connection_antisymmetry_is_exact() {
        for t in targets() {
            let f = t.frame();
            let n = f.dim();
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        assert_eq!(f.gamma(a, b, c), -f.gamma(c, b, a));
                    }
                }
            }
        }
    }

    #[test]
    fn flat_torus_frame_is_zero() {
        let t = TargetInstance::flat_torus(3);
        assert!(t.frame().is_flat());
    }

    #[test]
    fn frames_are_orthonormal() {
        let pts: Vec<(TargetInstance, Vec<f64>)> = vec![
            (TargetInstance::flat_torus(3), vec![1.0, 2.0, 3.0]),
            (TargetInstance::su2(), vec![0.3, -0.2, 0.5]),
            (TargetInstance::hyperbolic_plane(), vec![0.7, 2.5]),
        ];
        for (t, p) in pts {
            let n = t.dim();
            let mut e = vec![0.0; n * n];
            let mut h = vec![0.0; n * n];
            t.frame_vectors(&p, &mut e);
            t.metric(&p, &mut h);
            for a in 0..n {
                for b in 0..n {
                    let mut g = 0.0;
                    for i in 0..n {
                        for j in 0..n {
                            g += e[i * n + a] * h[i * n + j] * e[j * n + b];
                        }
                    }
                    let d = if a == b { 1.0 } else { 0.0 };
                    assert!((g - d).abs() < 1e-12, "{:?} {a}{b} {g}", t.kind());
                }
            }
        }
    }

    #[test]
    fn coframe_inverts_frame() {
        let t = TargetInstance::su2();
        let p = [0.1, 0.4, -0.3];
        let mut e = [0.0; 9];
        let mut w = [0.0; 9];
        t.frame_vectors(&p, &mut e);
        t.coframe(&p, &mut w).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let s: f64 = (0..3).map(|i| w[a * 3 + i] * e[i * 3 + b]).sum();
                assert!((s - if a == b { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    /// Christoffels against finite differences of the metric.
    #[test]
    fn christoffel_matches_metric_derivatives() {
        for (t, p) in [
            (TargetInstance::su2(), vec![0.2, -0.1, 0.35]),
            (TargetInstance::hyperbolic_plane(), vec![0.3, 1.7]),
        ] {
            let n = t.dim();
            let h0 = 1e-5;
            let mut dh = vec![vec![0.0; n * n]; n];
            for k in 0..n {
                let (mut pp, mut pm) = (p.clone(), p.clone());
                pp[k] += h0;
                pm[k] -= h0;
                let mut a = vec![0.0; n * n];
                let mut b = vec![0.0; n * n];
                t.metric(&pp, &mut a);
                t.metric(&pm, &mut b);
                for i in 0..n * n {
                    dh[k][i] = (a[i] - b[i]) / (2.0 * h0);
                }
            }
            let mut h = vec![0.0; n * n];
            t.metric(&p, &mut h);
            let mut hinv = vec![0.0; n * n];
            invert_small(&h, n, &mut hinv).unwrap();
            let mut g = vec![0.0; n * n * n];
            t.christoffel(&p, &mut g);
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for l in 0..n {
                            s += 0.5
                                * hinv[i * n + l]
                                * (dh[j][l * n + k] + dh[k][l * n + j] - dh[l][j * n + k]);
                        }
                        assert!((s - g[idx3(n, i, j, k)]).abs() < 1e-8, "{i}{j}{k}");
                    }
                }
            }
        }
    }

    #[test]
    fn exp_map_identity_and_inverse() {
        for t in targets() {
            let b = t.base_point();
            let z = vec![0.0; t.dim()];
            let r = t.exp_map(&b, &z).unwrap();
            for (x, y) in r.iter().zip(&b) {
                assert!((x - y).abs() < 1e-15);
            }
        }
        let t = TargetInstance::su2();
        let v = [0.3, -0.2, 0.1];
        let p = t.exp_map(&[0.0; 3], &v).unwrap();
        let back = t.exp_map(&p, &[-0.3, 0.2, -0.1]).unwrap();
        assert!(back.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn flat_exp_wraps() {
        let t = TargetInstance::flat_torus(2);
        let p = t.exp_map(&[6.0, 1.0], &[1.0, -0.5]).unwrap();
        assert!((p[0] - (7.0 - 2.0 * PI)).abs() < 1e-14);
        assert!((p[1] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn hyperbolic_vertical_geodesic() {
        let t = TargetInstance::hyperbolic_plane();
        let p = t.exp_map(&[0.0, 1.0], &[0.0, 0.4]).unwrap();
        assert!(p[0].abs() < 1e-14);
        assert!((p[1] - 0.4f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn exp_map_rejects_leaving_chart() {
        let t = TargetInstance::su2();
        assert!(matches!(
            t.exp_map(&[0.0; 3], &[2.0, 0.0, 0.0]),
            Err(LabError::ChartDomain { .. })
        ));
    }

    #[test]
    fn numeric_bracket_rejects_outside_domain() {
        let t = TargetInstance::hyperbolic_plane();
        assert!(t.structure_constants_numeric(&[0.0, -1.0], 1e-4).is_err());
    }

    #[test]
    fn numeric_bracket_recovers_stored_constants() {
        for (t, p) in [
            (TargetInstance::su2(), vec![0.0, 0.0, 0.0]),
            (TargetInstance::su2(), vec![0.25, -0.4, 0.1]),
            (TargetInstance::hyperbolic_plane(), vec![-1.2, 0.6]),
            (TargetInstance::flat_torus(3), vec![1.0, 2.0, 3.0]),
        ] {
            let c = t.structure_constants_numeric(&p, DEFAULT_BRACKET_STEP).unwrap();
            for (x, y) in c.iter().zip(t.frame().structure()) {
                assert!((x - y).abs() < 1e-7, "{:?}: {x} vs {y}", t.kind());
            }
        }
    }
}
