use serde::{Deserialize, Serialize};

use super::error_norm;
use crate::error::{LabError, Result};
use crate::grid::{Grid, Projection};

/// Cutoffs of the six-way split of `P_out(R·∂Φ)`.
///
/// Bands `k ≤ low` are low, `low < k ≤ high` mid, `k > high` high. Bands run
/// over the extended range `k_min − 1 ..= k_max + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaSpec {
    pub output: i32,
    pub low: i32,
    pub high: i32,
    pub separation: i32,
}

impl ParaSpec {
    /// Output band `k` with the low cut three bands below and the high cut
    /// two bands above, separation 2: the tightest split for which the
    /// separated and low-low classes miss band `k` exactly.
    pub fn around(k: i32) -> Self {
        Self {
            output: k,
            low: k - 3,
            high: k + 2,
            separation: 2,
        }
    }

    /// Class index `0..6` of a band pair `(k1, k2)` for `(R, Φ)`.
    pub fn class(&self, k1: i32, k2: i32) -> usize {
        let low = |k: i32| k <= self.low;
        let mid = |k: i32| k > self.low && k <= self.high;
        if k1.max(k2) > self.high {
            if (k1 - k2).abs() <= self.separation {
                0
            } else {
                1
            }
        } else if low(k1) && low(k2) {
            2
        } else if mid(k1) && mid(k2) {
            3
        } else if low(k1) {
            4
        } else {
            5
        }
    }
}

/// A bilinear product `Σ_j c_j f_j g_j`, one per output component.
pub struct ProductTerm<'a> {
    pub pairs: Vec<(&'a [f64], &'a [f64], f64)>,
}

/// `L¹L²` sizes of `P_out E_i`, `i = 1..6`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ParaReport {
    pub spec: Option<ParaSpec>,
    pub terms: [f64; 6],
    /// `‖P_out(R·∂Φ)‖_{L¹L²}` from the direct product.
    pub total: f64,
    /// Max over slices of `‖Σ_i P_out E_i − P_out(R·∂Φ)‖_{L²} / ‖P_out(R·∂Φ)‖_{L²}`.
    pub reconstruction: f64,
    /// `max |P_out E_2|` and `max |P_out E_3|` relative to `max |P_out(R·∂Φ)|`.
    pub separated_leak: f64,
    pub low_leak: f64,
}

/// Per-slice `P_out E_i` fields and the direct `P_out(R·∂Φ)`, each a list of
/// output components.
pub fn paradecompose_slice(
    grid: &Grid,
    terms: &[ProductTerm],
    spec: &ParaSpec,
) -> Result<([Vec<Vec<f64>>; 6], Vec<Vec<f64>>)> {
    grid.validate(Projection::Band(spec.output))?;
    if spec.low >= spec.high || spec.separation < 0 {
        return Err(LabError::InvalidInput("need low < high and separation ≥ 0".into()));
    }
    let bands: Vec<i32> = (grid.k_min() - 1..=grid.k_max() + 1).collect();
    let mults: Vec<Vec<f64>> = bands
        .iter()
        .map(|&k| grid.multiplier(grid.extended_band(k)))
        .collect::<Result<_>>()?;
    let out_mult = grid.multiplier(Projection::Band(spec.output))?;
    let split = |f: &[f64]| -> Result<Vec<Vec<f64>>> {
        let s = grid.fft_forward(f)?;
        mults
            .iter()
            .map(|m| grid.fft_inverse(s.iter().zip(m).map(|(a, b)| a * b).collect()))
            .collect()
    };
    let project = |f: Vec<f64>| -> Result<Vec<f64>> {
        let s = grid.fft_forward(&f)?;
        grid.fft_inverse(s.iter().zip(&out_mult).map(|(a, b)| a * b).collect())
    };
    let len = grid.len();
    let mut classes: [Vec<Vec<f64>>; 6] = Default::default();
    let mut direct = Vec::with_capacity(terms.len());
    for term in terms {
        let mut acc = vec![vec![0.0; len]; 6];
        let mut prod = vec![0.0; len];
        for &(f, g, c) in &term.pairs {
            for ((p, x), y) in prod.iter_mut().zip(f).zip(g) {
                *p += c * x * y;
            }
            let fs = split(f)?;
            let gs = split(g)?;
            for (i, &k1) in bands.iter().enumerate() {
                for (j, &k2) in bands.iter().enumerate() {
                    let cls = spec.class(k1, k2);
                    for ((a, x), y) in acc[cls].iter_mut().zip(&fs[i]).zip(&gs[j]) {
                        *a += c * x * y;
                    }
                }
            }
        }
        for (cls, a) in acc.into_iter().enumerate() {
            classes[cls].push(project(a)?);
        }
        direct.push(project(prod)?);
    }
    Ok((classes, direct))
}

fn frob(comps: &[Vec<f64>]) -> Vec<f64> {
    let len = comps.first().map_or(0, |c| c.len());
    (0..len)
        .map(|p| comps.iter().map(|c| c[p] * c[p]).sum::<f64>().sqrt())
        .collect()
}

/// Streaming collector for [`paradecompose_slice`] output.
pub struct ParaAccumulator {
    grid: Grid,
    spec: ParaSpec,
    per_class: [Vec<Vec<f64>>; 6],
    per_direct: Vec<Vec<f64>>,
    rep: ParaReport,
}

impl ParaAccumulator {
    pub fn new(grid: &Grid, spec: ParaSpec) -> Self {
        Self {
            grid: grid.clone(),
            spec,
            per_class: Default::default(),
            per_direct: Vec::new(),
            rep: ParaReport {
                spec: Some(spec),
                ..Default::default()
            },
        }
    }

    pub fn push(&mut self, terms: &[ProductTerm]) -> Result<()> {
        let grid = &self.grid;
        let dv = grid.cell_volume();
        let (classes, direct) = paradecompose_slice(grid, terms, &self.spec)?;
        let d_mag = frob(&direct);
        let d_l2 = crate::grid::lp_norm(&d_mag, dv, 2.0);
        let d_max = d_mag.iter().fold(0.0f64, |m, v| m.max(*v));
        let sum: Vec<Vec<f64>> = (0..direct.len())
            .map(|c| {
                (0..grid.len())
                    .map(|p| classes.iter().map(|cl| cl[c][p]).sum::<f64>() - direct[c][p])
                    .collect()
            })
            .collect();
        let err = crate::grid::lp_norm(&frob(&sum), dv, 2.0);
        let rep = &mut self.rep;
        if d_l2 > 0.0 {
            rep.reconstruction = rep.reconstruction.max(err / d_l2);
        }
        let leak = |cl: &Vec<Vec<f64>>| frob(cl).iter().fold(0.0f64, |m, v| m.max(*v));
        if d_max > 0.0 {
            rep.separated_leak = rep.separated_leak.max(leak(&classes[1]) / d_max);
            rep.low_leak = rep.low_leak.max(leak(&classes[2]) / d_max);
        }
        for (i, cl) in classes.iter().enumerate() {
            self.per_class[i].push(frob(cl));
        }
        self.per_direct.push(d_mag);
        Ok(())
    }

    pub fn finish(mut self, dt: f64) -> ParaReport {
        let dv = self.grid.cell_volume();
        for (t, cl) in self.rep.terms.iter_mut().zip(&self.per_class) {
            *t = error_norm(cl, dt, dv);
        }
        self.rep.total = error_norm(&self.per_direct, dt, dv);
        self.rep
    }
}

/// Runs [`paradecompose_slice`] on every slice and collects norms.
pub fn paradecompose_diagnostics(
    grid: &Grid,
    dt: f64,
    slices: &[Vec<ProductTerm>],
    spec: &ParaSpec,
) -> Result<ParaReport> {
    let mut acc = ParaAccumulator::new(grid, *spec);
    for terms in slices {
        acc.push(terms)?;
    }
    Ok(acc.finish(dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> Grid {
        Grid::cube(1, 512, 2.0 * PI).unwrap()
    }

    fn mode(g: &Grid, m: f64, phase: f64) -> Vec<f64> {
        (0..g.len()).map(|p| (m * g.coordinate(p, 0) + phase).cos()).collect()
    }

    #[test]
    fn class_table_covers_pairs() {
        let s = ParaSpec::around(3);
        assert_eq!(s.class(6, 6), 0);
        assert_eq!(s.class(9, 2), 1);
        assert_eq!(s.class(0, -1), 2);
        assert_eq!(s.class(1, 5), 3);
        assert_eq!(s.class(0, 4), 4);
        assert_eq!(s.class(4, 0), 5);
    }

    #[test]
    fn high_band_only_populates_high_classes() {
        let g = grid();
        let spec = ParaSpec::around(3);
        let f = mode(&g, 96.0, 0.3);
        let h = mode(&g, 5.0, 0.1);
        let (cl, direct) =
            paradecompose_slice(&g, &[ProductTerm { pairs: vec![(&f, &h, 1.0)] }], &spec).unwrap();
        let mx = |v: &Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(mx(&cl[1][0]) <= 1e-12);
        for c in 2..6 {
            assert!(mx(&cl[c][0]) <= 1e-14);
        }
        assert!(mx(&direct[0]) <= 1e-12);
    }

    #[test]
    fn low_only_populates_e3() {
        let g = grid();
        let spec = ParaSpec::around(5);
        let f = mode(&g, 1.0, 0.2);
        let h = mode(&g, 0.0, 0.0);
        let k = mode(&g, 3.0, 0.5);
        let terms = [ProductTerm { pairs: vec![(&f, &k, 1.0), (&h, &f, 0.5)] }];
        let (cl, _) = paradecompose_slice(&g, &terms, &spec).unwrap();
        let mx = |v: &Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(mx(&cl[2][0]) <= 1e-12);
        for c in [0, 1, 3, 4, 5] {
            assert!(mx(&cl[c][0]) <= 1e-14);
        }
    }
}
