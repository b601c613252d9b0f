//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [target]
//! kind = "su2"            # flat-torus | su2 | hyperbolic-plane
//! torus_dim = 2           # frame dimension, flat torus only
//!
//! [grid]
//! sizes = [64, 64]        # powers of two; length is the spatial dimension
//! box = [6.283185307179586, 6.283185307179586]   # default 2π per axis
//!
//! [data]
//! epsilon = 0.05
//! bands = [0, 1]
//! sigma = 0.25
//! velocity_ratio = 1.0
//!
//! [evolve]
//! dt_factor = 0.25        # dt = dt_factor · min dx, at most 0.5
//! t_end = 0.5
//!
//! [renorm]
//! k_cut_offset = 3        # k_cut = max(k_min, k_max − offset)
//!
//! [sweep]
//! epsilons = [0.02, 0.04, 0.08]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::geometry::{TargetInstance, TargetKind};
use crate::grid::Grid;
use crate::norms::{default_pairs, MixedNormSpec};
use crate::renorm::{ChainOrientation, RenormOptions};
use crate::stencil::TimeStencil;
use crate::wavemap::{InitialDataSpec, GUARD_FACTOR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    pub kind: TargetKind,
    pub torus_dim: usize,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            kind: TargetKind::Su2,
            torus_dim: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub sizes: Vec<usize>,
    #[serde(rename = "box")]
    pub box_lengths: Option<Vec<f64>>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            sizes: vec![64, 64],
            box_lengths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub epsilon: f64,
    pub bands: (i32, i32),
    pub sigma: f64,
    pub velocity_ratio: f64,
    /// Regularity index recorded with the data; defaults to `n/2`.
    pub s: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        let d = InitialDataSpec::default();
        Self {
            epsilon: 0.05,
            bands: d.bands,
            sigma: d.sigma,
            velocity_ratio: d.velocity_ratio,
            s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub dt_factor: f64,
    pub t_end: f64,
    pub sample_every: usize,
    pub stencil: TimeStencil,
    /// Growth of energy or velocity magnitude that aborts a run.
    pub guard_factor: f64,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            dt_factor: 0.25,
            t_end: 0.5,
            sample_every: 1,
            stencil: TimeStencil::Fourth,
            guard_factor: GUARD_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormSection {
    pub k_cut_offset: i32,
    pub depth: Option<usize>,
    pub k_ref: Option<i32>,
    pub orientation: ChainOrientation,
}

impl Default for RenormSection {
    fn default() -> Self {
        Self {
            k_cut_offset: 3,
            depth: None,
            k_ref: None,
            orientation: ChainOrientation::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSection {
    /// Defaults to the admissible bootstrap pairs.
    pub pairs: Option<Vec<MixedNormSpec>>,
    /// Output band of the product decomposition; defaults to `k_max − 1`.
    pub para_band: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub epsilons: Vec<f64>,
    /// Data bands for sweep runs; defaults to every resolvable band.
    pub bands: Option<(i32, i32)>,
    /// Defaults to 0.05, fine enough that time-stencil error stays below
    /// the quadratic source terms.
    pub dt_factor: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.02, 0.04, 0.08],
            bands: None,
            dt_factor: Some(0.05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out: Option<String>,
    pub target: TargetSection,
    pub grid: GridSection,
    pub data: DataSection,
    pub evolve: EvolveSection,
    pub renorm: RenormSection,
    pub norms: NormsSection,
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            out: None,
            target: TargetSection::default(),
            grid: GridSection::default(),
            data: DataSection::default(),
            evolve: EvolveSection::default(),
            renorm: RenormSection::default(),
            norms: NormsSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| bad(e.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.grid.sizes.len()
    }

    pub fn box_lengths(&self) -> Vec<f64> {
        self.grid
            .box_lengths
            .clone()
            .unwrap_or_else(|| vec![std::f64::consts::TAU; self.dim()])
    }

    pub fn build_grid(&self) -> Result<Grid> {
        Grid::new(&self.grid.sizes, &self.box_lengths()).map_err(|e| bad(e.to_string()))
    }

    pub fn target(&self) -> TargetInstance {
        TargetInstance::from_kind(self.target.kind, self.target.torus_dim)
    }

    pub fn data_spec(&self) -> InitialDataSpec {
        InitialDataSpec {
            bands: self.data.bands,
            sigma: self.data.sigma,
            velocity_ratio: self.data.velocity_ratio,
        }
    }

    pub fn s(&self) -> f64 {
        self.data.s.unwrap_or(self.dim() as f64 / 2.0)
    }

    pub fn dt(&self, grid: &Grid) -> f64 {
        self.evolve.dt_factor * grid.min_dx()
    }

    /// Step count and step size covering `[0, t_end]` exactly.
    pub fn steps(&self, grid: &Grid, dt_factor: f64) -> (usize, f64) {
        let target = dt_factor * grid.min_dx();
        let steps = (self.evolve.t_end / target).ceil().max(1.0) as usize;
        (steps, self.evolve.t_end / steps as f64)
    }

    pub fn sweep_bands(&self, grid: &Grid) -> (i32, i32) {
        self.sweep.bands.unwrap_or((grid.k_min(), grid.k_max()))
    }

    pub fn sweep_dt_factor(&self) -> f64 {
        self.sweep.dt_factor.unwrap_or(self.evolve.dt_factor)
    }

    pub fn pairs(&self) -> Vec<MixedNormSpec> {
        self.norms
            .pairs
            .clone()
            .unwrap_or_else(|| default_pairs(self.dim()))
    }

    pub fn renorm_options(&self, grid: &Grid) -> RenormOptions {
        RenormOptions {
            k_cut: Some((grid.k_max() - self.renorm.k_cut_offset).max(grid.k_min())),
            depth: self.renorm.depth,
            k_ref: self.renorm.k_ref,
            stencil: self.evolve.stencil,
            orientation: self.renorm.orientation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(bad("grid.sizes is empty"));
        }
        if let Some(&s) = self.grid.sizes.iter().find(|s| !s.is_power_of_two() || **s < 8) {
            return Err(bad(format!("grid size {s} is not a power of two ≥ 8")));
        }
        let b = self.box_lengths();
        if b.len() != n || b.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(bad("grid.box must give one positive length per axis"));
        }
        if self.target.kind == TargetKind::FlatTorus && self.target.torus_dim == 0 {
            return Err(bad("target.torus_dim must be positive"));
        }
        let d = &self.data;
        if !(d.sigma > 0.0 && d.sigma < 0.5) {
            return Err(bad(format!("sigma = {} outside (0, 1/2)", d.sigma)));
        }
        if !(d.epsilon >= 0.0 && d.epsilon.is_finite()) {
            return Err(bad("data.epsilon must be finite and non-negative"));
        }
        if d.bands.0 > d.bands.1 {
            return Err(bad("data.bands must be ascending"));
        }
        if let Some(s) = d.s {
            if s < n as f64 / 2.0 {
                return Err(bad(format!("data.s = {s} below n/2")));
            }
        }
        let e = &self.evolve;
        let factors = std::iter::once(e.dt_factor).chain(self.sweep.dt_factor);
        for f in factors {
            if !(f > 0.0 && f <= 0.5) {
                return Err(bad(format!("dt factor {f} violates 0 < factor ≤ 0.5")));
            }
        }
        if !(e.guard_factor > 1.0) {
            return Err(bad("evolve.guard_factor must exceed 1"));
        }
        if !(e.t_end > 0.0 && e.t_end.is_finite()) || e.sample_every == 0 {
            return Err(bad("evolve.t_end must be positive and sample_every ≥ 1"));
        }
        let eps = &self.sweep.epsilons;
        if eps.len() < 2
            || eps.iter().any(|&x| !(x > 0.0 && x.is_finite()))
            || eps.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(bad("sweep.epsilons needs ≥ 2 positive values in ascending order"));
        }
        if let Some(pairs) = &self.norms.pairs {
            if pairs.is_empty() {
                return Err(bad("norms.pairs is empty"));
            }
            if let Some(p) = pairs.iter().find(|p| !p.is_admissible(n)) {
                return Err(bad(format!("{p} is not admissible for n = {n}")));
            }
        } else if default_pairs(n).is_empty() {
            return Err(bad(format!("no admissible default pairs for n = {n}")));
        }
        let grid = self.build_grid()?;
        let data = self.data_spec();
        for (lo, hi) in std::iter::once(data.bands).chain(self.sweep.bands) {
            if lo < grid.k_min() || hi > grid.k_max() {
                return Err(bad(format!(
                    "data bands [{lo}, {hi}] outside [{}, {}]",
                    grid.k_min(),
                    grid.k_max()
                )));
            }
        }
        self.renorm_options(&grid)
            .resolve(&grid)
            .map_err(|e| bad(format!("renorm: {e}")))?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON of everything except `seed` and `out`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("seed");
            m.remove("out");
        }
        let text = serde_json::to_string(&v).expect("value serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_seed_only() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.seed = 99;
        b.out = Some("x".into());
        assert_eq!(a.hash(), b.hash());
        b.data.epsilon = 0.06;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            "[grid]\nsizes = [48, 64]",
            "[data]\nsigma = 0.5",
            "[evolve]\ndt_factor = 0.6",
            "[sweep]\nepsilons = [0.04, 0.02]",
            "[norms]\npairs = [{ q = 2, r = 2 }]",
            "[renorm]\nk_cut_offset = 0",
            "unknown = 1",
        ] {
            let e = ExperimentConfig::from_toml(text).unwrap_err();
            assert!(matches!(e, LabError::Config(_)), "{text}: {e}");
        }
    }

    #[test]
    fn parses_partial_file() {
        let c = ExperimentConfig::from_toml(
            "seed = 4\n[target]\nkind = \"flat-torus\"\ntorus_dim = 3\n[norms]\npairs = [{ q = \"inf\", r = 2 }]",
        )
        .unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.target().dim(), 3);
        assert_eq!(c.pairs(), vec![MixedNormSpec::new(f64::INFINITY, 2.0)]);
    }
}
