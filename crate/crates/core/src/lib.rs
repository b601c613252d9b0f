//! Pseudo-spectral laboratory for wave maps into parallelizable targets.

pub mod config;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod norms;
pub mod renorm;
pub mod runner;
pub mod stencil;
pub mod wavemap;

pub use error::{LabError, Result};
pub use geometry::{FrameData, TargetInstance, TargetKind};
pub use grid::{BumpProfile, Grid, Projection, ScalarField};
pub use stencil::TimeStencil;
