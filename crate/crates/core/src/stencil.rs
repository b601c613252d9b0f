//! Centered finite-difference stencils in time over uniformly sampled slices.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Accuracy order of the centered time stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeStencil {
    /// Three-point, `O(dt²)`.
    Second,
    /// Five-point, `O(dt⁴)`.
    #[default]
    Fourth,
}

impl TimeStencil {
    /// Number of slices needed on each side of the evaluation point.
    pub fn half_width(self) -> usize {
        match self {
            TimeStencil::Second => 1,
            TimeStencil::Fourth => 2,
        }
    }

    /// Fewest slices for which at least one interior point exists.
    pub fn min_slices(self) -> usize {
        2 * self.half_width() + 1
    }

    /// Offsets and weights of `d/dt`, to be divided by `dt`.
    pub fn first(self) -> &'static [(isize, f64)] {
        match self {
            TimeStencil::Second => &[(-1, -0.5), (1, 0.5)],
            TimeStencil::Fourth => &[
                (-2, 1.0 / 12.0),
                (-1, -8.0 / 12.0),
                (1, 8.0 / 12.0),
                (2, -1.0 / 12.0),
            ],
        }
    }

    /// Offsets and weights of `d²/dt²`, to be divided by `dt²`.
    pub fn second(self) -> &'static [(isize, f64)] {
        match self {
            TimeStencil::Second => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            TimeStencil::Fourth => &[
                (-2, -1.0 / 12.0),
                (-1, 16.0 / 12.0),
                (0, -30.0 / 12.0),
                (1, 16.0 / 12.0),
                (2, -1.0 / 12.0),
            ],
        }
    }

    /// Interior slice indices at which the stencil can be evaluated.
    pub fn interior(self, slices: usize) -> Result<std::ops::Range<usize>> {
        if slices < self.min_slices() {
            return Err(LabError::TooFewSlices {
                got: slices,
                need: self.min_slices(),
            });
        }
        let h = self.half_width();
        Ok(h..slices - h)
    }
}

/// Applies a stencil at slice `i` to a sequence of equally long arrays.
pub fn apply<'a, F>(weights: &[(isize, f64)], i: usize, scale: f64, sample: F) -> Vec<f64>
where
    F: Fn(usize) -> &'a [f64],
{
    let len = sample(i).len();
    let mut out = vec![0.0; len];
    for &(off, w) in weights {
        let s = sample((i as isize + off) as usize);
        for (o, v) in out.iter_mut().zip(s) {
            *o += w * v;
        }
    }
    out.iter_mut().for_each(|o| *o *= scale);
    out
}
