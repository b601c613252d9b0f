use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};
use crate::grid::lp_norm;

/// A Lebesgue exponent in `[1, ∞]`; serializes `∞` as `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Exponent(pub f64);

impl Exponent {
    pub const INF: Exponent = Exponent(f64::INFINITY);

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_infinite(self) -> bool {
        self.0.is_infinite()
    }

    /// `1/p`, zero for `p = ∞`.
    pub fn reciprocal(self) -> f64 {
        if self.is_infinite() {
            0.0
        } else {
            1.0 / self.0
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl std::str::FromStr for Exponent {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinity" | "∞" => Ok(Self::INF),
            other => other
                .parse::<f64>()
                .map_err(|_| LabError::Config(format!("bad exponent '{other}'")))
                .and_then(|v| {
                    if v >= 1.0 {
                        Ok(Exponent(v))
                    } else {
                        Err(LabError::Config(format!("exponent {v} below 1")))
                    }
                }),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) if v >= 1.0 => Ok(Exponent(v)),
            Raw::Num(v) => Err(serde::de::Error::custom(format!("exponent {v} below 1"))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A time/space exponent pair `(q, r)` for `L^q_t L^r_x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub q: Exponent,
    pub r: Exponent,
}

impl MixedNormSpec {
    pub fn new(q: f64, r: f64) -> Self {
        Self {
            q: Exponent(q),
            r: Exponent(r),
        }
    }

    /// Strichartz admissibility `1/q + (n−1)/(2r) ≤ (n−1)/4`.
    pub fn is_admissible(&self, n: usize) -> bool {
        let nm1 = n as f64 - 1.0;
        self.q.value() >= 2.0
            && self.r.value() >= 2.0
            && self.q.reciprocal() + nm1 * self.r.reciprocal() / 2.0 <= nm1 / 4.0
    }
}

impl fmt::Display for MixedNormSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L^{}_t L^{}_x", self.q, self.r)
    }
}

/// Trapezoid weights for `m` uniform samples spaced `dt`.
pub fn trapezoid_weights(m: usize, dt: f64) -> Vec<f64> {
    match m {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..m)
            .map(|i| if i == 0 || i == m - 1 { 0.5 * dt } else { dt })
            .collect(),
    }
}

/// `L^q` in time of per-sample spatial norms, trapezoid rule.
pub fn time_norm(per_slice: &[f64], dt: f64, q: Exponent) -> f64 {
    if q.is_infinite() {
        return per_slice.iter().fold(0.0, |m, v| m.max(v.abs()));
    }
    let w = trapezoid_weights(per_slice.len(), dt);
    per_slice
        .iter()
        .zip(&w)
        .map(|(v, w)| w * v.abs().powf(q.value()))
        .sum::<f64>()
        .powf(1.0 / q.value())
}

/// `‖f‖_{L^q_t L^r_x}` for a uniformly sampled field, cell volume `dv`.
pub fn mixed_norm<S: AsRef<[f64]>>(slices: &[S], dt: f64, dv: f64, spec: MixedNormSpec) -> f64 {
    let per: Vec<f64> = slices
        .iter()
        .map(|s| lp_norm(s.as_ref(), dv, spec.r.value()))
        .collect();
    time_norm(&per, dt, spec.q)
}

/// `L¹_t L²_x`, the size of an error term.
pub fn error_norm<S: AsRef<[f64]>>(slices: &[S], dt: f64, dv: f64) -> f64 {
    mixed_norm(slices, dt, dv, MixedNormSpec::new(1.0, 2.0))
}
