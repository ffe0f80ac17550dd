//! Point-to-point distances.
//!
//! Every metric is computed as a left-to-right fold over per-coordinate
//! differences `x[k] - y[k]`. Squaring or taking the absolute value makes each
//! term sign-symmetric, so `distance(x, y)` and `distance(y, x)` agree bit for
//! bit and the row kernels used by the block scans reproduce the scalar value
//! exactly.
//!
//! Euclidean runs order pairs by the squared distance; the square root is only
//! applied when a distance is reported.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    #[default]
    Euclidean,
    SquaredEuclidean,
    Manhattan,
    Chebyshev,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Euclidean,
        MetricKind::SquaredEuclidean,
        MetricKind::Manhattan,
        MetricKind::Chebyshev,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::SquaredEuclidean => "squared-euclidean",
            MetricKind::Manhattan => "manhattan",
            MetricKind::Chebyshev => "chebyshev",
        }
    }

    /// Reported distance between two points.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { left: x.len(), right: y.len() });
        }
        Ok(self.to_reported(self.internal(x, y)))
    }

    /// Value used for ordering and thresholds. Equal to the reported distance
    /// except for euclidean, where it is the squared distance.
    #[inline]
    pub fn internal(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), y.len());
        let mut acc = 0.0;
        match self {
            MetricKind::Euclidean | MetricKind::SquaredEuclidean => {
                for (a, b) in x.iter().zip(y) {
                    let t = a - b;
                    acc += t * t;
                }
            }
            MetricKind::Manhattan => {
                for (a, b) in x.iter().zip(y) {
                    acc += (a - b).abs();
                }
            }
            MetricKind::Chebyshev => {
                for (a, b) in x.iter().zip(y) {
                    acc = f64::max(acc, (a - b).abs());
                }
            }
        }
        acc
    }

    #[inline]
    pub fn to_reported(&self, internal: f64) -> f64 {
        match self {
            MetricKind::Euclidean => internal.sqrt(),
            _ => internal,
        }
    }

    /// Threshold on internal values equivalent to `reported <= dmax`: a pair
    /// is rejected by `internal > threshold` exactly when its reported
    /// distance exceeds `dmax`.
    pub fn effective_threshold(&self, dmax: f64) -> Result<f64> {
        if !(dmax >= 0.0) {
            return Err(Error::InvalidConstraint(format!(
                "dmax must be nonnegative, got {dmax}"
            )));
        }
        match self {
            MetricKind::Euclidean => {
                if dmax.is_infinite() {
                    return Ok(f64::INFINITY);
                }
                // Largest t with sqrt(t) <= dmax; dmax * dmax may be off by an ulp.
                let mut t = dmax * dmax;
                while t > 0.0 && t.sqrt() > dmax {
                    t = t.next_down();
                }
                while t.next_up().is_finite() && t.next_up().sqrt() <= dmax {
                    t = t.next_up();
                }
                Ok(t)
            }
            _ => Ok(dmax),
        }
    }

    /// Folds one coordinate into a row of partial distances:
    /// `acc[j] <- acc[j] (+) term(x - column[j])`.
    #[inline]
    pub(crate) fn accumulate(&self, acc: &mut [f64], x: f64, column: &[f64]) {
        debug_assert_eq!(acc.len(), column.len());
        match self {
            MetricKind::Euclidean | MetricKind::SquaredEuclidean => {
                for (s, &c) in acc.iter_mut().zip(column) {
                    let t = x - c;
                    *s += t * t;
                }
            }
            MetricKind::Manhattan => {
                for (s, &c) in acc.iter_mut().zip(column) {
                    *s += (x - c).abs();
                }
            }
            MetricKind::Chebyshev => {
                for (s, &c) in acc.iter_mut().zip(column) {
                    *s = f64::max(*s, (x - c).abs());
                }
            }
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MetricKind::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown metric '{s}' (expected euclidean, squared-euclidean, manhattan or chebyshev)"
                ))
            })
    }
}
