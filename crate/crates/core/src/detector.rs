//! Detector regions: spatial intervals sensitive from t = 0 onward.

use crate::error::{Error, Result};

/// Interval detector on `[a, b]`; `a == b` encodes a point detector.
///
/// The detector is ideal and passive: it clicks the first time a trajectory
/// enters the interval, and it is sensitive from `t = 0` onward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorRegion {
    a: f64,
    b: f64,
}

impl DetectorRegion {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidDetector(format!("edges must be finite, got [{a}, {b}]")));
        }
        if a > b {
            return Err(Error::InvalidDetector(format!("need a <= b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn point(a: f64) -> Result<Self> {
        Self::interval(a, a)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn is_point(&self) -> bool {
        self.a == self.b
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }
}
