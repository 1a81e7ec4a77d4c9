//! Uniform spatial and temporal discretizations (reduced units throughout).

use crate::error::{Error, Result};

/// Uniform spatial grid with `n_points` nodes on `[x_min, x_max]`.
///
/// Node `k` sits at `x_min + k*dx` with `dx = (x_max - x_min)/(n_points - 1)`;
/// the last node is pinned to `x_max` exactly so that both endpoints are
/// reproduced bit-for-bit. Positions are a pure function of the three
/// construction parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_points: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidGrid(format!(
                "bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "x_min must be below x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < 3 {
            return Err(Error::InvalidGrid(format!(
                "need at least 3 nodes, got {n_points}"
            )));
        }
        let dx = (x_max - x_min) / (n_points - 1) as f64;
        Ok(Self { x_min, x_max, n_points, dx })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Position of node `k`.
    pub fn position(&self, k: usize) -> f64 {
        debug_assert!(k < self.n_points);
        if k == self.n_points - 1 {
            self.x_max
        } else {
            self.x_min + k as f64 * self.dx
        }
    }

    /// All node positions in order.
    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|k| self.position(k))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Cell index and fractional offset for linear interpolation at `x`.
    ///
    /// The result is clamped into the grid, so callers that require `x`
    /// strictly inside must check [`Grid1D::contains`] themselves.
    pub fn locate(&self, x: f64) -> (usize, f64) {
        let u = (x - self.x_min) / self.dx;
        let k = (u.floor() as isize).clamp(0, self.n_points as isize - 2) as usize;
        let frac = ((x - self.position(k)) / self.dx).clamp(0.0, 1.0);
        (k, frac)
    }
}

/// Uniform time axis starting at `t = 0`, the instant the detector becomes
/// sensitive. `n_steps = 0` denotes the degenerate window in which recorders
/// see only the initial frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, n_steps: usize) -> Result<Self> {
        if !dt.is_finite() || dt <= 0.0 {
            return Err(Error::InvalidTimeAxis(format!(
                "dt must be finite and positive, got {dt}"
            )));
        }
        Ok(Self { dt, n_steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn t_start(&self) -> f64 {
        0.0
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn time(&self, step: usize) -> f64 {
        step as f64 * self.dt
    }
}
