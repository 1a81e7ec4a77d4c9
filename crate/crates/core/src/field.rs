//! Wavefunction and real-scalar fields sampled on a grid at one instant.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Complex wavefunction samples on a [`Grid1D`] at a fixed time.
///
/// The discrete norm is `sum_k |psi_k|^2 dx`. Domains are chosen wide enough
/// that the amplitude at the walls is negligible, so the rectangle sum and
/// any interval quadrature agree to well below the tolerances used here.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    grid: Grid1D,
    time: f64,
    values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: Grid1D, time: f64, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "value count {} does not match grid nodes {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, time, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub(crate) fn set_time(&mut self, t: f64) {
        self.time = t;
    }

    /// Discrete norm squared, `sum_k |psi_k|^2 dx`.
    pub fn norm_sq(&self) -> f64 {
        let dx = self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Rescale so the discrete norm is exactly 1.
    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidField(format!("cannot normalize field with norm {n}")));
        }
        let inv = 1.0 / n;
        for v in &mut self.values {
            *v *= inv;
        }
        Ok(())
    }
}

/// Real scalar samples (density or current) on a [`Grid1D`] at a fixed time.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid1D,
    time: f64,
    values: Vec<f64>,
}

impl RealField {
    pub fn new(grid: Grid1D, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::InvalidField(format!(
                "value count {} does not match grid nodes {}",
                values.len(),
                grid.n_points()
            )));
        }
        Ok(Self { grid, time, values })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Linear interpolation at `x` (clamped to the grid).
    pub fn sample(&self, x: f64) -> f64 {
        let (k, frac) = self.grid.locate(x);
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }
}
