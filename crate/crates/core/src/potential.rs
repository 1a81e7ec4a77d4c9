//! Potential energy specifications sampled pointwise on the grid.

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Step function with the convention `theta(0) = 1`.
#[inline]
pub fn theta(s: f64) -> f64 {
    if s >= 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Piecewise-constant potential in reduced units.
///
/// Discontinuities are sampled pointwise at nodes with `theta(0) = 1` and no
/// smoothing, so a barrier covers `[a, b)` and a step covers `[x_s, inf)`.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Free,
    Barrier { a: f64, b: f64, height: f64 },
    Step { x_s: f64, height: f64 },
    /// One value per node of the grid it was tabulated on.
    Tabulated { grid: Grid1D, values: Vec<f64> },
}

impl PotentialSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::Barrier { a, b, height } => {
                if !(a.is_finite() && b.is_finite() && height.is_finite()) {
                    return Err(Error::InvalidPotential("barrier parameters must be finite".into()));
                }
                if a >= b {
                    return Err(Error::InvalidPotential(format!(
                        "barrier needs a < b, got [{a}, {b}]"
                    )));
                }
                Ok(())
            }
            PotentialSpec::Step { x_s, height } => {
                if !(x_s.is_finite() && height.is_finite()) {
                    return Err(Error::InvalidPotential("step parameters must be finite".into()));
                }
                Ok(())
            }
            PotentialSpec::Tabulated { grid, values } => {
                if values.len() != grid.n_points() {
                    return Err(Error::InvalidPotential(format!(
                        "tabulated values ({}) must match grid nodes ({})",
                        values.len(),
                        grid.n_points()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidPotential("tabulated values must be finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Potential energy at `x`; tabulated variants report the nearest node.
    pub fn evaluate(&self, x: f64) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::Barrier { a, b, height } => height * (theta(x - a) - theta(x - b)),
            PotentialSpec::Step { x_s, height } => height * theta(x - x_s),
            PotentialSpec::Tabulated { grid, values } => {
                let (k, frac) = grid.locate(x);
                if frac < 0.5 {
                    values[k]
                } else {
                    values[k + 1]
                }
            }
        }
    }

    /// Sample the potential at every node of `grid`.
    ///
    /// A tabulated potential must have been tabulated on the same grid.
    pub fn values_on(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        self.validate()?;
        if let PotentialSpec::Tabulated { grid: own, values } = self {
            if own != grid {
                return Err(Error::InvalidPotential(
                    "tabulated potential was sampled on a different grid".into(),
                ));
            }
            return Ok(values.clone());
        }
        Ok(grid.positions().map(|x| self.evaluate(x)).collect())
    }
}
