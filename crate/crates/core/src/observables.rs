//! Local observables of a wavefunction: probability density, probability
//! current, and interval probabilities, plus a recorder that samples the
//! current at the detector edges on every propagation step.
//!
//! Conventions (reduced units, `hbar = m = 1`):
//! - density `rho = |psi|^2`,
//! - current `j = Im(conj(psi) d_x psi)`,
//! - spatial derivatives use second-order central differences in the
//!   interior and second-order one-sided stencils at the two wall nodes.

use num_complex::Complex64;

use crate::detector::DetectorRegion;
use crate::error::{Error, Result};
use crate::field::{RealField, WaveField};
use crate::propagator::PropagationRecorder;

/// Probability density `rho_k = |psi_k|^2` on the field's grid.
pub fn probability_density(field: &WaveField) -> RealField {
    let values = field.values().iter().map(|v| v.norm_sqr()).collect();
    RealField::new(field.grid().clone(), field.time(), values)
        .expect("density inherits the field's grid length")
}

/// Spatial derivative of `psi` at node `k`: central in the interior,
/// second-order one-sided at the walls.
fn derivative_at_node(field: &WaveField, k: usize) -> Complex64 {
    let v = field.values();
    let n = v.len();
    let inv_2dx = 0.5 / field.grid().dx();
    if k == 0 {
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv_2dx
    } else if k == n - 1 {
        (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv_2dx
    } else {
        (v[k + 1] - v[k - 1]) * inv_2dx
    }
}

/// Probability current at a single node.
fn current_at_node(field: &WaveField, k: usize) -> f64 {
    (field.values()[k].conj() * derivative_at_node(field, k)).im
}

/// Probability current `j = Im(conj(psi) d_x psi)` on the field's grid.
pub fn current_density(field: &WaveField) -> RealField {
    let n = field.grid().n_points();
    let values = (0..n).map(|k| current_at_node(field, k)).collect();
    RealField::new(field.grid().clone(), field.time(), values)
        .expect("current inherits the field's grid length")
}

/// Probability current at position `x`, by linear interpolation between the
/// two adjacent nodal currents. `x` must lie within the grid.
pub fn current_at(field: &WaveField, x: f64) -> Result<f64> {
    let grid = field.grid();
    if !grid.contains(x) {
        return Err(Error::InvalidDetector(format!(
            "sample position {x} outside grid [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    let (k, frac) = grid.locate(x);
    let ja = current_at_node(field, k);
    let jb = current_at_node(field, k + 1);
    Ok(ja * (1.0 - frac) + jb * frac)
}

/// Probability that the particle is in `[a, b]` at the field's time: the
/// exact integral of the piecewise-linear interpolant of `|psi|^2` over
/// `[a, b]`, including partial cells at both ends. A zero-width interval
/// (`a == b`, a point detector) yields 0.
pub fn interval_probability(field: &WaveField, a: f64, b: f64) -> Result<f64> {
    let grid = field.grid();
    if !(a <= b) {
        return Err(Error::InvalidDetector(format!(
            "interval edges must satisfy a <= b, got [{a}, {b}]"
        )));
    }
    if !grid.contains(a) || !grid.contains(b) {
        return Err(Error::InvalidDetector(format!(
            "interval [{a}, {b}] extends outside grid [{}, {}]",
            grid.x_min(),
            grid.x_max()
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let dx = grid.dx();
    let v = field.values();
    let rho = |k: usize| v[k].norm_sqr();
    let (ka, fa) = grid.locate(a);
    let (kb, fb) = grid.locate(b);
    // Integral of the linear interpolant over fraction range [s1, s2] of cell k.
    let cell_part = |k: usize, s1: f64, s2: f64| -> f64 {
        let lo = rho(k);
        let hi = rho(k + 1);
        dx * (lo * (s2 - s1) + 0.5 * (hi - lo) * (s2 * s2 - s1 * s1))
    };
    if ka == kb {
        return Ok(cell_part(ka, fa, fb));
    }
    let mut total = cell_part(ka, fa, 1.0);
    for k in ka + 1..kb {
        total += 0.5 * (rho(k) + rho(k + 1)) * dx;
    }
    total += cell_part(kb, 0.0, fb);
    Ok(total)
}

/// Time series of the probability current at the two detector edges.
///
/// `j_a[i]` and `j_b[i]` are the currents at the left and right detector edge
/// at `times[i]`. For a point detector both series are identical.
#[derive(Debug, Clone)]
pub struct BoundaryRecord {
    pub detector: DetectorRegion,
    pub times: Vec<f64>,
    pub j_a: Vec<f64>,
    pub j_b: Vec<f64>,
}

impl BoundaryRecord {
    pub fn new(detector: DetectorRegion) -> Self {
        Self { detector, times: Vec::new(), j_a: Vec::new(), j_b: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Samples the boundary currents of a detector region at every propagation
/// step (the propagator invokes recorders on the initial state as well, so
/// the series always starts at the field's initial time).
#[derive(Debug, Clone)]
pub struct BoundaryCurrentRecorder {
    record: BoundaryRecord,
}

/// Recorder that captures `j(t, a)` and `j(t, b)` at every step of a run.
pub fn record_boundary_currents(detector: DetectorRegion) -> BoundaryCurrentRecorder {
    BoundaryCurrentRecorder::new(detector)
}

impl BoundaryCurrentRecorder {
    pub fn new(detector: DetectorRegion) -> Self {
        Self { record: BoundaryRecord::new(detector) }
    }

    pub fn detector(&self) -> &DetectorRegion {
        &self.record.detector
    }

    pub fn record(&self) -> &BoundaryRecord {
        &self.record
    }

    pub fn into_record(self) -> BoundaryRecord {
        self.record
    }

    fn sample(&mut self, field: &WaveField) -> Result<()> {
        let det = self.record.detector;
        let ja = current_at(field, det.a())?;
        let jb = if det.is_point() { ja } else { current_at(field, det.b())? };
        self.record.times.push(field.time());
        self.record.j_a.push(ja);
        self.record.j_b.push(jb);
        Ok(())
    }
}

impl PropagationRecorder for BoundaryCurrentRecorder {
    fn on_step(&mut self, _step: usize, field: &WaveField) -> Result<()> {
        self.sample(field)
    }
}
