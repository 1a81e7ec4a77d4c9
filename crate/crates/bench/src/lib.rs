//! Fixture builders shared by the criterion benchmark targets.
//!
//! Each builder returns a small, deterministic input sized so a single
//! kernel invocation stays in the sub-millisecond to low-millisecond range.

use bohmtime::{
    propagate, superpose, BoundaryRecord, DetectorRegion, FieldHistory, FieldHistoryRecorder,
    GaussianPacketParams, Grid1D, PotentialSpec, RealField, TimeGrid, WaveField,
};

/// A moderate free-packet scene for the propagation benchmark:
/// 2001 grid nodes and a 40-step window.
pub fn propagation_scene() -> (WaveField, PotentialSpec, TimeGrid) {
    let grid = Grid1D::new(-10.0, 10.0, 2001).expect("valid grid");
    let packet = GaussianPacketParams::new(3.0, -3.0, 0.8, 1.0).expect("valid packet");
    let initial = superpose(std::slice::from_ref(&packet), &grid, 0.0).expect("normalizable");
    let time = TimeGrid::new(2.5e-3, 40).expect("valid time grid");
    (initial, PotentialSpec::Free, time)
}

/// A synthetic boundary record for the arrival pipeline: a Gaussian inflow
/// pulse at the left edge and a weak steady outflow at the right edge,
/// sampled at `samples` time points.
pub fn boundary_pulse(samples: usize) -> BoundaryRecord {
    assert!(samples >= 2, "need at least two samples");
    let detector = DetectorRegion::interval(-1.0, 1.0).expect("valid interval");
    let t_end = 6.0;
    let dt = t_end / (samples - 1) as f64;
    let mut record = BoundaryRecord::new(detector);
    for k in 0..samples {
        let t = k as f64 * dt;
        let u = (t - 2.0) / 0.5;
        record.times.push(t);
        record.j_a.push(0.5 * (-u * u).exp());
        record.j_b.push(0.01);
    }
    record
}

/// A short real propagation recorded as a strided field history, for the
/// trajectory-integration and sampling benchmarks: 801 nodes, 61 snapshots.
pub fn short_history() -> FieldHistory {
    let grid = Grid1D::new(-10.0, 10.0, 801).expect("valid grid");
    let packet = GaussianPacketParams::new(2.0, -4.0, 1.0, 1.0).expect("valid packet");
    let initial = superpose(std::slice::from_ref(&packet), &grid, 0.0).expect("normalizable");
    let time = TimeGrid::new(5e-3, 600).expect("valid time grid");
    let mut recorder = FieldHistoryRecorder::new(10, time.n_steps()).expect("valid stride");
    propagate(&initial, &PotentialSpec::Free, &time, &mut [&mut recorder]).expect("stable run");
    recorder.into_history().expect("snapshots recorded")
}

/// The initial density of [`short_history`], for the sampling benchmark.
pub fn initial_density() -> RealField {
    short_history().initial_density()
}
