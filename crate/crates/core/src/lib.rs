//! One-dimensional quantum dynamics with detector statistics computed from
//! boundary currents.
//!
//! The library propagates a wavefunction under the reduced-unit Schrödinger
//! equation (ħ = m = 1), records the probability current at the edges of a
//! detector region, and converts those two time series into the cumulative
//! detection probability, the conditional arrival-time distribution, and the
//! arrival density — using only running maxima of the integrated boundary
//! currents, no trajectories required. An independent Monte-Carlo ensemble of
//! Bohmian trajectories (`x' = j/ρ`) provides a cross-check of the same
//! quantities, and scenario presets bundle the whole pipeline behind a
//! config-driven runner.

// Negated comparisons like `!(drift <= limit)` are used on purpose: they
// treat NaN as a violation instead of silently passing it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrival;
pub mod detector;
pub mod emit;
pub mod error;
pub mod field;
pub mod grid;
pub mod observables;
pub mod packet;
pub mod potential;
pub mod propagator;
pub mod scenario;
pub mod trajectory;

pub use arrival::{
    arrival_density, arrival_moments, compute_arrival, compute_arrival_with, conditionalize,
    conditionalize_with, cumulative_current, detection_probability, point_detection_probability,
    running_max, ArrivalMoments, ArrivalResult, Conditioned, CumulativeSeries, TailCheck,
};
pub use detector::DetectorRegion;
pub use error::{Error, ErrorClass, Result};
pub use field::{RealField, WaveField};
pub use grid::{Grid1D, TimeGrid};
pub use observables::{
    current_at, current_density, interval_probability, probability_density,
    record_boundary_currents, BoundaryCurrentRecorder, BoundaryRecord,
};
pub use packet::{gaussian_packet, superpose, GaussianPacketParams};
pub use potential::{theta, PotentialSpec};
pub use propagator::{
    propagate, propagate_reverse, PropagationRecorder, INITIAL_NORM_TOLERANCE, NORM_DRIFT_LIMIT,
};
pub use emit::{
    read_arrival_csv, read_boundary_csv, read_empirical_csv, write_run_artifacts, ArrivalCurve,
    RunArtifacts,
};
pub use scenario::{
    compare_detection, config_hash, execute, execute_oracle_only, preset, ComparisonReport,
    OracleOutcome, RunOutcome, ScenarioConfig, COMPARISON_SIGMA_FACTOR, PRESET_TAGS,
};
pub use trajectory::{
    empirical_detection_cdf, first_entry_time, integrate_trajectory, integrate_trajectory_with,
    run_ensemble, sample_initial_positions, velocity, velocity_with, DensitySampler, EmpiricalCdf,
    EnsembleResult, FieldHistory, FieldHistoryRecorder, Trajectory, TrajectoryOptions,
    TrajectoryStatus, ABORT_WARNING_FRACTION, RHO_FLOOR,
};
