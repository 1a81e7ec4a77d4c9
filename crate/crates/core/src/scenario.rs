//! Scenario configuration, presets, and the full run pipeline.
//!
//! A [`ScenarioConfig`] describes one experiment in reduced units
//! (`hbar = m = 1`): grid, time window, potential, initial packets, detector,
//! and ensemble settings. [`execute`] turns it into an [`ArrivalResult`] via
//! the boundary-current route and — unless the oracle is disabled — an
//! independent trajectory-ensemble estimate plus a [`ComparisonReport`]
//! checking that the two routes agree within binomial error.
//!
//! Configs serialize to/from TOML (sectioned key-value text, human-diffable);
//! the SHA-256 hash of the canonical serialization stamps every artifact so
//! outputs can be traced back to their exact inputs.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arrival::{compute_arrival, ArrivalResult};
use crate::detector::DetectorRegion;
use crate::error::{Error, Result};
use crate::grid::{Grid1D, TimeGrid};
use crate::observables::{interval_probability, record_boundary_currents, BoundaryRecord};
use crate::packet::{superpose, GaussianPacketParams};
use crate::potential::PotentialSpec;
use crate::propagator::{propagate, PropagationRecorder};
use crate::trajectory::{
    run_ensemble, EmpiricalCdf, EnsembleResult, FieldHistoryRecorder, TrajectoryOptions,
};

/// Default time step as a fraction of `dx^2` when the config leaves `dt`
/// unset. The scheme is unconditionally stable; this default keeps the
/// temporal discretization error subordinate to the spatial one.
pub const DEFAULT_TIME_STEP_FACTOR: f64 = 0.5;

/// Agreement band half-width in standard deviations for the cross-check.
pub const COMPARISON_SIGMA_FACTOR: f64 = 3.0;

/// Detection-probability band whose interior supplies evaluation times.
pub const COMPARISON_BAND: (f64, f64) = (0.02, 0.98);

/// Minimum number of in-band evaluation times before the band is relaxed.
pub const COMPARISON_MIN_EVAL_TIMES: usize = 20;

/// Complete description of one run, in reduced units.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Free-form tag naming the scenario (presets use their own name).
    pub scenario: String,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub detector: DetectorConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
    pub packets: Vec<PacketConfig>,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n_points: usize,
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid1D> {
        Grid1D::new(self.x_min, self.x_max, self.n_points)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    /// Step size; defaults to `DEFAULT_TIME_STEP_FACTOR * dx^2`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// End of the window; the window always starts at 0 and must hold a
    /// whole number of steps.
    pub t_end: f64,
}

impl TimeConfig {
    pub fn build(&self, grid: &Grid1D) -> Result<TimeGrid> {
        let dt = self.dt.unwrap_or(DEFAULT_TIME_STEP_FACTOR * grid.dx() * grid.dx());
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidTimeAxis(format!("dt must be positive, got {dt}")));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidTimeAxis(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        let steps = self.t_end / dt;
        let n_steps = steps.round();
        if (steps - n_steps).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::InvalidTimeAxis(format!(
                "t_end {} is not a whole number of steps of dt {dt}",
                self.t_end
            )));
        }
        TimeGrid::new(dt, n_steps as usize)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Left edge, or the detector point when `b` is omitted.
    pub a: f64,
    /// Right edge; omit for a point detector.
    #[serde(default)]
    pub b: Option<f64>,
}

impl DetectorConfig {
    pub fn build(&self) -> Result<DetectorRegion> {
        match self.b {
            Some(b) => DetectorRegion::interval(self.a, b),
            None => DetectorRegion::point(self.a),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Free,
    Barrier {
        a: f64,
        b: f64,
        height: f64,
    },
    Step {
        x_s: f64,
        height: f64,
    },
}

impl PotentialConfig {
    pub fn build(&self) -> PotentialSpec {
        match *self {
            PotentialConfig::Free => PotentialSpec::Free,
            PotentialConfig::Barrier { a, b, height } => PotentialSpec::Barrier { a, b, height },
            PotentialConfig::Step { x_s, height } => PotentialSpec::Step { x_s, height },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PacketConfig {
    /// Mean wavenumber (group velocity in reduced units).
    pub k0: f64,
    /// Initial center.
    pub x0: f64,
    /// Width parameter (position standard deviation at t = 0).
    pub d: f64,
    /// Superposition weight (the sum is renormalized).
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Trajectory count for the Monte-Carlo route.
    pub samples: usize,
    /// RNG seed for initial-position sampling.
    pub seed: u64,
    /// Propagation steps between recorded field snapshots.
    pub stride: usize,
    /// Whether the trajectory oracle runs at all.
    pub oracle: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self { samples: 2000, seed: 1, stride: 25, oracle: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Artifact directory; defaults to `runs/<scenario>`.
    pub dir: Option<String>,
}

impl ScenarioConfig {
    /// Parse a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical TOML serialization (also the hashing pre-image).
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("config serialization: {e}")))
    }

    /// Check every invariant: buildable grid/time/detector/potential, at
    /// least one packet, and all referenced positions inside the grid.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.time.build(&grid)?;
        let det = self.detector.build()?;
        if !grid.contains(det.a()) || !grid.contains(det.b()) {
            return Err(Error::InvalidConfig(format!(
                "detector [{}, {}] must lie inside the grid [{}, {}]",
                det.a(),
                det.b(),
                grid.x_min(),
                grid.x_max()
            )));
        }
        let pot = self.potential.build();
        pot.validate()?;
        match pot {
            PotentialSpec::Barrier { a, b, .. } if !grid.contains(a) || !grid.contains(b) => {
                return Err(Error::InvalidConfig("barrier must lie inside the grid".into()));
            }
            PotentialSpec::Step { x_s, .. } if !grid.contains(x_s) => {
                return Err(Error::InvalidConfig("step edge must lie inside the grid".into()));
            }
            _ => {}
        }
        if self.packets.is_empty() {
            return Err(Error::InvalidConfig("at least one packet is required".into()));
        }
        for p in &self.packets {
            if !grid.contains(p.x0) {
                return Err(Error::InvalidConfig(format!(
                    "packet center {} must lie inside the grid",
                    p.x0
                )));
            }
        }
        self.packet_params()?;
        if self.ensemble.stride == 0 {
            return Err(Error::InvalidConfig("snapshot stride must be at least 1".into()));
        }
        if self.ensemble.oracle && self.ensemble.samples == 0 {
            return Err(Error::InvalidConfig("ensemble needs at least 1 sample".into()));
        }
        Ok(())
    }

    pub fn packet_params(&self) -> Result<Vec<GaussianPacketParams>> {
        self.packets
            .iter()
            .map(|p| GaussianPacketParams::new(p.k0, p.x0, p.d, p.weight))
            .collect()
    }

    /// Artifact directory for this config.
    pub fn output_dir(&self) -> String {
        match &self.output.dir {
            Some(dir) => dir.clone(),
            None => format!("runs/{}", self.scenario),
        }
    }
}

/// SHA-256 hash (hex) of the canonical TOML serialization.
pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let text = config.to_toml()?;
    let digest = Sha256::digest(text.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
    }
    Ok(hex)
}

/// Known preset tags.
pub const PRESET_TAGS: [&str; 3] = ["free_six_gaussians", "barrier", "step"];

/// Fully populated config for a named preset.
pub fn preset(tag: &str) -> Result<ScenarioConfig> {
    match tag {
        "free_six_gaussians" => Ok(free_six_gaussians()),
        "barrier" => Ok(barrier()),
        "step" => Ok(step()),
        _ => Err(Error::InvalidConfig(format!(
            "unknown preset '{tag}' (known presets: {})",
            PRESET_TAGS.join(", ")
        ))),
    }
}

/// Six free Gaussians — three right-movers (weight sqrt(1/9)) at
/// -4, -12, -20 and three left-movers (weight sqrt(2/9)) at 4, 12, 20 —
/// watched by a point detector at -2.5. The trains cross the detector from
/// both sides, producing a staircase P with genuine plateaus.
pub fn free_six_gaussians() -> ScenarioConfig {
    let w_right = (1.0f64 / 9.0).sqrt();
    let w_left = (2.0f64 / 9.0).sqrt();
    let packet = |k0: f64, x0: f64, weight: f64| PacketConfig { k0, x0, d: 1.0, weight };
    ScenarioConfig {
        scenario: "free_six_gaussians".into(),
        grid: GridConfig { x_min: -64.0, x_max: 64.0, n_points: 25_601 },
        time: TimeConfig { dt: Some(1e-3), t_end: 7.0 },
        detector: DetectorConfig { a: -2.5, b: None },
        potential: PotentialConfig::Free,
        packets: vec![
            packet(5.0, -4.0, w_right),
            packet(5.0, -12.0, w_right),
            packet(5.0, -20.0, w_right),
            packet(-5.0, 4.0, w_left),
            packet(-5.0, 12.0, w_left),
            packet(-5.0, 20.0, w_left),
        ],
        ensemble: EnsembleConfig::default(),
        output: OutputConfig::default(),
    }
}

/// One packet at the barrier-top energy (`k0^2/2` equals the barrier
/// height) launched from far left; the detector is the barrier region
/// itself. Packet placement keeps the initial detector overlap below 1e-6
/// (it is ~1e-16). Parameters are library defaults chosen to reproduce the
/// qualitative split into transmitted and reflected trains.
pub fn barrier() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "barrier".into(),
        grid: GridConfig { x_min: -100.0, x_max: 100.0, n_points: 10_001 },
        time: TimeConfig { dt: Some(5e-3), t_end: 40.0 },
        detector: DetectorConfig { a: 0.0, b: Some(2.0) },
        potential: PotentialConfig::Barrier { a: 0.0, b: 2.0, height: 0.5 },
        packets: vec![PacketConfig { k0: 1.0, x0: -20.0, d: 2.5, weight: 1.0 }],
        ensemble: EnsembleConfig { stride: 20, ..EnsembleConfig::default() },
        output: OutputConfig::default(),
    }
}

/// Total reflection at a potential step of height 0.5 (the packet energy
/// `k0^2/2 = 0.18` is below it). The detector interval starts with a
/// substantial fraction of the packet inside (P(0) well above 0) and the
/// reflected train sweeps the rest through it, driving N toward 1.
/// Parameters are library defaults reproducing that qualitative picture.
pub fn step() -> ScenarioConfig {
    ScenarioConfig {
        scenario: "step".into(),
        grid: GridConfig { x_min: -145.0, x_max: 45.0, n_points: 9_501 },
        time: TimeConfig { dt: Some(5e-3), t_end: 110.0 },
        detector: DetectorConfig { a: -20.0, b: Some(-2.0) },
        potential: PotentialConfig::Step { x_s: 0.0, height: 0.5 },
        packets: vec![PacketConfig { k0: 0.6, x0: -18.0, d: 6.0, weight: 1.0 }],
        ensemble: EnsembleConfig { stride: 25, ..EnsembleConfig::default() },
        output: OutputConfig::default(),
    }
}

/// Agreement report between the boundary-current P and the Monte-Carlo
/// empirical CDF.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ComparisonReport {
    /// Number of evaluation times judged.
    pub eval_count: usize,
    /// Trajectories behind the empirical CDF.
    pub samples: usize,
    /// Band half-width in standard deviations (3).
    pub sigma_factor: f64,
    /// Detection-probability band selecting evaluation times.
    pub band: (f64, f64),
    /// True when fewer than the minimum in-band times existed and all
    /// matched times were used instead.
    pub band_relaxed: bool,
    /// Largest |P - P_hat| over the evaluation times.
    pub max_abs_diff: f64,
    /// Time where the largest deviation occurred.
    pub worst_time: f64,
    /// Largest |P - P_hat| / sigma (infinite if sigma is 0 there and the
    /// difference is not).
    pub max_sigma_ratio: f64,
    /// All evaluation times within `sigma_factor` standard deviations.
    pub pass: bool,
}

/// Judge the empirical CDF against the boundary-current detection
/// probability at shared times: evaluation times are those where `p` lies
/// inside [`COMPARISON_BAND`] (relaxed to all shared times when fewer than
/// [`COMPARISON_MIN_EVAL_TIMES`] qualify), and each must satisfy
/// `|P - P_hat| <= 3 sqrt(P (1-P) / samples)`.
pub fn compare_detection(times: &[f64], p: &[f64], cdf: &EmpiricalCdf) -> Result<ComparisonReport> {
    if times.len() != p.len() {
        return Err(Error::SeriesMismatch(format!(
            "{} times vs {} probabilities",
            times.len(),
            p.len()
        )));
    }
    // Match the CDF's evaluation times onto the fine time axis.
    let mut matched: Vec<(f64, f64, f64)> = Vec::with_capacity(cdf.times.len());
    for (tau, p_hat) in cdf.times.iter().zip(&cdf.p_hat) {
        let tol = 1e-9 * tau.abs().max(1.0);
        let k = times.partition_point(|&t| t < tau - tol);
        if k < times.len() && (times[k] - tau).abs() <= tol {
            matched.push((*tau, p[k], *p_hat));
        }
    }
    if matched.is_empty() {
        return Err(Error::SeriesMismatch(
            "no shared evaluation times between the two routes".into(),
        ));
    }
    let in_band: Vec<(f64, f64, f64)> = matched
        .iter()
        .copied()
        .filter(|&(_, pv, _)| pv >= COMPARISON_BAND.0 && pv <= COMPARISON_BAND.1)
        .collect();
    let band_relaxed = in_band.len() < COMPARISON_MIN_EVAL_TIMES;
    let eval = if band_relaxed { &matched } else { &in_band };

    let mut max_abs_diff = 0.0f64;
    let mut worst_time = eval[0].0;
    let mut max_sigma_ratio = 0.0f64;
    let mut pass = true;
    for &(tau, pv, p_hat) in eval {
        let diff = (pv - p_hat).abs();
        if diff > max_abs_diff {
            max_abs_diff = diff;
            worst_time = tau;
        }
        let sigma = (pv.clamp(0.0, 1.0) * (1.0 - pv.clamp(0.0, 1.0)) / cdf.count as f64).sqrt();
        let ratio = if diff == 0.0 {
            0.0
        } else if sigma == 0.0 {
            f64::INFINITY
        } else {
            diff / sigma
        };
        max_sigma_ratio = max_sigma_ratio.max(ratio);
        if ratio > COMPARISON_SIGMA_FACTOR {
            pass = false;
        }
    }
    Ok(ComparisonReport {
        eval_count: eval.len(),
        samples: cdf.count,
        sigma_factor: COMPARISON_SIGMA_FACTOR,
        band: COMPARISON_BAND,
        band_relaxed,
        max_abs_diff,
        worst_time,
        max_sigma_ratio,
        pass,
    })
}

/// Everything one run produces (before any file is written).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub config_hash: String,
    /// Raw boundary currents (the arrival inputs).
    pub boundary: BoundaryRecord,
    /// Boundary-current route output.
    pub arrival: ArrivalResult,
    /// |final norm - 1| over the whole window.
    pub norm_drift: f64,
    /// Monte-Carlo route output (when the oracle ran).
    pub ensemble: Option<EnsembleResult>,
    /// Route agreement (when the oracle ran).
    pub comparison: Option<ComparisonReport>,
}

/// Run the full pipeline in memory: propagate once (recording boundary
/// currents and, when the oracle is on, field snapshots), reduce the
/// boundary record to arrival statistics, then integrate the trajectory
/// ensemble and judge the agreement of the two independent routes.
pub fn execute(config: &ScenarioConfig) -> Result<RunOutcome> {
    config.validate()?;
    let grid = config.grid.build()?;
    let time = config.time.build(&grid)?;
    let detector = config.detector.build()?;
    let potential = config.potential.build();
    let packets = config.packet_params()?;
    let psi0 = superpose(&packets, &grid, 0.0)?;
    let p0 = if detector.is_point() {
        0.0
    } else {
        interval_probability(&psi0, detector.a(), detector.b())?
    };

    let mut boundary = record_boundary_currents(detector);
    let mut history_rec = if config.ensemble.oracle {
        Some(FieldHistoryRecorder::new(config.ensemble.stride, time.n_steps())?)
    } else {
        None
    };
    let final_field = {
        let mut recorders: Vec<&mut dyn PropagationRecorder> = Vec::with_capacity(2);
        recorders.push(&mut boundary);
        if let Some(rec) = history_rec.as_mut() {
            recorders.push(rec);
        }
        propagate(&psi0, &potential, &time, &mut recorders)?
    };
    let norm_drift = (final_field.norm() - 1.0).abs();
    drop(final_field);

    let record = boundary.into_record();
    let arrival = compute_arrival(&record, p0)?;

    let (ensemble, comparison) = match history_rec {
        Some(rec) => {
            let history = rec.into_history()?;
            let ens = run_ensemble(
                &history,
                &detector,
                config.ensemble.samples,
                config.ensemble.seed,
                &TrajectoryOptions::default(),
            )?;
            let report = compare_detection(&arrival.times, &arrival.p, &ens.cdf)?;
            (Some(ens), Some(report))
        }
        None => (None, None),
    };

    Ok(RunOutcome {
        config: config.clone(),
        config_hash: config_hash(config)?,
        boundary: record,
        arrival,
        norm_drift,
        ensemble,
        comparison,
    })
}

/// Result of running only the Monte-Carlo route.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub config: ScenarioConfig,
    pub config_hash: String,
    pub ensemble: EnsembleResult,
    pub norm_drift: f64,
}

/// Run only the trajectory route: propagate recording field snapshots, then
/// integrate the ensemble. No boundary currents are recorded, so the output
/// is untouched by the boundary-current formulas.
pub fn execute_oracle_only(config: &ScenarioConfig) -> Result<OracleOutcome> {
    config.validate()?;
    let grid = config.grid.build()?;
    let time = config.time.build(&grid)?;
    let detector = config.detector.build()?;
    let potential = config.potential.build();
    let packets = config.packet_params()?;
    let psi0 = superpose(&packets, &grid, 0.0)?;

    let mut history_rec = FieldHistoryRecorder::new(config.ensemble.stride, time.n_steps())?;
    let final_field = {
        let mut recorders: Vec<&mut dyn PropagationRecorder> = vec![&mut history_rec];
        propagate(&psi0, &potential, &time, &mut recorders)?
    };
    let norm_drift = (final_field.norm() - 1.0).abs();
    drop(final_field);

    let history = history_rec.into_history()?;
    let ensemble = run_ensemble(
        &history,
        &detector,
        config.ensemble.samples,
        config.ensemble.seed,
        &TrajectoryOptions::default(),
    )?;
    Ok(OracleOutcome {
        config: config.clone(),
        config_hash: config_hash(config)?,
        ensemble,
        norm_drift,
    })
}
