//! Detection probability and arrival-time statistics computed from the
//! boundary currents alone.
//!
//! Given the current `j(t, a)` and `j(t, b)` at the edges of a detector
//! region `[a, b]`, the cumulative detection probability is
//!
//! ```text
//! P(tau) = P(0) + max{ f_a(s) : 0 <= s <= tau } + max{ -f_b(s) : 0 <= s <= tau }
//! ```
//!
//! where `f_a(s) = integral_0^s j(t, a) dt` and likewise for `b`. A point
//! detector uses the same current at both edges, reducing to
//! `P(tau) = runmax(f_a) + runmax(-f_a)` with `P(0) = 0`. The associated
//! arrival-time measure splits into a point mass at activation time plus an
//! absolutely continuous density `delta`; `delta * N` is the first-traversal
//! ("cut-off") current at the edges.
//!
//! Discretization note: `delta` is represented per recorded interval as the
//! exact increment of the running maxima divided by `N * dt` — the integral
//! of the gate-filtered boundary current over that interval. This makes the
//! identity `point_mass * N + N * sum(delta * dt) = P` hold to rounding on
//! every prefix of the series, which is the authoritative consistency test;
//! pointwise it agrees with `j/N` on intervals where the corresponding
//! antiderivative is at its running maximum throughout, and is 0 on plateaus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::observables::BoundaryRecord;

/// Hard bound on how far a detection probability may exceed 1 before it is
/// treated as an upstream consistency failure rather than rounding noise.
pub const PROBABILITY_TOLERANCE: f64 = 1e-6;

/// Default fraction of the time axis used for the tail-flatness check.
pub const DEFAULT_TAIL_FRACTION: f64 = 0.1;

/// Default bound on how much `P` may still grow over the tail window for the
/// final value to be accepted as the overall detection probability.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-3;

/// The density series is flagged as truncated when its final value exceeds
/// this fraction of its maximum.
pub const TRUNCATION_RATIO: f64 = 1e-4;

/// Magnitudes below this are treated as rounding noise: tiny negative
/// density values are clamped, variances this far below zero are accepted.
const ROUNDING_FLOOR: f64 = 1e-12;
const VARIANCE_FLOOR: f64 = -1e-10;

/// Antiderivative of a boundary-current series: `f(t_k)` with `f(0) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl CumulativeSeries {
    /// Wrap a precomputed antiderivative. `times` must start at 0 and be
    /// strictly increasing; `values` must start at 0 and match in length.
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidTimeAxis("empty time axis".into()));
        }
        if times.len() != values.len() {
            return Err(Error::SeriesMismatch(format!(
                "{} times vs {} values",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidTimeAxis(format!(
                "time axis must start at 0, got {}",
                times[0]
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidTimeAxis("times must be strictly increasing".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::SeriesMismatch(format!(
                "cumulative series must start at 0, got {}",
                values[0]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite cumulative value".into()));
        }
        Ok(Self { times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor rejects empty series
    }
}

/// Trapezoid cumulative integral of a current series sampled on `times`:
/// `f(t_k) = integral_0^{t_k} j dt`, exact for piecewise-linear currents.
pub fn cumulative_current(times: &[f64], j: &[f64]) -> Result<CumulativeSeries> {
    if times.len() != j.len() {
        return Err(Error::SeriesMismatch(format!(
            "{} times vs {} current samples",
            times.len(),
            j.len()
        )));
    }
    if j.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidField("non-finite current sample".into()));
    }
    let mut values = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    values.push(0.0);
    for k in 1..times.len() {
        acc += 0.5 * (j[k - 1] + j[k]) * (times[k] - times[k - 1]);
        values.push(acc);
    }
    CumulativeSeries::new(times.to_vec(), values)
}

/// Prefix maxima: `out_k = max(series_0, ..., series_k)`.
pub fn running_max(series: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut m = f64::NEG_INFINITY;
    for &v in series {
        m = m.max(v);
        out.push(m);
    }
    out
}

fn check_probability_bound(p: &[f64]) -> Result<()> {
    for &v in p {
        if v > 1.0 + PROBABILITY_TOLERANCE {
            return Err(Error::ProbabilityOverflow { value: v, tolerance: PROBABILITY_TOLERANCE });
        }
    }
    Ok(())
}

/// Detection probability for an interval detector:
/// `P_k = P0 + runmax(f_a)_k + runmax(-f_b)_k`.
///
/// Values exceeding `1 + PROBABILITY_TOLERANCE` abort with an error —
/// a detection probability beyond 1 means the inputs are inconsistent and is
/// never silently clipped.
pub fn detection_probability(
    f_a: &CumulativeSeries,
    f_b: &CumulativeSeries,
    p0: f64,
) -> Result<Vec<f64>> {
    if f_a.times() != f_b.times() {
        return Err(Error::SeriesMismatch(
            "edge series must share one time axis".into(),
        ));
    }
    if !(0.0..=1.0).contains(&p0) {
        return Err(Error::InvalidConfig(format!(
            "activation probability {p0} outside [0, 1]"
        )));
    }
    let max_a = running_max(f_a.values());
    let neg_b: Vec<f64> = f_b.values().iter().map(|v| -v).collect();
    let max_b = running_max(&neg_b);
    let p: Vec<f64> = max_a.iter().zip(&max_b).map(|(ma, mb)| p0 + ma + mb).collect();
    check_probability_bound(&p)?;
    Ok(p)
}

/// Detection probability for a point detector at `a`:
/// `P_k = runmax(f_a)_k + runmax(-f_a)_k`, i.e. the interval formula with
/// both edges collapsed onto `a` and zero initial mass.
pub fn point_detection_probability(f_a: &CumulativeSeries) -> Result<Vec<f64>> {
    detection_probability(f_a, f_a, 0.0)
}

/// Outcome of the tail-flatness check behind the estimate of the overall
/// detection probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailCheck {
    /// Whether `P` grew by less than `tolerance` over the tail window.
    pub converged: bool,
    /// How much `P` grew over the tail window.
    pub increase: f64,
    /// The tolerance the increase was compared against.
    pub tolerance: f64,
    /// Start of the tail window on the time axis.
    pub window_start: f64,
}

/// Conditional detection probability `Pc = P / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    /// Overall detection probability, estimated as `P` at the final time.
    pub n: f64,
    /// `P / N`; non-decreasing, ends exactly at 1.
    pub pc: Vec<f64>,
    /// Whether the final `P` can be trusted as the long-time limit.
    pub tail: TailCheck,
}

/// Normalize a detection-probability series by its long-time value, with the
/// default tail window (last 10% of the axis, tolerance 1e-3).
pub fn conditionalize(times: &[f64], p: &[f64]) -> Result<Conditioned> {
    conditionalize_with(times, p, DEFAULT_TAIL_FRACTION, DEFAULT_TAIL_TOLERANCE)
}

/// Normalize a detection-probability series by its long-time value.
///
/// `N` is read off at the final recorded time; the result carries a
/// [`TailCheck`] recording whether `P` was still growing by more than
/// `tail_tolerance` over the trailing `tail_fraction` of the time axis —
/// a warning flag, not an error, so truncated windows remain visible.
/// `P` identically zero has no conditional distribution and is an error.
pub fn conditionalize_with(
    times: &[f64],
    p: &[f64],
    tail_fraction: f64,
    tail_tolerance: f64,
) -> Result<Conditioned> {
    if times.len() != p.len() || times.is_empty() {
        return Err(Error::SeriesMismatch(format!(
            "{} times vs {} probability samples",
            times.len(),
            p.len()
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "tail fraction {tail_fraction} outside (0, 1]"
        )));
    }
    if !(tail_tolerance > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "tail tolerance {tail_tolerance} must be positive"
        )));
    }
    let n = *p.last().expect("non-empty");
    if n == 0.0 {
        return Err(Error::ZeroDetection);
    }
    let t0 = times[0];
    let t1 = *times.last().expect("non-empty");
    let window_start = t1 - tail_fraction * (t1 - t0);
    let idx = times.partition_point(|&t| t < window_start);
    let p_window = p[idx.min(p.len() - 1)];
    let increase = n - p_window;
    let tail = TailCheck {
        converged: increase < tail_tolerance,
        increase,
        tolerance: tail_tolerance,
        window_start,
    };
    let pc = p.iter().map(|v| v / n).collect();
    Ok(Conditioned { n, pc, tail })
}

/// Arrival-time density `delta` on `t > 0` (the absolutely continuous part
/// of the conditional arrival measure; the point mass at activation is kept
/// separately).
///
/// `delta_k` is the increase of `runmax(f_a) + runmax(-f_b)` over the
/// interval `(t_{k-1}, t_k]`, divided by `n * (t_k - t_{k-1})`: the average
/// of the gate-filtered boundary current `j * Theta(f - runmax f) / n` over
/// that interval. It is 0 wherever neither running maximum advances (the
/// plateaus of `P`) and `delta_0 = 0` by convention. A point detector passes
/// the same series for both edges.
pub fn arrival_density(
    f_a: &CumulativeSeries,
    f_b: &CumulativeSeries,
    n: f64,
) -> Result<Vec<f64>> {
    if f_a.times() != f_b.times() {
        return Err(Error::SeriesMismatch(
            "edge series must share one time axis".into(),
        ));
    }
    if !(n > 0.0) {
        return Err(Error::ZeroDetection);
    }
    let times = f_a.times();
    let max_a = running_max(f_a.values());
    let neg_b: Vec<f64> = f_b.values().iter().map(|v| -v).collect();
    let max_b = running_max(&neg_b);
    let mut delta = Vec::with_capacity(times.len());
    delta.push(0.0);
    for k in 1..times.len() {
        let gain = (max_a[k] - max_a[k - 1]) + (max_b[k] - max_b[k - 1]);
        delta.push(gain / (n * (times[k] - times[k - 1])));
    }
    Ok(delta)
}

/// Mean and variance of the conditional arrival time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArrivalMoments {
    /// Conditional mean arrival time (the point mass at activation
    /// contributes time 0).
    pub mean: f64,
    /// Conditional variance of the arrival time.
    pub variance: f64,
    /// Set when the density has not decayed by the end of the window
    /// (final value above `TRUNCATION_RATIO` of the maximum), meaning the
    /// moments miss tail mass.
    pub truncated: bool,
}

/// Trapezoid moments of the arrival measure `point_mass * dirac(0) + delta`.
///
/// Tiny negative density values (rounding noise above `-1e-12`) are clamped
/// to zero; a variance below `-1e-10` signals inconsistent quadrature and is
/// an error, anything between is clamped to 0.
pub fn arrival_moments(times: &[f64], delta: &[f64], point_mass: f64) -> Result<ArrivalMoments> {
    if times.len() != delta.len() || times.is_empty() {
        return Err(Error::SeriesMismatch(format!(
            "{} times vs {} density samples",
            times.len(),
            delta.len()
        )));
    }
    if !(0.0..=1.0).contains(&point_mass) {
        return Err(Error::InvalidConfig(format!("point mass {point_mass} outside [0, 1]")));
    }
    let mut d = Vec::with_capacity(delta.len());
    for &v in delta {
        if v < -ROUNDING_FLOOR {
            return Err(Error::InvalidField(format!("negative density value {v}")));
        }
        d.push(v.max(0.0));
    }
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for k in 1..times.len() {
        let dt = times[k] - times[k - 1];
        let (ta, tb) = (times[k - 1], times[k]);
        m1 += 0.5 * (ta * d[k - 1] + tb * d[k]) * dt;
        m2 += 0.5 * (ta * ta * d[k - 1] + tb * tb * d[k]) * dt;
    }
    let mut variance = m2 - m1 * m1;
    if variance < VARIANCE_FLOOR {
        return Err(Error::NegativeVariance { value: variance });
    }
    variance = variance.max(0.0);
    let peak = d.iter().cloned().fold(0.0, f64::max);
    let truncated = peak > 0.0 && *d.last().expect("non-empty") > TRUNCATION_RATIO * peak;
    Ok(ArrivalMoments { mean: m1, variance, truncated })
}

/// Everything the boundary currents determine about detector statistics:
/// the antiderivatives and running maxima, the (conditional) detection
/// probability, the arrival density with its point mass, and the moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalResult {
    pub times: Vec<f64>,
    /// Antiderivative of the current at the left edge.
    pub f_a: Vec<f64>,
    /// Antiderivative of the current at the right edge.
    pub f_b: Vec<f64>,
    pub runmax_fa: Vec<f64>,
    pub runmax_negfb: Vec<f64>,
    /// Cumulative detection probability.
    pub p: Vec<f64>,
    /// Probability mass inside the detector at activation: `P(0)`.
    pub p0: f64,
    /// Overall detection probability (final `P`).
    pub n: f64,
    /// Conditional detection probability `P / N`.
    pub pc: Vec<f64>,
    /// Conditional arrival density on `t > 0`.
    pub delta: Vec<f64>,
    /// Conditional mass detected exactly at activation: `P(0) / N`.
    pub point_mass: f64,
    pub moments: ArrivalMoments,
    pub tail: TailCheck,
}

impl ArrivalResult {
    /// Largest violation of the measure identity
    /// `p0 + n * sum_{i<=k} delta_i dt_i = P_k` across the series — the
    /// authoritative consistency check between `delta` and `P`.
    pub fn max_measure_mismatch(&self) -> f64 {
        let mut acc = 0.0;
        let mut worst = (self.point_mass * self.n - self.p[0]).abs();
        for k in 1..self.times.len() {
            acc += self.delta[k] * (self.times[k] - self.times[k - 1]);
            let lhs = self.point_mass * self.n + self.n * acc;
            worst = worst.max((lhs - self.p[k]).abs());
        }
        worst
    }
}

/// Run the full boundary-current pipeline on one recorded series with the
/// default tail window.
pub fn compute_arrival(record: &BoundaryRecord, p0: f64) -> Result<ArrivalResult> {
    compute_arrival_with(record, p0, DEFAULT_TAIL_FRACTION, DEFAULT_TAIL_TOLERANCE)
}

/// Run the full boundary-current pipeline on one recorded series:
/// antiderivatives, running maxima, detection probability, conditional
/// normalization, arrival density, and moments.
///
/// For a point detector the record carries the same current at both edges
/// and `p0` must be 0 (a zero-width region holds no probability mass).
pub fn compute_arrival_with(
    record: &BoundaryRecord,
    p0: f64,
    tail_fraction: f64,
    tail_tolerance: f64,
) -> Result<ArrivalResult> {
    if record.len() < 2 {
        return Err(Error::SeriesMismatch(format!(
            "need at least two recorded samples, got {}",
            record.len()
        )));
    }
    if record.detector.is_point() && p0 != 0.0 {
        return Err(Error::InvalidConfig(format!(
            "a point detector holds no probability mass at activation, got P(0) = {p0}"
        )));
    }
    let f_a = cumulative_current(&record.times, &record.j_a)?;
    let f_b = cumulative_current(&record.times, &record.j_b)?;
    let p = detection_probability(&f_a, &f_b, p0)?;
    let cond = conditionalize_with(&record.times, &p, tail_fraction, tail_tolerance)?;
    let delta = arrival_density(&f_a, &f_b, cond.n)?;
    let point_mass = p0 / cond.n;
    let moments = arrival_moments(&record.times, &delta, point_mass)?;
    let runmax_fa = running_max(f_a.values());
    let neg_b: Vec<f64> = f_b.values().iter().map(|v| -v).collect();
    let runmax_negfb = running_max(&neg_b);
    Ok(ArrivalResult {
        times: record.times.clone(),
        f_a: f_a.values().to_vec(),
        f_b: f_b.values().to_vec(),
        runmax_fa,
        runmax_negfb,
        p,
        p0,
        n: cond.n,
        pc: cond.pc,
        delta,
        point_mass,
        moments,
        tail: cond.tail,
    })
}
