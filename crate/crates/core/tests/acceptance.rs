//! Acceptance gate: nine numbered criteria, each as its own test printing a
//! `[PASS]`/`[FAIL]` line (run with `--nocapture` to see them). Tolerances
//! are pinned as constants next to the criteria they guard.
//!
//! Criteria 2, 3, 5, 6, 7, and 8 share the three preset pipelines, executed
//! once each behind lazy statics; criteria 1, 4, and 9 run their own small
//! dedicated setups.

use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::sync::LazyLock;
use std::time::Instant;

use bohmtime::scenario::{execute, preset, RunOutcome};
use bohmtime::{
    compute_arrival, cumulative_current, detection_probability, gaussian_packet,
    point_detection_probability, propagate, record_boundary_currents, running_max, theta,
    CumulativeSeries, DensitySampler, DetectorRegion, GaussianPacketParams, Grid1D, PotentialSpec,
    RealField, TimeGrid,
};

/// Maximum pointwise error of the propagated free packet vs the closed form.
const FIDELITY_MAX_ABS: f64 = 1e-4;
/// Expected error-reduction window when halving dt (second-order scheme).
const HALVING_RATIO: (f64, f64) = (3.0, 5.0);
/// Norm drift allowed over a full preset window.
const NORM_DRIFT_LIMIT: f64 = 1e-8;
/// Minimum number of evaluation times for the route cross-check.
const MIN_EVAL_TIMES: usize = 20;
/// Agreement tolerance between P and the integral of |j| for a one-sided
/// current at a point detector.
const SINGLE_SIGN_TOL: f64 = 1e-6;
/// Minimum length (in steps) of a constant-P plateau with falling f_a.
const PLATEAU_MIN_STEPS: usize = 10;
/// Numerical zero for series that must vanish identically.
const EXACT_ZERO_TOL: f64 = 1e-12;
/// Minimum drop below the running peak that counts as "a decrease".
const DECREASE_MARGIN: f64 = 1e-3;
/// Step preset: minimum initial detection probability.
const STEP_MIN_P0: f64 = 0.05;
/// Step preset: minimum total detection probability.
const STEP_MIN_TOTAL: f64 = 0.98;
/// Measure identity tolerance: point_mass*N + N*int(delta) vs P.
const MEASURE_TOL: f64 = 1e-6;
/// Wall-clock budget for the deterministic hand-example suite.
const UNIT_SUITE_BUDGET_SECS: f64 = 1.0;

static FREE: LazyLock<RunOutcome> = LazyLock::new(|| run_preset("free_six_gaussians"));
static BARRIER: LazyLock<RunOutcome> = LazyLock::new(|| run_preset("barrier"));
static STEP: LazyLock<RunOutcome> = LazyLock::new(|| run_preset("step"));

fn run_preset(tag: &str) -> RunOutcome {
    let config = preset(tag).expect("preset exists");
    execute(&config).unwrap_or_else(|err| panic!("preset '{tag}' failed to run: {err}"))
}

fn criterion<F: FnOnce() + UnwindSafe>(number: usize, summary: &str, check: F) {
    match catch_unwind(check) {
        Ok(()) => println!("[PASS] criterion {number}: {summary}"),
        Err(payload) => {
            println!("[FAIL] criterion {number}: {summary}");
            resume_unwind(payload);
        }
    }
}

/// Propagate the reference free packet (k0 = 5, d = 1) to t = 1 and return
/// the worst pointwise deviation from the analytic closed form.
fn fidelity_error(dt: f64) -> f64 {
    let grid = Grid1D::new(-12.0, 12.0, 16_001).expect("valid grid");
    let p = GaussianPacketParams::new(5.0, -4.0, 1.0, 1.0).expect("valid packet");
    let initial =
        bohmtime::superpose(std::slice::from_ref(&p), &grid, 0.0).expect("normalizable");
    let steps = (1.0 / dt).round() as usize;
    assert!(
        (steps as f64 * dt - 1.0).abs() < 1e-12,
        "dt must divide the unit window"
    );
    let tg = TimeGrid::new(dt, steps).expect("valid time grid");
    let fin = propagate(&initial, &PotentialSpec::Free, &tg, &mut []).expect("stable run");
    grid.positions()
        .zip(fin.values())
        .map(|(x, v)| (v - gaussian_packet(1.0, x, &p)).norm())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_propagator_fidelity() {
    criterion(
        1,
        "free Gaussian (k0=5, d=1) at t=1 matches the closed form; halving dt quarters the error",
        || {
            let err = fidelity_error(2.5e-4);
            assert!(
                err < FIDELITY_MAX_ABS,
                "max |psi - analytic| = {err:.3e}, limit {FIDELITY_MAX_ABS:.0e}"
            );
            let coarse = fidelity_error(4e-3);
            let fine = fidelity_error(2e-3);
            let ratio = coarse / fine;
            assert!(
                (HALVING_RATIO.0..=HALVING_RATIO.1).contains(&ratio),
                "halving dt changed the error by {ratio:.2}x (coarse {coarse:.3e}, fine {fine:.3e}), \
                 expected {:?}",
                HALVING_RATIO
            );
        },
    );
}

#[test]
fn criterion_2_norm_conservation() {
    criterion(2, "norm drift below 1e-8 over the full window in all three presets", || {
        for outcome in [&*FREE, &*BARRIER, &*STEP] {
            assert!(
                outcome.norm_drift < NORM_DRIFT_LIMIT,
                "{}: norm drift {:.3e} exceeds {NORM_DRIFT_LIMIT:.0e}",
                outcome.config.scenario,
                outcome.norm_drift
            );
        }
    });
}

#[test]
fn criterion_3_route_cross_validation() {
    criterion(
        3,
        "boundary-current P and the 2000-trajectory empirical CDF agree within 3 sigma at >= 20 times",
        || {
            for outcome in [&*FREE, &*BARRIER, &*STEP] {
                let name = &outcome.config.scenario;
                let ens = outcome.ensemble.as_ref().expect("oracle enabled in presets");
                assert_eq!(ens.sample_count, 2000, "{name}: preset sample count");
                assert!(!ens.abort_warning, "{name}: too many unresolved aborts");
                let report = outcome.comparison.as_ref().expect("comparison ran");
                assert!(
                    report.eval_count >= MIN_EVAL_TIMES,
                    "{name}: only {} evaluation times",
                    report.eval_count
                );
                assert!(!report.band_relaxed, "{name}: too few in-band evaluation times");
                assert!(
                    report.pass,
                    "{name}: max |P - P_hat| = {:.4e} ({:.2} sigma) at t = {}",
                    report.max_abs_diff, report.max_sigma_ratio, report.worst_time
                );
            }
        },
    );
}

#[test]
fn criterion_4_single_sign_current_reduction() {
    criterion(
        4,
        "lone right-mover at a point detector ahead: P(tau) equals the integral of |j| within 1e-6",
        || {
            let grid = Grid1D::new(-16.0, 16.0, 6401).expect("valid grid");
            let p = GaussianPacketParams::new(5.0, -4.0, 1.0, 1.0).expect("valid packet");
            let psi0 =
                bohmtime::superpose(std::slice::from_ref(&p), &grid, 0.0).expect("normalizable");
            let detector = DetectorRegion::point(2.0).expect("valid point");
            let tg = TimeGrid::new(1e-3, 2000).expect("valid time grid");
            let mut recorder = record_boundary_currents(detector);
            propagate(&psi0, &PotentialSpec::Free, &tg, &mut [&mut recorder])
                .expect("stable run");
            let record = recorder.into_record();
            let arrival = compute_arrival(&record, 0.0).expect("pipeline runs");

            // Independent reduction: trapezoid integral of |j| at the point.
            let mut acc = 0.0;
            let mut worst = 0.0f64;
            for k in 1..record.times.len() {
                let dt = record.times[k] - record.times[k - 1];
                acc += 0.5 * (record.j_a[k - 1].abs() + record.j_a[k].abs()) * dt;
                worst = worst.max((arrival.p[k] - acc).abs());
            }
            assert!(
                worst <= SINGLE_SIGN_TOL,
                "max |P - int|j|| = {worst:.3e} exceeds {SINGLE_SIGN_TOL:.0e}"
            );
        },
    );
}

#[test]
fn criterion_5_plateau_structure() {
    criterion(
        5,
        "free preset has a plateau (P exactly constant, delta = 0) while f_a strictly decreases",
        || {
            let arrival = &FREE.arrival;
            assert!(
                arrival.p.windows(2).all(|w| w[1] >= w[0]),
                "P must never decrease anywhere"
            );
            let mut longest = 0usize;
            let mut current = 0usize;
            for k in 1..arrival.times.len() {
                let constant_p = arrival.p[k] == arrival.p[k - 1];
                let falling_fa = arrival.f_a[k] < arrival.f_a[k - 1];
                let zero_delta = arrival.delta[k] == 0.0;
                if constant_p && falling_fa && zero_delta {
                    current += 1;
                    longest = longest.max(current);
                } else {
                    current = 0;
                }
            }
            assert!(
                longest >= PLATEAU_MIN_STEPS,
                "longest qualifying plateau spans {longest} steps, need {PLATEAU_MIN_STEPS}"
            );
        },
    );
}

#[test]
fn criterion_6_barrier_edge_currents() {
    criterion(
        6,
        "barrier preset: f_b non-negative and non-decreasing, runmax(-f_b) = 0, f_a drops after reflection",
        || {
            let arrival = &BARRIER.arrival;
            for k in 0..arrival.f_b.len() {
                assert!(
                    arrival.f_b[k] >= -EXACT_ZERO_TOL,
                    "f_b[{k}] = {:.3e} is negative",
                    arrival.f_b[k]
                );
                if k > 0 {
                    assert!(
                        arrival.f_b[k] >= arrival.f_b[k - 1] - EXACT_ZERO_TOL,
                        "f_b decreases at step {k}"
                    );
                }
            }
            let runmax_negfb_final = arrival.runmax_negfb.last().copied().expect("non-empty");
            assert!(
                runmax_negfb_final.abs() <= EXACT_ZERO_TOL,
                "runmax(-f_b) = {runmax_negfb_final:.3e}, expected 0"
            );
            // Reflected trajectories: f_a peaks at some tau_r > 0, then falls.
            let (k_peak, peak) = arrival
                .f_a
                .iter()
                .copied()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
            assert!(arrival.times[k_peak] > 0.0, "f_a must rise before it falls");
            let last = *arrival.f_a.last().expect("non-empty");
            assert!(
                last < peak - DECREASE_MARGIN,
                "f_a shows no decrease after its peak (peak {peak:.6}, final {last:.6})"
            );
        },
    );
}

#[test]
fn criterion_7_step_preset_detection() {
    criterion(7, "step preset: P(0) >= 0.05, N >= 0.98, tail-flatness flag clean", || {
        let arrival = &STEP.arrival;
        assert!(
            arrival.p0 >= STEP_MIN_P0,
            "P(0) = {} below {STEP_MIN_P0}",
            arrival.p0
        );
        assert!(arrival.n >= STEP_MIN_TOTAL, "N = {} below {STEP_MIN_TOTAL}", arrival.n);
        assert!(
            arrival.tail.converged,
            "tail not flat: increase {} over the last window",
            arrival.tail.increase
        );
    });
}

#[test]
fn criterion_8_measure_consistency() {
    criterion(
        8,
        "point_mass*N + N*int(delta) reproduces P(final) within 1e-6; moments finite, variance >= 0",
        || {
            for outcome in [&*FREE, &*BARRIER, &*STEP] {
                let name = &outcome.config.scenario;
                let mismatch = outcome.arrival.max_measure_mismatch();
                assert!(
                    mismatch <= MEASURE_TOL,
                    "{name}: measure identity violated by {mismatch:.3e}"
                );
                let m = &outcome.arrival.moments;
                assert!(m.mean.is_finite(), "{name}: mean not finite");
                assert!(
                    m.variance.is_finite() && m.variance >= 0.0,
                    "{name}: variance {} invalid",
                    m.variance
                );
            }
        },
    );
}

#[test]
fn criterion_9_deterministic_unit_examples() {
    criterion(9, "hand-integrable and closed-form examples reproduce exactly, under 1 second", || {
        let clock = Instant::now();

        // Running maximum of a short series.
        assert_eq!(running_max(&[3.0, 1.0, 4.0, 1.0, 5.0]), vec![3.0, 3.0, 4.0, 4.0, 5.0]);

        // Trapezoid antiderivative of j(t) = t, exact for linear currents.
        let ramp = cumulative_current(&[0.0, 0.5, 1.0], &[0.0, 0.5, 1.0]).expect("well-formed");
        assert_eq!(ramp.values(), &[0.0, 0.125, 0.5]);

        // Point detector on a sign-changing antiderivative: both envelopes
        // contribute; reversing the current leaves P unchanged.
        let times: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let f = CumulativeSeries::new(times.clone(), vec![0.0, 0.3, 0.1, -0.2, 0.25, 0.05])
            .expect("well-formed");
        let p = point_detection_probability(&f).expect("well-formed");
        assert_eq!(p, vec![0.0, 0.3, 0.3, 0.5, 0.5, 0.5]);
        let neg = CumulativeSeries::new(times, f.values().iter().map(|v| -v).collect())
            .expect("well-formed");
        assert_eq!(point_detection_probability(&neg).expect("well-formed"), p);

        // Interval detector with initial mass: P = p0 + runmax f_a + runmax(-f_b).
        let t3 = vec![0.0, 1.0, 2.0];
        let f_a = CumulativeSeries::new(t3.clone(), vec![0.0, 0.2, 0.1]).expect("well-formed");
        let f_b = CumulativeSeries::new(t3, vec![0.0, -0.1, -0.3]).expect("well-formed");
        let p = detection_probability(&f_a, &f_b, 0.1).expect("well-formed");
        assert!((p[0] - 0.1).abs() < 1e-15);
        assert!((p[1] - 0.4).abs() < 1e-15);
        assert!((p[2] - 0.6).abs() < 1e-15);

        // Heaviside convention at the jump.
        assert_eq!(theta(0.0), 1.0);
        assert_eq!(theta(-1e-300), 0.0);

        // Uniform density: quantiles invert to themselves.
        let grid = Grid1D::new(0.0, 1.0, 101).expect("valid grid");
        let rho = RealField::new(grid, 0.0, vec![1.0; 101]).expect("matching length");
        let sampler = DensitySampler::new(&rho).expect("normalized");
        for q in [0.25, 0.5, 0.75] {
            assert!((sampler.position_at_quantile(q) - q).abs() < 1e-12);
        }

        // Stationary Gaussian density at the center, in closed form.
        let p = GaussianPacketParams::new(0.0, 0.0, 1.0, 1.0).expect("valid packet");
        let amp = gaussian_packet(0.0, 0.0, &p).norm();
        assert!((amp * amp - 0.3989422804014327).abs() < 1e-15);

        let elapsed = clock.elapsed().as_secs_f64();
        assert!(
            elapsed < UNIT_SUITE_BUDGET_SECS,
            "hand-example suite took {elapsed:.3}s, budget {UNIT_SUITE_BUDGET_SECS}s"
        );
    });
}
