//! Artifact emission and re-ingestion: CSV curves and the JSON run summary.
//!
//! Every CSV starts with `# key = value` comment lines carrying the config
//! hash and whatever metadata the file needs to be interpreted on its own
//! (detector edges, point mass, sample counts), followed by a header row and
//! plain comma-separated values. Floats are written with Rust's shortest
//! round-trip formatting, so identical runs produce byte-identical files and
//! readers recover the exact binary values.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::arrival::{ArrivalMoments, ArrivalResult, TailCheck};
use crate::detector::DetectorRegion;
use crate::error::{Error, Result};
use crate::observables::BoundaryRecord;
use crate::scenario::{ComparisonReport, OracleOutcome, RunOutcome, ScenarioConfig};
use crate::trajectory::{EmpiricalCdf, Trajectory};

/// File names used inside a run's output directory.
pub const ARRIVAL_FILE: &str = "arrival.csv";
pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const EMPIRICAL_FILE: &str = "empirical.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Paths of everything a run wrote.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub arrival: PathBuf,
    pub boundary: PathBuf,
    pub summary: PathBuf,
    pub trajectories: Option<PathBuf>,
    pub empirical: Option<PathBuf>,
}

/// Write all artifacts of a full run into `dir` (created if missing):
/// `boundary.csv`, `arrival.csv`, `summary.json`, and — when the oracle ran —
/// `trajectories.csv` and `empirical.csv`.
pub fn write_run_artifacts(outcome: &RunOutcome, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let boundary = dir.join(BOUNDARY_FILE);
    write_boundary_csv(&boundary, &outcome.boundary, outcome.arrival.p0, &outcome.config_hash)?;
    let arrival = dir.join(ARRIVAL_FILE);
    write_arrival_csv(
        &arrival,
        &outcome.arrival,
        &outcome.boundary.detector,
        &outcome.config_hash,
    )?;
    let (trajectories, empirical) = match &outcome.ensemble {
        Some(ens) => {
            let t_path = dir.join(TRAJECTORIES_FILE);
            write_trajectories_csv(&t_path, &ens.trajectories, ens.seed, &outcome.config_hash)?;
            let e_path = dir.join(EMPIRICAL_FILE);
            write_empirical_csv(&e_path, &ens.cdf, ens.seed, &outcome.config_hash)?;
            (Some(t_path), Some(e_path))
        }
        None => (None, None),
    };
    let summary = dir.join(SUMMARY_FILE);
    write_summary_json(&summary, outcome)?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        arrival,
        boundary,
        summary,
        trajectories,
        empirical,
    })
}

/// Write the artifacts of an oracle-only run: `trajectories.csv`,
/// `empirical.csv`, and a reduced `summary.json`.
pub fn write_oracle_artifacts(outcome: &OracleOutcome, dir: &Path) -> Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let ens = &outcome.ensemble;
    let trajectories = dir.join(TRAJECTORIES_FILE);
    write_trajectories_csv(&trajectories, &ens.trajectories, ens.seed, &outcome.config_hash)?;
    let empirical = dir.join(EMPIRICAL_FILE);
    write_empirical_csv(&empirical, &ens.cdf, ens.seed, &outcome.config_hash)?;
    let summary = dir.join(SUMMARY_FILE);
    let doc = OracleSummary {
        scenario: &outcome.config.scenario,
        config_hash: &outcome.config_hash,
        norm_drift: outcome.norm_drift,
        ensemble: ensemble_summary(outcome.config.ensemble.stride, ens),
        final_p_hat: *ens.cdf.p_hat.last().expect("cdf is non-empty"),
        config: &outcome.config,
    };
    write_json(&summary, &doc)?;
    Ok(RunArtifacts {
        dir: dir.to_path_buf(),
        arrival: dir.join(ARRIVAL_FILE),
        boundary: dir.join(BOUNDARY_FILE),
        summary,
        trajectories: Some(trajectories),
        empirical: Some(empirical),
    })
}

/// `boundary.csv`: raw edge currents, self-describing via comments
/// (detector edges and point mass), so arrival statistics can be recomputed
/// from the file alone.
pub fn write_boundary_csv(
    path: &Path,
    record: &BoundaryRecord,
    p0: f64,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash = {config_hash}")?;
    writeln!(w, "# detector_a = {}", record.detector.a())?;
    writeln!(w, "# detector_b = {}", record.detector.b())?;
    writeln!(w, "# point_mass = {p0}")?;
    writeln!(w, "t,j_a,j_b")?;
    for k in 0..record.len() {
        writeln!(w, "{},{},{}", record.times[k], record.j_a[k], record.j_b[k])?;
    }
    w.flush()?;
    Ok(())
}

/// Read a `boundary.csv` back into a record plus its recorded point mass.
pub fn read_boundary_csv(path: &Path) -> Result<(BoundaryRecord, f64)> {
    let text = fs::read_to_string(path)?;
    let mut detector_a = None;
    let mut detector_b = None;
    let mut p0 = 0.0;
    let mut times = Vec::new();
    let mut j_a = Vec::new();
    let mut j_b = Vec::new();
    for line in text.lines() {
        if let Some((key, value)) = parse_comment(line) {
            match key {
                "detector_a" => detector_a = Some(parse_float(value, path)?),
                "detector_b" => detector_b = Some(parse_float(value, path)?),
                "point_mass" => p0 = parse_float(value, path)?,
                _ => {}
            }
            continue;
        }
        if skip_row(line, 't') {
            continue;
        }
        let cols = split_row(line, 3, path)?;
        times.push(parse_float(cols[0], path)?);
        j_a.push(parse_float(cols[1], path)?);
        j_b.push(parse_float(cols[2], path)?);
    }
    let (a, b) = match (detector_a, detector_b) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::Parse(format!(
                "{}: missing detector_a/detector_b comments",
                path.display()
            )));
        }
    };
    let detector =
        if a == b { DetectorRegion::point(a)? } else { DetectorRegion::interval(a, b)? };
    if times.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok((BoundaryRecord { detector, times, j_a, j_b }, p0))
}

/// `arrival.csv`: the full boundary-current route output, one row per step.
pub fn write_arrival_csv(
    path: &Path,
    arrival: &ArrivalResult,
    detector: &DetectorRegion,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash = {config_hash}")?;
    writeln!(w, "# detector_a = {}", detector.a())?;
    writeln!(w, "# detector_b = {}", detector.b())?;
    writeln!(w, "# point_mass = {}", arrival.p0)?;
    writeln!(w, "# total_detection = {}", arrival.n)?;
    writeln!(w, "t,f_a,f_b,runmax_fa,runmax_negfb,P,Pc,delta")?;
    for k in 0..arrival.times.len() {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            arrival.times[k],
            arrival.f_a[k],
            arrival.f_b[k],
            arrival.runmax_fa[k],
            arrival.runmax_negfb[k],
            arrival.p[k],
            arrival.pc[k],
            arrival.delta[k],
        )?;
    }
    w.flush()?;
    Ok(())
}

/// The parts of an `arrival.csv` a comparison needs.
#[derive(Debug, Clone)]
pub struct ArrivalCurve {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub point_mass: f64,
    pub total_detection: Option<f64>,
    pub config_hash: Option<String>,
}

/// Read the time axis and detection probability from an `arrival.csv`.
pub fn read_arrival_csv(path: &Path) -> Result<ArrivalCurve> {
    let text = fs::read_to_string(path)?;
    let mut curve = ArrivalCurve {
        times: Vec::new(),
        p: Vec::new(),
        point_mass: 0.0,
        total_detection: None,
        config_hash: None,
    };
    for line in text.lines() {
        if let Some((key, value)) = parse_comment(line) {
            match key {
                "point_mass" => curve.point_mass = parse_float(value, path)?,
                "total_detection" => curve.total_detection = Some(parse_float(value, path)?),
                "config_hash" => curve.config_hash = Some(value.to_string()),
                _ => {}
            }
            continue;
        }
        if skip_row(line, 't') {
            continue;
        }
        let cols = split_row(line, 8, path)?;
        curve.times.push(parse_float(cols[0], path)?);
        curve.p.push(parse_float(cols[5], path)?);
    }
    if curve.times.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(curve)
}

/// `empirical.csv`: the Monte-Carlo detection CDF with binomial errors.
pub fn write_empirical_csv(
    path: &Path,
    cdf: &EmpiricalCdf,
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash = {config_hash}")?;
    writeln!(w, "# samples = {}", cdf.count)?;
    writeln!(w, "# seed = {seed}")?;
    writeln!(w, "t,p_hat,std_err")?;
    for k in 0..cdf.times.len() {
        writeln!(w, "{},{},{}", cdf.times[k], cdf.p_hat[k], cdf.std_err[k])?;
    }
    w.flush()?;
    Ok(())
}

/// Read an `empirical.csv` back into a CDF.
pub fn read_empirical_csv(path: &Path) -> Result<EmpiricalCdf> {
    let text = fs::read_to_string(path)?;
    let mut count = None;
    let mut times = Vec::new();
    let mut p_hat = Vec::new();
    let mut std_err = Vec::new();
    for line in text.lines() {
        if let Some((key, value)) = parse_comment(line) {
            if key == "samples" {
                count = Some(value.parse::<usize>().map_err(|e| {
                    Error::Parse(format!("{}: samples comment: {e}", path.display()))
                })?);
            }
            continue;
        }
        if skip_row(line, 't') {
            continue;
        }
        let cols = split_row(line, 3, path)?;
        times.push(parse_float(cols[0], path)?);
        p_hat.push(parse_float(cols[1], path)?);
        std_err.push(parse_float(cols[2], path)?);
    }
    let count = count
        .ok_or_else(|| Error::Parse(format!("{}: missing samples comment", path.display())))?;
    if times.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(EmpiricalCdf { times, p_hat, std_err, count })
}

/// `trajectories.csv`: long-format paths, one row per (trajectory, sample).
pub fn write_trajectories_csv(
    path: &Path,
    trajectories: &[Trajectory],
    seed: u64,
    config_hash: &str,
) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "# config_hash = {config_hash}")?;
    writeln!(w, "# samples = {}", trajectories.len())?;
    writeln!(w, "# seed = {seed}")?;
    writeln!(w, "id,t,x")?;
    for (id, tr) in trajectories.iter().enumerate() {
        for (t, x) in tr.times.iter().zip(&tr.positions) {
            writeln!(w, "{id},{t},{x}")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct EnsembleSummary {
    samples: usize,
    seed: u64,
    stride: usize,
    aborted_unresolved: usize,
    abort_warning: bool,
}

fn ensemble_summary(stride: usize, ens: &crate::trajectory::EnsembleResult) -> EnsembleSummary {
    EnsembleSummary {
        samples: ens.sample_count,
        seed: ens.seed,
        stride,
        aborted_unresolved: ens.aborted_unresolved,
        abort_warning: ens.abort_warning,
    }
}

#[derive(Serialize)]
struct RunSummary<'a> {
    scenario: &'a str,
    config_hash: &'a str,
    point_mass: f64,
    total_detection: f64,
    final_p: f64,
    moments: &'a ArrivalMoments,
    tail: &'a TailCheck,
    max_measure_mismatch: f64,
    norm_drift: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<EnsembleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<&'a ComparisonReport>,
    config: &'a ScenarioConfig,
}

#[derive(Serialize)]
struct OracleSummary<'a> {
    scenario: &'a str,
    config_hash: &'a str,
    norm_drift: f64,
    final_p_hat: f64,
    ensemble: EnsembleSummary,
    config: &'a ScenarioConfig,
}

/// `summary.json`: machine-readable run digest (headline numbers, flags,
/// the full config echo, and the comparison verdict when the oracle ran).
pub fn write_summary_json(path: &Path, outcome: &RunOutcome) -> Result<()> {
    let doc = RunSummary {
        scenario: &outcome.config.scenario,
        config_hash: &outcome.config_hash,
        point_mass: outcome.arrival.p0,
        total_detection: outcome.arrival.n,
        final_p: *outcome.arrival.p.last().expect("arrival series is non-empty"),
        moments: &outcome.arrival.moments,
        tail: &outcome.arrival.tail,
        max_measure_mismatch: outcome.arrival.max_measure_mismatch(),
        norm_drift: outcome.norm_drift,
        ensemble: outcome
            .ensemble
            .as_ref()
            .map(|ens| ensemble_summary(outcome.config.ensemble.stride, ens)),
        comparison: outcome.comparison.as_ref(),
        config: &outcome.config,
    };
    write_json(path, &doc)
}

fn write_json<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc)
        .map_err(|e| Error::Parse(format!("summary serialization: {e}")))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn parse_comment(line: &str) -> Option<(&str, &str)> {
    let rest = line.strip_prefix('#')?;
    let (key, value) = rest.split_once('=')?;
    Some((key.trim(), value.trim()))
}

/// True for header and blank lines (data rows start with a digit or sign).
fn skip_row(line: &str, header_initial: char) -> bool {
    let trimmed = line.trim_start();
    trimmed.is_empty() || trimmed.starts_with(header_initial)
}

fn split_row<'a>(line: &'a str, expect: usize, path: &Path) -> Result<Vec<&'a str>> {
    let cols: Vec<&str> = line.split(',').collect();
    if cols.len() != expect {
        return Err(Error::Parse(format!(
            "{}: expected {expect} columns, got {} in row '{line}'",
            path.display(),
            cols.len()
        )));
    }
    Ok(cols)
}

fn parse_float(text: &str, path: &Path) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("{}: bad number '{text}': {e}", path.display())))
}
