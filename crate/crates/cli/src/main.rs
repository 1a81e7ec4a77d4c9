//! Command-line front end for the arrival-time pipeline.
//!
//! Subcommands mirror the library's stages: `run` executes the full
//! pipeline (propagation, boundary-current arrival statistics, trajectory
//! oracle, comparison, artifacts), `arrival` recomputes arrival statistics
//! from a previously recorded boundary-current CSV, `trajectories` runs only
//! the Monte-Carlo route, and `compare` judges two artifact files against
//! each other.
//!
//! Exit codes: 0 success, 1 configuration/input error, 2 invariant
//! violation, 3 the two routes disagree beyond the binomial band.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bohmtime::emit::{
    read_arrival_csv, read_boundary_csv, read_empirical_csv, write_arrival_csv,
    write_oracle_artifacts, write_run_artifacts, ARRIVAL_FILE,
};
use bohmtime::scenario::{
    compare_detection, execute, execute_oracle_only, preset, ComparisonReport, ScenarioConfig,
};
use bohmtime::{compute_arrival, Error, ErrorClass};

const EXIT_CONFIG: u8 = 1;
const EXIT_INVARIANT: u8 = 2;
const EXIT_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bohmtime",
    version,
    about = "Detection probabilities and arrival-time distributions from boundary currents, \
             cross-checked by Bohmian trajectory ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: propagate, arrival statistics, oracle, comparison.
    Run {
        /// Preset name (free_six_gaussians, barrier, step) or a TOML config path.
        source: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Arrival statistics from a pre-recorded boundary-current CSV.
    Arrival {
        /// A boundary.csv written by `run` (or following its format).
        input: PathBuf,
        /// Output directory (defaults to the input file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trajectory-ensemble route only (no boundary-current statistics).
    Trajectories {
        /// Preset name or a TOML config path.
        source: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare a detection-probability curve against an empirical CDF.
    Compare {
        /// arrival.csv with the boundary-current P column.
        arrival: PathBuf,
        /// empirical.csv with the Monte-Carlo CDF.
        empirical: PathBuf,
    },
}

#[derive(clap::Args)]
struct Overrides {
    /// Override the ensemble RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trajectory sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Skip the trajectory oracle (boundary-current route only).
    #[arg(long)]
    no_oracle: bool,
    /// Override the snapshot stride (propagation steps per field snapshot).
    #[arg(long)]
    stride: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help/version are successes; anything else is a config error.
            let code = if err.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            match err.class() {
                ErrorClass::Config => ExitCode::from(EXIT_CONFIG),
                ErrorClass::Invariant => ExitCode::from(EXIT_INVARIANT),
            }
        }
    }
}

fn dispatch(command: Command) -> bohmtime::Result<u8> {
    match command {
        Command::Run { source, overrides } => run(&source, overrides),
        Command::Arrival { input, out } => arrival(&input, out.as_deref()),
        Command::Trajectories { source, overrides } => trajectories(&source, overrides),
        Command::Compare { arrival, empirical } => compare(&arrival, &empirical),
    }
}

/// Load a config from a preset tag or a TOML file and apply flag overrides.
fn load_config(source: &str, overrides: &Overrides) -> bohmtime::Result<ScenarioConfig> {
    let mut config = if Path::new(source).is_file() {
        let text = std::fs::read_to_string(source)?;
        ScenarioConfig::from_toml(&text)?
    } else {
        preset(source).map_err(|_| {
            Error::InvalidConfig(format!(
                "'{source}' is neither a config file nor a known preset ({})",
                bohmtime::PRESET_TAGS.join(", ")
            ))
        })?
    };
    if let Some(seed) = overrides.seed {
        config.ensemble.seed = seed;
    }
    if let Some(samples) = overrides.samples {
        config.ensemble.samples = samples;
    }
    if let Some(stride) = overrides.stride {
        config.ensemble.stride = stride;
    }
    if overrides.no_oracle {
        config.ensemble.oracle = false;
    }
    if let Some(out) = &overrides.out {
        config.output.dir = Some(out.display().to_string());
    }
    Ok(config)
}

fn run(source: &str, overrides: Overrides) -> bohmtime::Result<u8> {
    let config = load_config(source, &overrides)?;
    let out_dir = PathBuf::from(config.output_dir());
    let outcome = execute(&config)?;
    let artifacts = write_run_artifacts(&outcome, &out_dir)?;

    println!("scenario            {}", outcome.config.scenario);
    println!("config hash         {}", outcome.config_hash);
    println!("point mass P(0)     {}", outcome.arrival.p0);
    println!("total detection N   {}", outcome.arrival.n);
    println!("mean arrival time   {}", outcome.arrival.moments.mean);
    println!("arrival variance    {}", outcome.arrival.moments.variance);
    println!("tail converged      {}", outcome.arrival.tail.converged);
    println!("norm drift          {:e}", outcome.norm_drift);
    if let Some(ens) = &outcome.ensemble {
        println!(
            "ensemble            {} samples, seed {}, {} unresolved aborts",
            ens.sample_count, ens.seed, ens.aborted_unresolved
        );
    }
    if let Some(report) = &outcome.comparison {
        print_report(report);
    }
    for path in [Some(&artifacts.boundary), Some(&artifacts.arrival), Some(&artifacts.summary)]
        .into_iter()
        .flatten()
        .chain(artifacts.trajectories.iter())
        .chain(artifacts.empirical.iter())
    {
        println!("wrote               {}", path.display());
    }

    if let Some(report) = &outcome.comparison {
        if !report.pass {
            return Ok(EXIT_MISMATCH);
        }
    }
    Ok(0)
}

fn arrival(input: &Path, out: Option<&Path>) -> bohmtime::Result<u8> {
    let (record, p0) = read_boundary_csv(input)?;
    let result = compute_arrival(&record, p0)?;
    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => input.parent().unwrap_or_else(|| Path::new(".")).to_path_buf(),
    };
    std::fs::create_dir_all(&dir)?;
    let path = dir.join(ARRIVAL_FILE);
    write_arrival_csv(&path, &result, &record.detector, "recomputed-from-boundary-record")?;
    println!("point mass P(0)     {}", result.p0);
    println!("total detection N   {}", result.n);
    println!("mean arrival time   {}", result.moments.mean);
    println!("arrival variance    {}", result.moments.variance);
    println!("tail converged      {}", result.tail.converged);
    println!("wrote               {}", path.display());
    Ok(0)
}

fn trajectories(source: &str, overrides: Overrides) -> bohmtime::Result<u8> {
    let mut config = load_config(source, &overrides)?;
    config.ensemble.oracle = true;
    let out_dir = PathBuf::from(config.output_dir());
    let outcome = execute_oracle_only(&config)?;
    let artifacts = write_oracle_artifacts(&outcome, &out_dir)?;
    let ens = &outcome.ensemble;
    println!("scenario            {}", outcome.config.scenario);
    println!("config hash         {}", outcome.config_hash);
    println!(
        "ensemble            {} samples, seed {}, {} unresolved aborts",
        ens.sample_count, ens.seed, ens.aborted_unresolved
    );
    println!("final P_hat         {}", ens.cdf.p_hat.last().expect("non-empty cdf"));
    for path in artifacts.trajectories.iter().chain(artifacts.empirical.iter()) {
        println!("wrote               {}", path.display());
    }
    println!("wrote               {}", artifacts.summary.display());
    Ok(0)
}

fn compare(arrival_path: &Path, empirical_path: &Path) -> bohmtime::Result<u8> {
    let curve = read_arrival_csv(arrival_path)?;
    let cdf = read_empirical_csv(empirical_path)?;
    let report = compare_detection(&curve.times, &curve.p, &cdf)?;
    print_report(&report);
    Ok(if report.pass { 0 } else { EXIT_MISMATCH })
}

fn print_report(report: &ComparisonReport) {
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    println!(
        "comparison          {verdict}: {} eval times, max |P - P_hat| = {} \
         ({:.2} sigma, limit {}), {} samples{}",
        report.eval_count,
        report.max_abs_diff,
        report.max_sigma_ratio,
        report.sigma_factor,
        report.samples,
        if report.band_relaxed { ", band relaxed" } else { "" }
    );
}
