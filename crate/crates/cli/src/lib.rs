//! Command-line front end: argument parsing, dispatch and exit codes.
//!
//! Exit codes are 0 on success, 2 for usage errors, 3 for invalid
//! parameters or configuration, 4 for numerical failures and 1 for I/O.
//! Failures print one JSON object on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fbgsq::config::{defaults_help, parse_with_overrides, RunConfig};
use fbgsq::covariance::{validate_oracle, OracleOptions};
use fbgsq::experiments::{
    alignment_of_rows, hamiltonian_drift, simulate, sweep, Alignment, Evaluation, RatioColumn, SweepSpec, SweepVariable,
};
use fbgsq::io;
use fbgsq::solver::Splitting;
use fbgsq::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Environment variable holding the number of worker threads for sweeps.
pub const WORKERS_ENV: &str = "FBG_WORKERS";

#[derive(Debug, Parser)]
#[command(
    name = "fbgsq",
    version,
    about = "Soliton propagation and quantum-noise squeezing in nonlinear fiber Bragg gratings",
    after_long_help = after_help()
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// TOML configuration file (see `--help` for keys and defaults).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Override one key, e.g. `--set grating.length=70`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (overrides output.dir).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical run: observables and field snapshots.
    Simulate(ConfigArgs),
    /// One squeezing calculation: forward run and back-propagation.
    Squeeze(ConfigArgs),
    /// One-dimensional parameter sweep with a figure-style table.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// input_intensity | grating_length | lo_phase | apodization_slope
        #[arg(long)]
        variable: String,
        /// Comma-separated values; defaults to the figure grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Option<Vec<f64>>,
    },
    /// Band structure and linear transfer spectrum of a uniform grating.
    Dispersion {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = -30.0, allow_hyphen_values = true)]
        delta_min: f64,
        #[arg(long, default_value_t = 30.0, allow_hyphen_values = true)]
        delta_max: f64,
        #[arg(long, default_value_t = 601)]
        points: usize,
    },
    /// Compares adjoint variances against the forward covariance oracle.
    Validate {
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long, default_value_t = 500)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        projections: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// lie | strang
        #[arg(long, default_value = "lie")]
        splitting: String,
        /// Largest relative error accepted.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Prints the version.
    Version,
}

fn after_help() -> String {
    format!(
        "Configuration keys and defaults:\n{}\nEnvironment:\n  {WORKERS_ENV}  worker threads for sweeps (default: all cores)\n\n\
         Exit codes: 0 success, 1 I/O, 2 usage, 3 invalid parameters, 4 numerical failure",
        defaults_help()
    )
}

/// Failure reported by a subcommand.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            kind: "usage",
            key: None,
            line: None,
            message: message.into(),
        }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            kind: "numerical",
            key: None,
            line: None,
            message: message.into(),
        }
    }

    /// Single-line JSON record for stderr.
    pub fn to_json_line(&self) -> String {
        let mut v = serde_json::json!({
            "error": self.kind,
            "code": self.code,
            "message": self.message,
        });
        if let Some(k) = &self.key {
            v["key"] = serde_json::Value::String(k.clone());
        }
        if let Some(l) = self.line {
            v["line"] = serde_json::Value::from(l);
        }
        v.to_string()
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, kind, key, line) = match &e {
            Error::Validation { key, .. } => (EXIT_VALIDATION, "validation", Some(key.clone()), None),
            Error::Parse { line, .. } => (EXIT_VALIDATION, "config", None, Some(*line)),
            Error::SizeGuard(_) | Error::GridMismatch(_) => (EXIT_VALIDATION, "validation", None, None),
            Error::NoTransmittedPulse { .. } | Error::ZeroEnergy(_) => (EXIT_NUMERICAL, "no_signal", None, None),
            Error::Divergence { .. } | Error::ReplayMismatch { .. } => (EXIT_NUMERICAL, "numerical", None, None),
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => (EXIT_IO, "io", None, None),
        };
        Failure {
            code,
            kind,
            key,
            line,
            message,
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code. Normal output goes to `out`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.to_json_line());
            f.code
        }
    }
}

fn load(args: &ConfigArgs) -> Outcome<RunConfig> {
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Failure {
            code: EXIT_IO,
            kind: "io",
            key: None,
            line: None,
            message: format!("cannot read {}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut config = parse_with_overrides(&text, &args.overrides)?;
    if let Some(dir) = &args.out {
        config.output.dir = dir.clone();
    }
    config.validate()?;
    Ok(config)
}

fn parse_splitting(s: &str) -> Outcome<Splitting> {
    match s {
        "lie" => Ok(Splitting::Lie),
        "strang" => Ok(Splitting::Strang),
        other => Err(Failure::usage(format!("unknown splitting `{other}` (lie | strang)"))),
    }
}

/// Builds the global rayon pool from the worker variable, if set.
pub fn init_workers() -> Outcome<()> {
    let Ok(raw) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::usage(format!("{WORKERS_ENV} must be a positive integer, got `{raw}`")))?;
    // A pool may already exist when called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn dispatch(command: Command, out: &mut dyn Write) -> Outcome<i32> {
    match command {
        Command::Version => {
            writeln!(out, "fbgsq {}", io::VERSION).map_err(io_failure)?;
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => cmd_simulate(&load(&args)?, out),
        Command::Squeeze(args) => cmd_squeeze(&load(&args)?, out),
        Command::Sweep {
            config,
            variable,
            values,
        } => {
            let variable = SweepVariable::parse(&variable).ok_or_else(|| {
                Failure::usage(format!(
                    "unknown sweep variable `{variable}` (input_intensity | grating_length | lo_phase | apodization_slope)"
                ))
            })?;
            init_workers()?;
            cmd_sweep(&load(&config)?, variable, values, out)
        }
        Command::Dispersion {
            config,
            delta_min,
            delta_max,
            points,
        } => cmd_dispersion(&load(&config)?, delta_min, delta_max, points, out),
        Command::Validate {
            points,
            steps,
            projections,
            seed,
            splitting,
            tolerance,
        } => {
            let opts = OracleOptions {
                points,
                steps,
                projections,
                seed,
                splitting: parse_splitting(&splitting)?,
            };
            cmd_validate(&opts, tolerance, out)
        }
    }
}

fn io_failure(e: std::io::Error) -> Failure {
    Failure::from(Error::Io(e))
}

fn write_sidecar(dir: &Path, stem: &str, sidecar: &io::Sidecar) -> Outcome<()> {
    sidecar.write(&dir.join(format!("{stem}.json")))?;
    Ok(())
}

fn cmd_simulate(config: &RunConfig, out: &mut dyn Write) -> Outcome<i32> {
    let scenario = config.scenario();
    let run = simulate(&scenario)?;
    let dir = &config.output.dir;
    let grid = run.history.grid;
    io::write_observables(&dir.join("observables.csv"), &run.observables)?;
    let mut states = io::snapshot_states(&run.history, config.output.snapshots);
    if config.output.snapshots > 0 && states.last().map(|s| s.t) != Some(run.final_state.t) {
        states.push(&run.final_state);
    }
    io::write_snapshots(&dir.join("snapshots.csv"), &grid, &states)?;
    let mut files = vec!["observables.csv".to_string(), "snapshots.csv".to_string()];
    if config.output.plot_script {
        io::write_text(&dir.join("observables.gp"), &io::observables_plot_script("observables.csv"))?;
        files.push("observables.gp".into());
    }
    let mut sidecar = io::Sidecar::new("simulate", config);
    sidecar.files = files;
    write_sidecar(dir, "simulate", &sidecar)?;
    let norm_drift = run.observables.max_relative_drift(|r| r.norm);
    let ham_drift = hamiltonian_drift(&scenario, &run);
    writeln!(
        out,
        "steps={} t_final_ps={} transmittance={} norm_drift={:e} hamiltonian_drift={:e} out={}",
        grid.n_steps,
        run.final_state.t,
        run.transmittance()?,
        norm_drift,
        ham_drift,
        dir.display()
    )
    .map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn cmd_squeeze(config: &RunConfig, out: &mut dyn Write) -> Outcome<i32> {
    let scenario = config.scenario();
    let eval = Evaluation::new(&scenario)?;
    let phase = match scenario.measurement.kind {
        fbgsq::measurement::MeasurementKind::PhotonNumber => 0.0,
        fbgsq::measurement::MeasurementKind::Homodyne => scenario.measurement.lo_phase,
    };
    let outcome = eval.outcome(phase)?;
    let dir = &config.output.dir;
    io::write_outcome(&dir.join("squeeze.csv"), &outcome, scenario.pulse.fwhm_ps)?;
    let (f_t, f_0) = eval.projections(phase);
    io::write_projections(
        &dir.join("projections.csv"),
        &eval.run.history.grid,
        &[("f_detected", &f_t), ("f_backpropagated", &f_0)],
    )?;
    let mut sidecar = io::Sidecar::new("squeeze", config);
    sidecar.files = vec!["squeeze.csv".into(), "projections.csv".into()];
    write_sidecar(dir, "squeeze", &sidecar)?;
    writeln!(
        out,
        "ratio={} ratio_db={} optimal_ratio={} optimal_db={} optimal_phase={} transmittance={} fwhm_ps={} out={}",
        outcome.ratio,
        outcome.ratio_db,
        outcome.optimal_ratio,
        outcome.optimal_db,
        outcome.optimal_phase,
        outcome.transmittance,
        outcome.fwhm_ps.map(|w| w.to_string()).unwrap_or_else(|| "none".into()),
        dir.display()
    )
    .map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(
    config: &RunConfig,
    variable: SweepVariable,
    values: Option<Vec<f64>>,
    out: &mut dyn Write,
) -> Outcome<i32> {
    let mut spec = SweepSpec::new(variable, config.scenario());
    if let Some(v) = values {
        spec.values = v;
    }
    let rows = sweep(&spec)?;
    let dir = &config.output.dir;
    let stem = variable.figure();
    let csv_name = format!("{stem}.csv");
    io::write_sweep(&dir.join(&csv_name), &rows, config.pulse.fwhm_ps)?;
    let mut files = vec![csv_name.clone()];
    if config.output.plot_script {
        io::write_text(&dir.join(format!("{stem}.gp")), &io::sweep_plot_script(&csv_name, variable))?;
        files.push(format!("{stem}.gp"));
    }
    let mut sidecar = io::Sidecar::new("sweep", config);
    sidecar.sweep_variable = Some(variable);
    sidecar.sweep_values = Some(&spec.values);
    sidecar.files = files;
    write_sidecar(dir, stem, &sidecar)?;
    let mut failed = 0;
    for row in &rows {
        match (&row.outcome, &row.error) {
            (Some(o), _) => writeln!(
                out,
                "{}={} ratio_db={} optimal_db={} transmittance={}",
                variable.name(),
                row.value,
                o.ratio_db,
                o.optimal_db,
                o.transmittance
            ),
            (None, e) => {
                failed += 1;
                writeln!(out, "{}={} error={}", variable.name(), row.value, e.as_deref().unwrap_or("unknown"))
            }
        }
        .map_err(io_failure)?;
    }
    if variable == SweepVariable::InputIntensity && rows.len() >= 7 {
        for column in [RatioColumn::Measured, RatioColumn::Optimal] {
            match alignment_of_rows(&rows, column) {
                Ok(Alignment::NoExtrema) => writeln!(out, "alignment[{column:?}]: no extrema"),
                Ok(Alignment::Pairs(pairs)) => {
                    let text: Vec<String> = pairs
                        .iter()
                        .map(|p| format!("{}->{} ({:+})", p.transmittance_max_at, p.ratio_min_at, p.offset))
                        .collect();
                    writeln!(out, "alignment[{column:?}]: {}", text.join(", "))
                }
                Err(e) => writeln!(out, "alignment[{column:?}]: {e}"),
            }
            .map_err(io_failure)?;
        }
    }
    writeln!(out, "rows={} failed={} out={}", rows.len(), failed, dir.join(&csv_name).display()).map_err(io_failure)?;
    if failed == rows.len() {
        return Err(Failure::numerical("every sweep row failed"));
    }
    Ok(EXIT_OK)
}

fn cmd_dispersion(
    config: &RunConfig,
    delta_min: f64,
    delta_max: f64,
    points: usize,
    out: &mut dyn Write,
) -> Outcome<i32> {
    if points < 2 || !(delta_min < delta_max) {
        return Err(Failure::usage("need --points >= 2 and --delta-min < --delta-max"));
    }
    let deltas: Vec<f64> = (0..points)
        .map(|k| delta_min + (delta_max - delta_min) * k as f64 / (points - 1) as f64)
        .collect();
    let dir = &config.output.dir;
    io::write_dispersion(&dir.join("dispersion.csv"), config.grating.kappa0, config.grating.length, &deltas)?;
    let mut sidecar = io::Sidecar::new("dispersion", config);
    sidecar.files = vec!["dispersion.csv".into()];
    write_sidecar(dir, "dispersion", &sidecar)?;
    writeln!(
        out,
        "kappa={} length={} points={} out={}",
        config.grating.kappa0,
        config.grating.length,
        points,
        dir.join("dispersion.csv").display()
    )
    .map_err(io_failure)?;
    Ok(EXIT_OK)
}

fn cmd_validate(opts: &OracleOptions, tolerance: f64, out: &mut dyn Write) -> Outcome<i32> {
    let report = validate_oracle(opts)?;
    writeln!(
        out,
        "points={} steps={} max_relative_error={:e} photon_number_error={:e} symplectic_defect={:e}",
        report.points, report.steps, report.max_relative_error, report.photon_number_error, report.symplectic_defect
    )
    .map_err(io_failure)?;
    if report.max_relative_error <= tolerance {
        Ok(EXIT_OK)
    } else {
        Err(Failure::numerical(format!(
            "max relative error {:e} exceeds {tolerance:e}",
            report.max_relative_error
        )))
    }
}
