//! Command-line front end. Exit codes: 0 success, 1 domain error, 2 usage
//! or configuration-file error.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use super::output::{BandRecord, CriticalRecord};
use super::{critical_coupling, emit_outputs, run_sweep, RunConfig};
use crate::error::{Error, Result};
use crate::scattering::{adiabatic_s, converged_horizon, ProbeSet};
use crate::spectral::dive_curve;
use crate::switching::SwitchingSchedule;
use crate::witness::{build_witness, cook_integral, tilde_phi};

#[derive(Debug, Parser)]
#[command(name = "overcrit", version, about = "Adiabatic switching and inter-band transitions in a lattice Dirac model")]
struct Cli {
    /// JSON run configuration; missing keys keep the reference defaults.
    #[arg(long, global = true, value_name = "JSON")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the band edges of H0 and the reflection time.
    Bands,
    /// Track the lowest gap eigenvalue over a coupling grid, as CSV.
    Dive {
        /// Largest coupling of the grid.
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        /// Grid points, including 0 and `lambda_max`.
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// Write the CSV here instead of standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Locate the critical coupling by bisection.
    LambdaC {
        /// Bisection tolerance; defaults to `sweep.lambda_c_tol`.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Full adiabatic S-matrix and its inter-band block norms.
    Smatrix {
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long)]
        eps1: f64,
        #[arg(long)]
        eps2: f64,
        /// Read `--lambda` as a multiple of the critical coupling.
        #[arg(long)]
        relative: bool,
    },
    /// Witness vector overlaps and transition for an over-critical coupling.
    Witness {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        eps1: f64,
        #[arg(long)]
        eps2: f64,
        /// Offset past the crossing point; defaults to `sweep.delta`.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        relative: bool,
    },
    /// Growth curve of the Cook integral of the auxiliary witness state, as CSV.
    Cook {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        eps1: f64,
        /// Upper integration limit; at most the reflection time.
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        /// Static Moller horizon; defaults to the first converged one.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        relative: bool,
    },
    /// Run the configured sweep and write its outputs.
    Sweep {
        /// Output directory; overrides `OVERCRIT_OUT` and the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A configuration file that could not be read or parsed.
#[derive(Debug)]
pub enum ConfigError {
    Read { path: PathBuf, source: std::io::Error },
    Parse { path: PathBuf, line: usize, column: usize, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Read { path, source } => write!(f, "{}: {source}", path.display()),
            Self::Parse { path, line, column, message } => {
                write!(f, "{}:{line}:{column}: {message}", path.display())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Reference defaults, overridden by the file at `path` if given.
pub fn load_config(path: Option<&Path>) -> std::result::Result<RunConfig, ConfigError> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|source| Error::Json { context: "command output".into(), source })?;
    writeln!(out, "{text}").map_err(|source| Error::Io { path: "<stdout>".into(), source })
}

fn stdout_error(source: std::io::Error) -> Error {
    Error::Io { path: "<stdout>".into(), source }
}

#[derive(Serialize)]
struct BandsOutput {
    #[serde(flatten)]
    bands: BandRecord,
    h0_norm: f64,
    reflection_time: f64,
}

fn absolute(config: &RunConfig, lambda: f64, relative: bool) -> Result<f64> {
    Ok(if relative { lambda * critical_coupling(config)?.lambda_c } else { lambda })
}

fn execute(command: Command, config: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let evolution = config.evolution();
    match command {
        Command::Bands => {
            let system = config.system()?;
            let b = system.bands();
            json(
                out,
                &BandsOutput {
                    bands: BandRecord {
                        lower_min: b.lower_min,
                        lower_max: b.lower_max,
                        upper_min: b.upper_min,
                        upper_max: b.upper_max,
                        gap_width: b.gap_width(),
                    },
                    h0_norm: system.h0_norm(),
                    reflection_time: system.reflection_time(),
                },
            )
        }
        Command::Dive { lambda_max, points, output } => {
            if !(lambda_max > 0.0) || points < 2 {
                return Err(Error::InvalidConfig("dive needs lambda_max > 0 and at least 2 points".into()));
            }
            let system = config.system()?;
            let grid: Vec<f64> = (0..points).map(|i| lambda_max * i as f64 / (points - 1) as f64).collect();
            let curve = dive_curve(&system, &grid)?;
            match output {
                Some(path) => curve.save_csv(&path),
                None => curve.write_csv(&mut *out).map_err(|source| Error::Csv { path: "<stdout>".into(), source }),
            }
        }
        Command::LambdaC { tol } => {
            let system = config.system()?;
            let c = crate::spectral::find_lambda_c(&system, tol.unwrap_or(config.sweep.lambda_c_tol))?;
            json(
                out,
                &CriticalRecord {
                    lambda_c: c.lambda_c,
                    bracket: [c.bracket.0, c.bracket.1],
                    tolerance: c.tolerance,
                    threshold: c.threshold,
                    edge_margin: c.edge_margin,
                },
            )
        }
        Command::Smatrix { lambda, eps1, eps2, relative } => {
            let system = config.system()?;
            let lambda = absolute(config, lambda, relative)?;
            let schedule = SwitchingSchedule::new(eps1, eps2, config.profile()?)?;
            let s = adiabatic_s(&system, lambda, &schedule, &evolution)?;
            json(out, &s.record(&system))
        }
        Command::Witness { lambda, eps1, eps2, delta, relative } => {
            let system = config.system()?;
            let critical = critical_coupling(config)?.lambda_c;
            let lambda = if relative { lambda * critical } else { lambda };
            let schedule = SwitchingSchedule::new(eps1, eps2, config.profile()?)?;
            let delta = delta.unwrap_or(config.sweep.delta);
            let bundle = build_witness(&system, lambda, critical, &schedule, delta, &evolution)?;
            json(out, &bundle.record())
        }
        Command::Cook { lambda, eps1, tmax, dt, horizon, relative } => {
            let system = config.system()?;
            let critical = critical_coupling(config)?.lambda_c;
            let lambda = if relative { lambda * critical } else { lambda };
            let profile = config.profile()?;
            let schedule = SwitchingSchedule::new(eps1, eps1, profile)?;
            let bundle = build_witness(&system, lambda, critical, &schedule, config.sweep.delta, &evolution)?;
            let probes = ProbeSet::reference(&system);
            let horizon = match horizon {
                Some(h) => h,
                None => converged_horizon(&system, lambda, &probes)?,
            };
            let aux = tilde_phi(&system, &bundle, profile, horizon, &probes, &evolution)?;
            let mut curve = cook_integral(&system, &aux.vector, tmax, dt)?;
            curve.eps1 = Some(eps1);
            writeln!(out, "t,integrand,partial_integral").map_err(stdout_error)?;
            for ((t, f), p) in curve.t_grid.iter().zip(&curve.integrand).zip(&curve.partial_integrals) {
                writeln!(out, "{t},{f},{p}").map_err(stdout_error)?;
            }
            Ok(())
        }
        Command::Sweep { output } => {
            let result = run_sweep(config)?;
            let dir = output.unwrap_or_else(|| config.output_dir());
            emit_outputs(&result, &dir)?;
            match result.report() {
                Ok(report) => write!(out, "{}", report.render()).map_err(stdout_error)?,
                Err(e) => writeln!(out, "{e}").map_err(stdout_error)?,
            }
            let failed = result.diagnostics.iter().filter(|d| d.error.is_some()).count();
            writeln!(out, "\n{} points, {failed} failed; outputs in {}", result.records.len(), dir.display())
                .map_err(stdout_error)
        }
    }
}

/// Runs the CLI on `argv` (program name first) with the given streams and
/// returns the exit code.
pub fn cli_main_with<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    2
                }
            };
        }
    };
    let config = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: invalid configuration file {e}");
            return 2;
        }
    };
    match execute(cli.command, &config, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

/// [`cli_main_with`] on the process streams.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    cli_main_with(argv, &mut stdout.lock(), &mut stderr.lock())
}
