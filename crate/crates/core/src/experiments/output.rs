//! `records.csv`, `manifest.json`, `report.txt` and the per-coupling plot
//! tables.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PointDiagnostics, Record, RunConfig, SweepResult};
use crate::error::{Error, Result};
use crate::scattering::{PLATEAU_STEP, PLATEAU_TOLERANCE};
use crate::spectral::{CriticalCoupling, EDGE_MARGIN_FRACTION, MIN_TRACKING_OVERLAP};
use crate::Lattice;

/// Column order of `records.csv`.
pub const RECORD_HEADER: [&str; 9] =
    ["lambda", "eps1", "eps2", "norm_mp", "norm_pm", "witness_transition", "in1", "in2", "unitarity_defect"];

/// Plot tables are named `{PLOT_PREFIX}{index:02}.csv`, one per coupling in
/// record order.
pub const PLOT_PREFIX: &str = "plot_lambda_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalRecord {
    pub lambda_c: f64,
    pub bracket: [f64; 2],
    pub tolerance: f64,
    pub threshold: f64,
    pub edge_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandRecord {
    pub lower_min: f64,
    pub lower_max: f64,
    pub upper_min: f64,
    pub upper_max: f64,
    pub gap_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub lambda_c_tol: f64,
    pub edge_margin_fraction: f64,
    pub min_tracking_overlap: f64,
    pub plateau_step: f64,
    pub plateau_tolerance: f64,
    pub ladder_stabilization: Option<f64>,
    pub dt_max: f64,
    pub substep_c: f64,
}

/// Run provenance; together with the crate version, `config` reproduces
/// `records.csv` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub lambda_c: CriticalRecord,
    pub bands: BandRecord,
    pub reflection_time: f64,
    pub tolerances: Tolerances,
    pub points: Vec<PointDiagnostics>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn new(
        config: &RunConfig,
        system: &Lattice,
        critical: &CriticalCoupling<f64>,
        points: &[PointDiagnostics],
        wall_time_seconds: f64,
    ) -> Self {
        let b = system.bands();
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            lambda_c: CriticalRecord {
                lambda_c: critical.lambda_c,
                bracket: [critical.bracket.0, critical.bracket.1],
                tolerance: critical.tolerance,
                threshold: critical.threshold,
                edge_margin: critical.edge_margin,
            },
            bands: BandRecord {
                lower_min: b.lower_min,
                lower_max: b.lower_max,
                upper_min: b.upper_min,
                upper_max: b.upper_max,
                gap_width: b.gap_width(),
            },
            reflection_time: system.reflection_time(),
            tolerances: Tolerances {
                lambda_c_tol: config.sweep.lambda_c_tol,
                edge_margin_fraction: EDGE_MARGIN_FRACTION,
                min_tracking_overlap: MIN_TRACKING_OVERLAP,
                plateau_step: PLATEAU_STEP,
                plateau_tolerance: PLATEAU_TOLERANCE,
                ladder_stabilization: config.sweep.ladder.map(|l| l.stabilization),
                dt_max: config.evolution.dt_max,
                substep_c: config.evolution.substep_c,
            },
            points: points.to_vec(),
            wall_time_seconds,
        }
    }
}

fn csv_error(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

/// Writes `records` with the header row, even when `records` is empty.
pub fn write_records(path: &Path, records: &[Record]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_error(path))?;
    w.write_record(RECORD_HEADER).map_err(csv_error(path))?;
    for r in records {
        w.serialize(r).map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

pub fn read_records(path: &Path) -> Result<Vec<Record>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error(path))?;
    r.deserialize().collect::<std::result::Result<Vec<Record>, _>>().map_err(csv_error(path))
}

fn write_plot(path: &Path, records: &[&Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error(path))?;
    w.write_record(["lambda", "eps1", "eps2", "norm_mp", "witness_transition"]).map_err(csv_error(path))?;
    let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.lambda.to_string(),
            r.eps1.to_string(),
            r.eps2.to_string(),
            cell(r.norm_mp),
            cell(r.witness_transition),
        ])
        .map_err(csv_error(path))?;
    }
    w.flush().map_err(io_error(path))
}

/// Writes every output file into `dir` and returns their paths.
///
/// `report.txt` holds the rendered report, or the reason it could not be
/// formed.
pub fn emit_outputs(result: &SweepResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(io_error(dir))?;
    let mut written = Vec::new();

    let records = dir.join("records.csv");
    write_records(&records, &result.records)?;
    written.push(records);

    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&result.manifest)
        .map_err(|source| Error::Json { context: manifest.display().to_string(), source })?;
    fs::write(&manifest, text + "\n").map_err(io_error(&manifest))?;
    written.push(manifest);

    let report = dir.join("report.txt");
    let text = match result.report() {
        Ok(rep) => rep.render(),
        Err(e) => format!("{e}\n"),
    };
    fs::write(&report, text).map_err(io_error(&report))?;
    written.push(report);

    let mut lambdas: Vec<f64> = Vec::new();
    for r in &result.records {
        if !lambdas.contains(&r.lambda) {
            lambdas.push(r.lambda);
        }
    }
    for (i, lambda) in lambdas.iter().enumerate() {
        let path = dir.join(format!("{PLOT_PREFIX}{i:02}.csv"));
        let rows: Vec<&Record> = result.records.iter().filter(|r| r.lambda == *lambda).collect();
        write_plot(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}
