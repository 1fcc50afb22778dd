//! Sweeps over coupling and switching rates, the dichotomy report, file
//! outputs and the command-line interface.
//!
//! A sweep evaluates, at every grid point `(lambda, eps1, eps2)`, the
//! full-matrix block norms of the adiabatic `S` whenever the estimated cost
//! `steps * dim^2` fits the configured budget, and the witness transition
//! `||P- S phi||` whenever `lambda > lambda_c`. Couplings are given as
//! multiples of `lambda_c`. Records come out in grid order: couplings in
//! the order listed, then the `(eps1, eps2)` pairs in pairing order.
//!
//! With a ladder configured, over-critical couplings follow the iterated
//! limit instead of the `(eps1, eps2)` grid: see [`witness_ladder`].

mod cli;
mod output;
mod report;

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cli::{cli_main, cli_main_with, load_config, ConfigError};
pub use output::{emit_outputs, read_records, write_records, Manifest, PLOT_PREFIX};
pub use report::{dichotomy_report, LambdaSummary, Regime, Report, Trend};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, TwoBandModel};
use crate::propagation::{estimate_steps, EvolutionSettings};
use crate::scattering::adiabatic_s;
use crate::spectral::{find_lambda_c, CriticalCoupling};
use crate::switching::{SwitchingConfig, SwitchingSchedule};
use crate::witness::{witness_prefix, WitnessBundle};
use crate::{Bump, Evolution, Lattice};

/// Environment variable that overrides [`SweepSettings::output_dir`].
pub const OUTPUT_ENV: &str = "OVERCRIT_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `eps1_list[i]` with `eps2_list[i]`.
    Diagonal,
    /// Every `eps1` with every `eps2`, `eps1` outermost.
    Grid,
}

/// Iterated-limit protocol for over-critical couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSettings {
    /// Halving of `eps2` stops once the transition moves by less than this.
    pub stabilization: f64,
    /// Cap on halvings of `eps2` per rung.
    pub max_halvings: usize,
}

impl Default for LadderSettings {
    fn default() -> Self {
        Self { stabilization: 0.01, max_halvings: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    /// Couplings in units of `lambda_c`.
    pub lambda_multiples: Vec<f64>,
    pub eps1_list: Vec<f64>,
    pub eps2_list: Vec<f64>,
    pub pairing: Pairing,
    pub delta: f64,
    pub lambda_c_tol: f64,
    /// Largest `steps * dim^2` for which the full `S` is computed.
    pub cost_budget: f64,
    /// Multiples of `lambda_c` rejected by validation; `null` disables.
    pub exclude_near_critical: Option<[f64; 2]>,
    pub ladder: Option<LadderSettings>,
    pub output_dir: PathBuf,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            lambda_multiples: vec![0.5, 1.2],
            eps1_list: vec![0.5, 0.25, 0.125, 0.0625],
            eps2_list: vec![0.5, 0.25, 0.125, 0.0625],
            pairing: Pairing::Diagonal,
            delta: 0.1,
            lambda_c_tol: 1e-6,
            cost_budget: 2e9,
            exclude_near_critical: Some([0.95, 1.05]),
            ladder: None,
            output_dir: PathBuf::from("overcrit-out"),
        }
    }
}

impl SweepSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.lambda_multiples.is_empty() || self.eps1_list.is_empty() || self.eps2_list.is_empty() {
            return bad("lambda_multiples, eps1_list and eps2_list must be nonempty".into());
        }
        if let Some(m) = self.lambda_multiples.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return bad(format!("lambda multiple {m} must be finite and non-negative"));
        }
        for (name, list) in [("eps1_list", &self.eps1_list), ("eps2_list", &self.eps2_list)] {
            if let Some(e) = list.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
                return bad(format!("{name} entry {e} outside (0, 1]"));
            }
        }
        if self.pairing == Pairing::Diagonal && self.eps1_list.len() != self.eps2_list.len() {
            return bad(format!(
                "diagonal pairing needs equal list lengths, got {} and {}",
                self.eps1_list.len(),
                self.eps2_list.len()
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.lambda_c_tol > 0.0) {
            return bad(format!("lambda_c_tol must be positive, got {}", self.lambda_c_tol));
        }
        if !(self.cost_budget >= 0.0) {
            return bad(format!("cost_budget must be non-negative, got {}", self.cost_budget));
        }
        if let Some([lo, hi]) = self.exclude_near_critical {
            if !(lo <= hi) {
                return bad(format!("exclude_near_critical needs lo <= hi, got [{lo}, {hi}]"));
            }
            if let Some(m) = self.lambda_multiples.iter().find(|m| **m >= lo && **m <= hi) {
                return bad(format!("lambda multiple {m} lies in the excluded near-critical band [{lo}, {hi}]"));
            }
        }
        if let Some(l) = self.ladder {
            if !(l.stabilization > 0.0) || l.max_halvings == 0 {
                return bad("ladder needs stabilization > 0 and max_halvings >= 1".into());
            }
        }
        Ok(())
    }

    /// `(eps1, eps2)` pairs in evaluation order.
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        match self.pairing {
            Pairing::Diagonal => self.eps1_list.iter().copied().zip(self.eps2_list.iter().copied()).collect(),
            Pairing::Grid => self
                .eps1_list
                .iter()
                .flat_map(|&a| self.eps2_list.iter().map(move |&b| (a, b)))
                .collect(),
        }
    }
}

/// Complete run configuration; every section falls back to its defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub switching: SwitchingConfig,
    pub evolution: EvolutionSettings,
    pub sweep: SweepSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { context: "run configuration".into(), source })
    }

    /// `OVERCRIT_OUT` if set, else `sweep.output_dir`.
    pub fn output_dir(&self) -> PathBuf {
        std::env::var_os(OUTPUT_ENV).map(PathBuf::from).unwrap_or_else(|| self.sweep.output_dir.clone())
    }

    pub fn system(&self) -> Result<Lattice> {
        Lattice::new(TwoBandModel::from_config(&self.model)?)
    }

    pub fn evolution(&self) -> Evolution {
        self.evolution.config()
    }

    pub fn profile(&self) -> Result<Bump> {
        self.switching.profile()
    }
}

/// One row of `records.csv`. Missing values are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub norm_mp: Option<f64>,
    pub norm_pm: Option<f64>,
    pub witness_transition: Option<f64>,
    pub in1: Option<f64>,
    pub in2: Option<f64>,
    /// Largest defect seen at the point: `||S^dagger S - I||` of the full
    /// matrix, or the norm drift of the witness propagation.
    pub unitarity_defect: Option<f64>,
}

impl Record {
    fn empty(lambda: f64, eps1: f64, eps2: f64) -> Self {
        Self {
            lambda,
            eps1,
            eps2,
            norm_mp: None,
            norm_pm: None,
            witness_transition: None,
            in1: None,
            in2: None,
            unitarity_defect: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FullMatrix {
    Computed,
    /// Estimated `steps * dim^2` exceeded the budget.
    SkippedOverBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderStop {
    /// Successive transitions differed by less than the threshold.
    Stabilized,
    /// Halving further would switch off later than the reflection time.
    ReflectionGuard,
    HalvingLimit,
}

/// Everything about a grid point that does not go into `records.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointDiagnostics {
    pub lambda_multiple: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub estimated_cost: f64,
    pub full_matrix: FullMatrix,
    pub steps: usize,
    pub witness_steps: usize,
    pub s0: Option<f64>,
    pub ladder_stop: Option<LadderStop>,
    /// `(eps2, transition)` visited by the ladder on this rung.
    pub ladder_history: Vec<(f64, f64)>,
    pub error: Option<String>,
}

impl PointDiagnostics {
    fn new(lambda_multiple: f64, eps1: f64, eps2: f64) -> Self {
        Self {
            lambda_multiple,
            eps1,
            eps2,
            estimated_cost: 0.0,
            full_matrix: FullMatrix::SkippedOverBudget,
            steps: 0,
            witness_steps: 0,
            s0: None,
            ladder_stop: None,
            ladder_history: Vec::new(),
            error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<Record>,
    pub diagnostics: Vec<PointDiagnostics>,
    pub manifest: Manifest,
}

impl SweepResult {
    pub fn report(&self) -> Result<Report> {
        dichotomy_report(&self.records, self.manifest.lambda_c.lambda_c)
    }
}

/// One rung of the iterated-limit ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub eps1: f64,
    /// `eps2` at which the rung stopped.
    pub eps2: f64,
    pub bundle: WitnessBundle<f64>,
    pub history: Vec<(f64, f64)>,
    pub stop: LadderStop,
}

/// Iterated limit `eps2 -> 0` inside `eps1 -> 0`.
///
/// For each `eps1` (in the given order) the inner loop starts at
/// `min(eps1, eps2 of the previous rung)` and halves `eps2` until the
/// witness transition moves by less than `ladder.stabilization`. Halving
/// also stops when `2 / eps2` would exceed the reflection time of the
/// lattice: later switch-off times let the outgoing wave wrap around the
/// periodic chain and re-enter the well.
#[allow(clippy::too_many_arguments)]
pub fn witness_ladder(
    system: &Lattice,
    lambda: f64,
    lambda_c: f64,
    eps1_list: &[f64],
    profile: Bump,
    delta: f64,
    ladder: &LadderSettings,
    config: &Evolution,
) -> Result<Vec<LadderRung>> {
    let horizon = system.reflection_time() * (1.0 + 1e-9);
    let fits = |eps2: f64| 2.0 / eps2 <= horizon;
    let mut rungs: Vec<LadderRung> = Vec::with_capacity(eps1_list.len());
    for &eps1 in eps1_list {
        let prefix = witness_prefix(system, lambda, lambda_c, eps1, profile, delta, config)?;
        let mut eps2 = rungs.last().map_or(eps1, |r| r.eps2.min(eps1));
        let mut bundle = prefix.complete(system, eps2, config)?;
        let mut history = vec![(eps2, bundle.transition)];
        let mut stop = LadderStop::HalvingLimit;
        for _ in 0..ladder.max_halvings {
            let next = eps2 / 2.0;
            if !fits(next) {
                stop = LadderStop::ReflectionGuard;
                break;
            }
            let candidate = prefix.complete(system, next, config)?;
            history.push((next, candidate.transition));
            let change = (candidate.transition - bundle.transition).abs();
            eps2 = next;
            bundle = candidate;
            if change < ladder.stabilization {
                stop = LadderStop::Stabilized;
                break;
            }
        }
        rungs.push(LadderRung { eps1, eps2, bundle, history, stop });
    }
    Ok(rungs)
}

/// Full-matrix part of a grid point.
fn full_matrix_point(
    system: &Lattice,
    lambda: f64,
    schedule: &SwitchingSchedule<f64>,
    budget: f64,
    config: &Evolution,
    record: &mut Record,
    diag: &mut PointDiagnostics,
) -> Result<()> {
    let (start, end) = schedule.support();
    let steps = estimate_steps(end, start, lambda, schedule, config)?;
    let dim = system.dim() as f64;
    diag.estimated_cost = steps as f64 * dim * dim;
    if diag.estimated_cost > budget {
        diag.full_matrix = FullMatrix::SkippedOverBudget;
        return Ok(());
    }
    let s = adiabatic_s(system, lambda, schedule, config)?;
    record.norm_mp = Some(s.norm_mp(system));
    record.norm_pm = Some(s.norm_pm(system));
    record.unitarity_defect = Some(s.diagnostics.unitarity_defect);
    diag.full_matrix = FullMatrix::Computed;
    diag.steps = s.diagnostics.steps;
    Ok(())
}

fn witness_point(bundle: &WitnessBundle<f64>, record: &mut Record, diag: &mut PointDiagnostics) {
    record.witness_transition = Some(bundle.transition);
    record.in1 = Some(bundle.in1_overlap);
    record.in2 = Some(bundle.in2_overlap);
    record.unitarity_defect = Some(record.unitarity_defect.unwrap_or(0.0).max(bundle.unitarity_defect));
    diag.witness_steps = bundle.steps;
    diag.s0 = Some(bundle.s0);
}

struct Context<'a> {
    system: &'a Lattice,
    lambda_c: f64,
    profile: Bump,
    evolution: Evolution,
    settings: &'a SweepSettings,
}

impl Context<'_> {
    fn grid_point(&self, multiple: f64, eps1: f64, eps2: f64) -> (Record, PointDiagnostics) {
        let lambda = multiple * self.lambda_c;
        let mut record = Record::empty(lambda, eps1, eps2);
        let mut diag = PointDiagnostics::new(multiple, eps1, eps2);
        let outcome = (|| -> Result<()> {
            let schedule = SwitchingSchedule::new(eps1, eps2, self.profile)?;
            let budget = self.settings.cost_budget;
            full_matrix_point(self.system, lambda, &schedule, budget, &self.evolution, &mut record, &mut diag)?;
            if lambda > self.lambda_c {
                let prefix = witness_prefix(
                    self.system,
                    lambda,
                    self.lambda_c,
                    eps1,
                    self.profile,
                    self.settings.delta,
                    &self.evolution,
                )?;
                let bundle = prefix.complete(self.system, eps2, &self.evolution)?;
                witness_point(&bundle, &mut record, &mut diag);
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            diag.error = Some(e.to_string());
        }
        (record, diag)
    }

    fn ladder_points(&self, multiple: f64, ladder: &LadderSettings) -> Vec<(Record, PointDiagnostics)> {
        let lambda = multiple * self.lambda_c;
        let eps1_list = &self.settings.eps1_list;
        let rungs = witness_ladder(
            self.system,
            lambda,
            self.lambda_c,
            eps1_list,
            self.profile,
            self.settings.delta,
            ladder,
            &self.evolution,
        );
        let rungs = match rungs {
            Ok(r) => r,
            Err(e) => {
                return eps1_list
                    .iter()
                    .map(|&eps1| {
                        let mut diag = PointDiagnostics::new(multiple, eps1, eps1);
                        diag.error = Some(e.to_string());
                        (Record::empty(lambda, eps1, eps1), diag)
                    })
                    .collect();
            }
        };
        rungs
            .into_iter()
            .map(|rung| {
                let mut record = Record::empty(lambda, rung.eps1, rung.eps2);
                let mut diag = PointDiagnostics::new(multiple, rung.eps1, rung.eps2);
                let full = SwitchingSchedule::new(rung.eps1, rung.eps2, self.profile).and_then(|schedule| {
                    let budget = self.settings.cost_budget;
                    full_matrix_point(self.system, lambda, &schedule, budget, &self.evolution, &mut record, &mut diag)
                });
                if let Err(e) = full {
                    diag.error = Some(e.to_string());
                }
                witness_point(&rung.bundle, &mut record, &mut diag);
                diag.ladder_stop = Some(rung.stop);
                diag.ladder_history = rung.history;
                (record, diag)
            })
            .collect()
    }
}

/// Runs the configured sweep. Failures at individual points are recorded
/// in their diagnostics and leave the record's values empty.
pub fn run_sweep(config: &RunConfig) -> Result<SweepResult> {
    let clock = Instant::now();
    config.sweep.validate()?;
    let system = config.system()?;
    let evolution = config.evolution();
    evolution.validate(&system)?;
    let profile = config.profile()?;
    let critical = find_lambda_c(&system, config.sweep.lambda_c_tol)?;
    let ctx = Context { system: &system, lambda_c: critical.lambda_c, profile, evolution, settings: &config.sweep };

    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for &multiple in &config.sweep.lambda_multiples {
        let points = match config.sweep.ladder {
            Some(ladder) if multiple > 1.0 => ctx.ladder_points(multiple, &ladder),
            _ => config.sweep.pairs().into_iter().map(|(a, b)| ctx.grid_point(multiple, a, b)).collect(),
        };
        for (r, d) in points {
            records.push(r);
            diagnostics.push(d);
        }
    }
    let manifest = Manifest::new(config, &system, &critical, &diagnostics, clock.elapsed().as_secs_f64());
    Ok(SweepResult { records, diagnostics, manifest })
}

/// `lambda_c` of the configured model, as the sweep computes it.
pub fn critical_coupling(config: &RunConfig) -> Result<CriticalCoupling<f64>> {
    find_lambda_c(&config.system()?, config.sweep.lambda_c_tol)
}
