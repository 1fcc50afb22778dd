//! The dichotomy summary: a pure function of the records and `lambda_c`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Record;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Under,
    Over,
}

/// Direction of the headline value as `eps` shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Decreasing,
    Increasing,
    NonMonotone,
    /// Every point has the same value.
    Constant,
    /// Fewer than two usable points.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub lambda: f64,
    pub multiple: f64,
    pub regime: Regime,
    /// `norm_mp` below `lambda_c`, the witness transition above.
    pub values: Vec<(f64, f64, f64)>,
    pub finest_eps1: f64,
    pub finest_eps2: f64,
    pub finest_value: f64,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub lambda_c: f64,
    pub rows: Vec<LambdaSummary>,
    pub max_under_norm: f64,
    pub min_over_transition: f64,
    /// `min_over_transition - max_under_norm` at the finest points.
    pub separation: f64,
}

fn trend(values: &[f64]) -> Trend {
    if values.len() < 2 {
        return Trend::Undetermined;
    }
    let steps: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if steps.iter().all(|d| *d == 0.0) {
        Trend::Constant
    } else if steps.iter().all(|d| *d < 0.0) {
        Trend::Decreasing
    } else if steps.iter().all(|d| *d > 0.0) {
        Trend::Increasing
    } else {
        Trend::NonMonotone
    }
}

/// Summarizes the records per coupling.
///
/// Points are ordered from coarse to fine by `(eps1, eps2)` descending;
/// the finest point is the last one carrying a value. Records without a
/// value for their regime are ignored.
pub fn dichotomy_report(records: &[Record], lambda_c: f64) -> Result<Report> {
    let mut lambdas: Vec<f64> = Vec::new();
    for r in records {
        if !lambdas.contains(&r.lambda) {
            lambdas.push(r.lambda);
        }
    }
    let mut rows = Vec::new();
    for &lambda in &lambdas {
        let regime = if lambda > lambda_c { Regime::Over } else { Regime::Under };
        let mut values: Vec<(f64, f64, f64)> = records
            .iter()
            .filter(|r| r.lambda == lambda)
            .filter_map(|r| {
                let v = match regime {
                    Regime::Under => r.norm_mp,
                    Regime::Over => r.witness_transition,
                };
                v.filter(|x| x.is_finite()).map(|v| (r.eps1, r.eps2, v))
            })
            .collect();
        values.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let Some(&(finest_eps1, finest_eps2, finest_value)) = values.last() else {
            continue;
        };
        let series: Vec<f64> = values.iter().map(|v| v.2).collect();
        rows.push(LambdaSummary {
            lambda,
            multiple: lambda / lambda_c,
            regime,
            trend: trend(&series),
            values,
            finest_eps1,
            finest_eps2,
            finest_value,
        });
    }
    let finest = |regime| rows.iter().filter(move |r: &&LambdaSummary| r.regime == regime).map(|r| r.finest_value);
    let max_under = finest(Regime::Under).fold(f64::NEG_INFINITY, f64::max);
    let min_over = finest(Regime::Over).fold(f64::INFINITY, f64::min);
    if !max_under.is_finite() || !min_over.is_finite() {
        return Err(Error::InsufficientGrid(format!(
            "need usable under- and over-critical points, found {} under and {} over",
            finest(Regime::Under).count(),
            finest(Regime::Over).count()
        )));
    }
    Ok(Report { lambda_c, rows, max_under_norm: max_under, min_over_transition: min_over, separation: min_over - max_under })
}

impl Report {
    /// Fixed-format text; identical reports render identically.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "lambda_c = {:.10}", self.lambda_c);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "{:>12} {:>8} {:>6} {:>10} {:>10} {:>12} {:>14}",
            "lambda", "x l_c", "regime", "eps1", "eps2", "finest", "trend"
        );
        for r in &self.rows {
            let regime = match r.regime {
                Regime::Under => "under",
                Regime::Over => "over",
            };
            let trend = match r.trend {
                Trend::Decreasing => "decreasing",
                Trend::Increasing => "increasing",
                Trend::NonMonotone => "non-monotone",
                Trend::Constant => "constant",
                Trend::Undetermined => "undetermined",
            };
            let _ = writeln!(
                out,
                "{:>12.6} {:>8.4} {:>6} {:>10.6} {:>10.6} {:>12.6} {:>14}",
                r.lambda, r.multiple, regime, r.finest_eps1, r.finest_eps2, r.finest_value, trend
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "max under-critical norm_mp     = {:.6}", self.max_under_norm);
        let _ = writeln!(out, "min over-critical transition   = {:.6}", self.min_over_transition);
        let _ = writeln!(out, "separation                     = {:.6}", self.separation);
        out
    }
}
