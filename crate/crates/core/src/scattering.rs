//! Adiabatic and static Moller operators, scattering matrices and their
//! band blocks. Every matrix is expressed in the `H0` eigenbasis, so band
//! projectors are index sets.
//!
//! Exact adiabatic limits: `phi_eps` vanishes outside `[-2/eps1, 2/eps2]`,
//! so for `T >= 2/eps2` the propagator factorizes as
//! `U(T, 0) = exp(-i (T - 2/eps2) H0) U(2/eps2, 0)`. Hence
//! `U(T, 0)^dagger exp(-i T H0) = U(0, 2/eps2) exp(-i (2/eps2) H0)` for all
//! such `T`, and the strong limit defining `W+` is attained at the support
//! edge. The same argument at `T <= -2/eps1` gives
//! `W- = U(0, -2/eps1) exp(+i (2/eps1) H0)`, and
//! `S = (W-)^dagger W+ = exp(-i (2/eps1) H0) U(-2/eps1, 2/eps2) exp(-i (2/eps2) H0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Band, Window};
use crate::propagation::{propagate_block, EvolutionConfig, PropagationStats};
use crate::scalar::{
    cplx, frobenius, lit, phase, spectral_norm, submatrix, to_f64, unitarity_defect, vec_norm,
    CMatrix, CVector, Real,
};
use crate::spectral::SpectralDecomposition;
use crate::switching::SwitchingSchedule;
use crate::system::System;

/// Horizon step used for plateau detection.
pub const PLATEAU_STEP: f64 = 10.0;

/// Largest plateau residual accepted as converged.
pub const PLATEAU_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SKind {
    Adiabatic,
    StaticApproximant,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SDiagnostics<T> {
    /// `||S^dagger S - I||_F`.
    pub unitarity_defect: T,
    /// `||[S, H0]||_F / ||H0||_F`.
    pub commutator_ratio: Option<T>,
    /// `||[S, H0]||_F / gap`, an upper bound on both cross-band blocks.
    pub commutator_bound: Option<T>,
    /// Larger plateau residual of the two static Moller approximants.
    pub plateau_residual: Option<T>,
    /// Largest cross-band weight `||P_{-b} S psi_b||` over the probe set.
    pub probe_cross_block: Option<T>,
    pub steps: usize,
}

impl<T: Real> Default for SDiagnostics<T> {
    fn default() -> Self {
        Self {
            unitarity_defect: T::zero(),
            commutator_ratio: None,
            commutator_bound: None,
            plateau_residual: None,
            probe_cross_block: None,
            steps: 0,
        }
    }
}

/// A scattering matrix in the `H0` eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct SMatrix<T: Real> {
    pub matrix: CMatrix<T>,
    pub kind: SKind,
    pub lambda: T,
    pub eps1: Option<T>,
    pub eps2: Option<T>,
    pub horizon: Option<T>,
    pub diagnostics: SDiagnostics<T>,
}

/// Largest singular value of a block and whether a window was empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionNorm<T> {
    pub value: T,
    pub empty_window: bool,
}

/// `||P_H0(to) S P_H0(from)||`. An empty window yields `0` with
/// `empty_window` set.
pub fn transition_norm<T: Real>(
    s: &SMatrix<T>,
    system: &System<T>,
    from: &Window<T>,
    to: &Window<T>,
) -> TransitionNorm<T> {
    let dec = system.h0_decomposition();
    let cols = dec.indices_in(from);
    let rows = dec.indices_in(to);
    if cols.is_empty() || rows.is_empty() {
        return TransitionNorm { value: T::zero(), empty_window: true };
    }
    TransitionNorm { value: spectral_norm(&submatrix(&s.matrix, &rows, &cols)), empty_window: false }
}

/// `||P_to M P_from||` for band index sets.
pub fn band_block_norm<T: Real>(m: &CMatrix<T>, system: &System<T>, from: Band, to: Band) -> T {
    spectral_norm(&submatrix(m, system.band_indices(to), system.band_indices(from)))
}

impl<T: Real> SMatrix<T> {
    /// `||P- S P+||`.
    pub fn norm_mp(&self, system: &System<T>) -> T {
        band_block_norm(&self.matrix, system, Band::Upper, Band::Lower)
    }

    /// `||P+ S P-||`.
    pub fn norm_pm(&self, system: &System<T>) -> T {
        band_block_norm(&self.matrix, system, Band::Lower, Band::Upper)
    }

    pub fn record(&self, system: &System<T>) -> SRecord {
        SRecord {
            lambda: to_f64(self.lambda),
            eps1: self.eps1.map(to_f64),
            eps2: self.eps2.map(to_f64),
            norm_mp: to_f64(self.norm_mp(system)),
            norm_pm: to_f64(self.norm_pm(system)),
            unitarity_defect: to_f64(self.diagnostics.unitarity_defect),
            kind: self.kind,
        }
    }
}

/// JSON record of a scattering matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SRecord {
    pub lambda: f64,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    pub norm_mp: f64,
    pub norm_pm: f64,
    pub unitarity_defect: f64,
    pub kind: SKind,
}

/// Finite-horizon adiabatic Moller operator `U(0, T) exp(-i T H0)`; `T > 0` approximates `W+`, `T < 0` `W-`.
pub fn adiabatic_moller_at<T: Real>(
    system: &System<T>,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    horizon: T,
    config: &EvolutionConfig<T>,
) -> Result<(CMatrix<T>, PropagationStats)> {
    let dim = system.dim();
    let mut w = CMatrix::identity(dim, dim);
    system.free_evolve_block(&mut w, horizon);
    let stats = propagate_block(system, &mut w, horizon, T::zero(), lambda, schedule, config)?;
    Ok((w, stats))
}

/// `W+ = U(0, 2/eps2) exp(-i (2/eps2) H0)` or
/// `W- = U(0, -2/eps1) exp(+i (2/eps1) H0)`.
pub fn adiabatic_moller<T: Real>(
    system: &System<T>,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    side: Side,
    config: &EvolutionConfig<T>,
) -> Result<CMatrix<T>> {
    let (start, end) = schedule.support();
    let horizon = match side {
        Side::Plus => end,
        Side::Minus => start,
    };
    Ok(adiabatic_moller_at(system, lambda, schedule, horizon, config)?.0)
}

/// `S = exp(-i (2/eps1) H0) U(-2/eps1, 2/eps2) exp(-i (2/eps2) H0)` from one
/// backward propagation.
pub fn adiabatic_s<T: Real>(
    system: &System<T>,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<SMatrix<T>> {
    let (start, end) = schedule.support();
    let dim = system.dim();
    let mut s = CMatrix::identity(dim, dim);
    system.free_evolve_block(&mut s, end);
    let stats = propagate_block(system, &mut s, end, start, lambda, schedule, config)?;
    system.free_evolve_block(&mut s, -start);
    let defect = unitarity_defect(&s);
    Ok(SMatrix {
        matrix: s,
        kind: SKind::Adiabatic,
        lambda,
        eps1: Some(schedule.eps1),
        eps2: Some(schedule.eps2),
        horizon: None,
        diagnostics: SDiagnostics { unitarity_defect: defect, steps: stats.steps, ..SDiagnostics::default() },
    })
}

/// `(W-)^dagger W+` from the two Moller operators.
pub fn adiabatic_s_via_moller<T: Real>(
    system: &System<T>,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<CMatrix<T>> {
    let plus = adiabatic_moller(system, lambda, schedule, Side::Plus, config)?;
    let minus = adiabatic_moller(system, lambda, schedule, Side::Minus, config)?;
    Ok(minus.ad_mul(&plus))
}

/// `||P_to S P_from||` propagating only the `from` columns.
///
/// The free phases in `S` are diagonal, so the block norm equals that of
/// `U(-2/eps1, 2/eps2)`.
pub fn adiabatic_block_norm<T: Real>(
    system: &System<T>,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
    from: Band,
    to: Band,
) -> Result<(T, PropagationStats)> {
    let (start, end) = schedule.support();
    let dim = system.dim();
    let cols = system.band_indices(from);
    let mut block = CMatrix::<T>::zeros(dim, cols.len());
    for (c, &j) in cols.iter().enumerate() {
        block[(j, c)] = cplx(T::one(), T::zero());
    }
    let stats = propagate_block(system, &mut block, end, start, lambda, schedule, config)?;
    let rows = system.band_indices(to);
    let all: Vec<usize> = (0..cols.len()).collect();
    Ok((spectral_norm(&submatrix(&block, rows, &all)), stats))
}

/// A deterministic probe wave packet.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe<T: Real> {
    pub band: Band,
    pub momentum: T,
    /// Eigenbasis coordinates, unit norm, supported in `band`.
    pub vector: CVector<T>,
}

/// Gaussian packets centered at the well, width `n_sites / 16`, momenta
/// at the midpoints `-pi + (2j + 1) pi / count` of `count` equal cells of
/// the Brillouin zone, projected onto each band.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet<T: Real> {
    pub probes: Vec<Probe<T>>,
}

impl<T: Real> ProbeSet<T> {
    pub fn new(system: &System<T>, per_band: usize) -> Self {
        let model = system.model();
        let n = model.n_sites;
        let center = lit::<T>(model.well_center as f64);
        let width = lit::<T>(n as f64) / lit::<T>(16.0);
        let nf = lit::<T>(n as f64);
        let mut probes = Vec::with_capacity(2 * per_band);
        for band in [Band::Upper, Band::Lower] {
            for j in 0..per_band {
                let k = -T::pi() + lit::<T>((2 * j + 1) as f64) * T::pi() / lit::<T>(per_band as f64);
                let mut psi = CVector::<T>::zeros(2 * n);
                for site in 0..n {
                    let x = lit::<T>(site as f64);
                    let mut dx = x - center;
                    if model.boundary == crate::model::Boundary::Periodic {
                        let half = nf / lit::<T>(2.0);
                        let shifted = dx + half;
                        dx = shifted - nf * (shifted / nf).floor() - half;
                    }
                    let env = (-(dx * dx) / (lit::<T>(2.0) * width * width)).exp();
                    let z = phase(-k * x) * cplx(env, T::zero());
                    psi[2 * site] = z;
                    psi[2 * site + 1] = z;
                }
                let mut v = system.to_eigenbasis(&psi);
                let keep = system.band_indices(band);
                let mut mask = vec![false; v.len()];
                keep.iter().for_each(|&i| mask[i] = true);
                for (i, z) in v.iter_mut().enumerate() {
                    if !mask[i] {
                        *z = cplx(T::zero(), T::zero());
                    }
                }
                let norm = vec_norm(&v);
                v.unscale_mut(norm);
                probes.push(Probe { band, momentum: k, vector: v });
            }
        }
        Self { probes }
    }

    pub fn reference(system: &System<T>) -> Self {
        Self::new(system, 4)
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }

    /// Probe vectors as matrix columns.
    pub fn matrix(&self) -> CMatrix<T> {
        let dim = self.probes.first().map_or(0, |p| p.vector.len());
        CMatrix::from_fn(dim, self.probes.len(), |i, j| self.probes[j].vector[i])
    }

    /// `max_b ||P_{other(b)} M psi_b||`.
    pub fn cross_band_weight(&self, m: &CMatrix<T>, system: &System<T>) -> T {
        let images = m * self.matrix();
        self.probes
            .iter()
            .enumerate()
            .map(|(c, p)| {
                let other = match p.band {
                    Band::Upper => Band::Lower,
                    _ => Band::Upper,
                };
                crate::scalar::partial_norm(&images.column(c).into_owned(), system.band_indices(other))
            })
            .fold(T::zero(), |acc, v| acc.max(v))
    }
}

/// Finite-horizon static Moller operator
/// `W+(T) = exp(i T H_lambda) exp(-i T H0)` or
/// `W-(T) = exp(-i T H_lambda) exp(i T H0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollerApproximant<T: Real> {
    pub matrix: CMatrix<T>,
    pub side: Side,
    pub horizon: T,
    /// `max_psi ||(W(T) - W(T - 10)) psi||` over the probe set.
    pub plateau_residual: T,
}

fn static_moller_apply<T: Real>(
    system: &System<T>,
    dec: &SpectralDecomposition<T>,
    horizon: T,
    side: Side,
    block: &CMatrix<T>,
) -> CMatrix<T> {
    let t = match side {
        Side::Plus => horizon,
        Side::Minus => -horizon,
    };
    let mut m = block.clone();
    system.free_evolve_block(&mut m, t);
    dec.evolve_block(&m, -t)
}

fn check_horizon<T: Real>(system: &System<T>, horizon: T) -> Result<()> {
    let t_max = system.reflection_time();
    if !(horizon >= T::zero()) || horizon > t_max {
        return Err(Error::InvalidConfig(format!(
            "horizon {horizon} outside [0, {t_max}] (reflection guard)"
        )));
    }
    Ok(())
}

pub fn static_moller<T: Real>(
    system: &System<T>,
    lambda: T,
    horizon: T,
    side: Side,
    probes: &ProbeSet<T>,
) -> Result<MollerApproximant<T>> {
    check_horizon(system, horizon)?;
    let dec = system.cached_coupled_decomposition(lambda);
    let dim = system.dim();
    let matrix = static_moller_apply(system, &dec, horizon, side, &CMatrix::identity(dim, dim));
    let earlier = (horizon - lit::<T>(PLATEAU_STEP)).max(T::zero());
    let p = probes.matrix();
    let diff = &matrix * &p - static_moller_apply(system, &dec, earlier, side, &p);
    let plateau_residual = diff.column_iter().map(|c| c.norm()).fold(T::zero(), |a, v| a.max(v));
    Ok(MollerApproximant { matrix, side, horizon, plateau_residual })
}

/// Plateau residual of the static Moller operator on the probes at
/// `horizon`, without forming the full matrix.
pub fn plateau_residual<T: Real>(
    system: &System<T>,
    lambda: T,
    horizon: T,
    side: Side,
    probes: &ProbeSet<T>,
) -> Result<T> {
    check_horizon(system, horizon)?;
    let dec = system.cached_coupled_decomposition(lambda);
    let p = probes.matrix();
    let earlier = (horizon - lit::<T>(PLATEAU_STEP)).max(T::zero());
    let diff = static_moller_apply(system, &dec, horizon, side, &p)
        - static_moller_apply(system, &dec, earlier, side, &p);
    Ok(diff.column_iter().map(|c| c.norm()).fold(T::zero(), |a, v| a.max(v)))
}

/// First horizon of the ladder `10, 20, ...` below the reflection time at
/// which both static Moller operators have a plateau residual of at most
/// 0.05.
pub fn converged_horizon<T: Real>(system: &System<T>, lambda: T, probes: &ProbeSet<T>) -> Result<T> {
    let t_max = system.reflection_time();
    let step = lit::<T>(PLATEAU_STEP);
    let tol = lit::<T>(PLATEAU_TOLERANCE);
    let mut horizon = step;
    let mut last = (T::zero(), T::zero());
    while horizon <= t_max {
        let r = plateau_residual(system, lambda, horizon, Side::Plus, probes)?
            .max(plateau_residual(system, lambda, horizon, Side::Minus, probes)?);
        if r <= tol {
            return Ok(horizon);
        }
        last = (horizon, r);
        horizon += step;
    }
    Err(Error::NoPlateau { horizon: to_f64(last.0), residual: to_f64(last.1) })
}

/// Finite-horizon static scattering matrix
/// `S(T) = W-(T)^dagger W+(T) = exp(-i T H0) exp(2 i T H_lambda) exp(-i T H0)`.
///
/// Fails with `NoPlateau` unless both approximants pass the plateau check.
pub fn static_s<T: Real>(
    system: &System<T>,
    lambda: T,
    horizon: T,
    probes: &ProbeSet<T>,
) -> Result<SMatrix<T>> {
    let plus = static_moller(system, lambda, horizon, Side::Plus, probes)?;
    let minus = static_moller(system, lambda, horizon, Side::Minus, probes)?;
    let residual = plus.plateau_residual.max(minus.plateau_residual);
    if residual > lit::<T>(PLATEAU_TOLERANCE) {
        return Err(Error::NoPlateau { horizon: to_f64(horizon), residual: to_f64(residual) });
    }
    let s = minus.matrix.ad_mul(&plus.matrix);
    let e = system.energies();
    let commutator = CMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * cplx(e[j] - e[i], T::zero()));
    let c = frobenius(&commutator);
    let h0_norm = e.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let diagnostics = SDiagnostics {
        unitarity_defect: unitarity_defect(&s),
        commutator_ratio: Some(c / h0_norm),
        commutator_bound: Some(c / system.bands().gap_width()),
        plateau_residual: Some(residual),
        probe_cross_block: Some(probes.cross_band_weight(&s, system)),
        steps: 0,
    };
    Ok(SMatrix {
        matrix: s,
        kind: SKind::StaticApproximant,
        lambda,
        eps1: None,
        eps2: None,
        horizon: Some(horizon),
        diagnostics,
    })
}
