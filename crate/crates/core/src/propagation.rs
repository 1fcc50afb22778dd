//! Time-ordered propagation under `H(t) = H0 + lambda phi_eps(t) V`.
//!
//! Everything here works in the `H0` eigenbasis. The interval of
//! integration is cut at the breakpoints of `phi_eps`. On pieces where
//! `phi_eps` is constant the propagator is an exact exponential: the free
//! evolution `exp(-i L H0)` outside the support, and `exp(-i L H_lambda)`
//! from a single eigendecomposition on the plateau. Only the two ramps are
//! stepped, with a uniform step per ramp of at most
//! `dt_max * min(1, c / max|d phi_eps/dt|)`.
//!
//! Integrators:
//!
//! - split step (default): Strang splitting
//!   `exp(-i h/2 H0) exp(-i h mu V) exp(-i h/2 H0)` with `mu` taken at the
//!   step midpoint. The kick is `I + B diag(exp(-i h mu d) - 1) B^dagger`,
//!   an exact unitary of rank `r`, so a step costs `O(dim * r)` per column.
//! - midpoint exponential: `exp(-i h H(t_mid))` through a full
//!   eigendecomposition per step; the reference for small models.
//!
//! Backward evolution runs the same partition with negative steps; each
//! backward step is the exact inverse of the matching forward step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, phase, to_f64, vec_norm, CMatrix, CVector, Real};
use crate::switching::SwitchingSchedule;
use crate::system::{SplitBlock, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    SplitStep,
    MidpointExponential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig<T> {
    pub dt_max: T,
    /// `c` in the ramp step cap `dt_max * min(1, c / max|d phi_eps/dt|)`.
    pub substep_c: T,
    pub integrator: Integrator,
}

impl<T: Real> Default for EvolutionConfig<T> {
    fn default() -> Self {
        Self { dt_max: lit(0.025), substep_c: lit(0.1), integrator: Integrator::SplitStep }
    }
}

impl<T: Real> EvolutionConfig<T> {
    pub fn with_dt(dt_max: T) -> Self {
        Self { dt_max, ..Self::default() }
    }

    /// Requires `dt_max <= 0.1 / ||H0||` and `c > 0`.
    pub fn validate(&self, system: &System<T>) -> Result<()> {
        if !(self.dt_max > T::zero()) || !self.dt_max.is_finite() {
            return Err(Error::InvalidConfig(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.substep_c > T::zero()) || !self.substep_c.is_finite() {
            return Err(Error::InvalidConfig(format!("substep_c must be positive, got {}", self.substep_c)));
        }
        let limit = lit::<T>(0.1) / system.h0_norm() * lit::<T>(1.0 + 1e-12);
        if self.dt_max > limit {
            return Err(Error::InvalidConfig(format!(
                "dt_max = {} exceeds the stability margin 0.1/||H0|| = {}",
                self.dt_max, limit
            )));
        }
        Ok(())
    }
}

/// JSON form of [`EvolutionConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionSettings {
    pub dt_max: f64,
    pub substep_c: f64,
    pub integrator: Integrator,
}

impl Default for EvolutionSettings {
    fn default() -> Self {
        Self { dt_max: 0.025, substep_c: 0.1, integrator: Integrator::SplitStep }
    }
}

impl EvolutionSettings {
    pub fn config<T: Real>(&self) -> EvolutionConfig<T> {
        EvolutionConfig { dt_max: lit(self.dt_max), substep_c: lit(self.substep_c), integrator: self.integrator }
    }
}

/// Position-space amplitudes of a state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T: Real> {
    pub amplitudes: CVector<T>,
}

impl<T: Real> StateVector<T> {
    pub fn new(amplitudes: CVector<T>) -> Self {
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        vec_norm(&self.amplitudes)
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self.amplitudes.unscale_mut(n);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PropagationStats {
    /// Ramp steps taken.
    pub steps: usize,
    /// Pieces evaluated as exact exponentials.
    pub exact_segments: usize,
    /// Largest relative change of a column norm.
    pub max_norm_drift: f64,
}

enum Piece<T> {
    Free,
    Plateau,
    Ramp { rate: T },
}

fn pieces<T: Real>(t_from: T, t_to: T, schedule: &SwitchingSchedule<T>) -> Vec<(T, T, Piece<T>)> {
    let (lo, hi) = if t_from <= t_to { (t_from, t_to) } else { (t_to, t_from) };
    let mut cuts = vec![lo];
    cuts.extend(schedule.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
    cuts.push(hi);
    let (s0, s1) = schedule.support();
    let (p0, p1) = schedule.plateau();
    let mut out: Vec<(T, T, Piece<T>)> = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let mid = (w[0] + w[1]) / lit::<T>(2.0);
            let kind = if mid <= s0 || mid >= s1 {
                Piece::Free
            } else if mid >= p0 && mid <= p1 {
                Piece::Plateau
            } else {
                Piece::Ramp { rate: schedule.rate_at(mid) }
            };
            (w[0], w[1], kind)
        })
        .collect();
    if t_from > t_to {
        out.reverse();
        out = out.into_iter().map(|(a, b, k)| (b, a, k)).collect();
    }
    out
}

/// Uniform ramp step count for a piece of length `len` with rate `rate`.
fn ramp_steps<T: Real>(len: T, rate: T, slope: T, config: &EvolutionConfig<T>) -> Result<usize> {
    let drive_rate = rate * slope;
    let cap = if drive_rate > T::zero() {
        config.dt_max * T::one().min(config.substep_c / drive_rate)
    } else {
        config.dt_max
    };
    let count = to_f64((len.abs() / cap).ceil()).max(1.0);
    if !count.is_finite() || count > 1e9 || !(cap > T::zero()) {
        return Err(Error::StepUnderflow { t_from: 0.0, t_to: to_f64(len), step: to_f64(cap) });
    }
    Ok(count as usize)
}

/// Ramp steps [`propagate_block`] will take on `[t_from, t_to]`.
pub fn estimate_steps<T: Real>(
    t_from: T,
    t_to: T,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<usize> {
    if lambda == T::zero() {
        return Ok(0);
    }
    let slope = schedule.profile.max_slope();
    let mut total = 0;
    for (a, b, kind) in pieces(t_from, t_to, schedule) {
        if let Piece::Ramp { rate } = kind {
            total += ramp_steps(b - a, rate, slope, config)?;
        }
    }
    Ok(total)
}

/// Applies `U(t_to, t_from)` to the columns of `block` (eigenbasis
/// coordinates) in place.
pub fn propagate_block<T: Real>(
    system: &System<T>,
    block: &mut CMatrix<T>,
    t_from: T,
    t_to: T,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<PropagationStats> {
    config.validate(system)?;
    if !t_from.is_finite() || !t_to.is_finite() {
        return Err(Error::InvalidConfig(format!("non-finite time interval [{t_from}, {t_to}]")));
    }
    let initial: Vec<T> = block.column_iter().map(|c| c.norm()).collect();
    let mut stats = PropagationStats::default();
    let slope = schedule.profile.max_slope();

    for (a, b, kind) in pieces(t_from, t_to, schedule) {
        let len = b - a;
        match kind {
            Piece::Free => {
                system.free_evolve_block(block, len);
                stats.exact_segments += 1;
            }
            _ if lambda == T::zero() => {
                system.free_evolve_block(block, len);
                stats.exact_segments += 1;
            }
            Piece::Plateau => {
                let dec = system.cached_coupled_decomposition(lambda);
                *block = dec.evolve_block(block, len);
                stats.exact_segments += 1;
            }
            Piece::Ramp { rate } => {
                let n = ramp_steps(len, rate, slope, config)?;
                let h = len / lit::<T>(n as f64);
                let scale = a.abs().max(b.abs()).max(T::one());
                if h.abs() <= T::default_epsilon() * lit::<T>(16.0) * scale {
                    return Err(Error::StepUnderflow { t_from: to_f64(a), t_to: to_f64(b), step: to_f64(h) });
                }
                let mid = |i: usize| a + (lit::<T>(i as f64) + lit::<T>(0.5)) * h;
                match config.integrator {
                    Integrator::SplitStep => {
                        let half = h / lit::<T>(2.0);
                        let full_phase = system.split_phases(h);
                        let half_phase = system.split_phases(half);
                        let mut split = SplitBlock::from_matrix(block);
                        half_phase.apply(&mut split);
                        let one = nalgebra::Complex::new(T::one(), T::zero());
                        for i in 0..n {
                            let mu = lambda * schedule.phi_eps(mid(i));
                            let kick: Vec<_> =
                                system.support_values().iter().map(|&d| phase(h * mu * d) - one).collect();
                            let drift = if i + 1 < n { &full_phase } else { &half_phase };
                            system.kick_and_drift(&mut split, &kick, drift);
                        }
                        split.write_to(block);
                    }
                    Integrator::MidpointExponential => {
                        for i in 0..n {
                            let mu = lambda * schedule.phi_eps(mid(i));
                            *block = system.coupled_decomposition(mu).evolve_block(block, h);
                        }
                    }
                }
                stats.steps += n;
            }
        }
    }

    stats.max_norm_drift = block
        .column_iter()
        .zip(&initial)
        .map(|(c, &n0)| if n0 > T::zero() { to_f64((c.norm() - n0).abs() / n0) } else { 0.0 })
        .fold(0.0, f64::max);
    Ok(stats)
}

/// `U(t_to, t_from) v` for `v` in eigenbasis coordinates.
pub fn evolve_eigen<T: Real>(
    system: &System<T>,
    v: &CVector<T>,
    t_from: T,
    t_to: T,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<(CVector<T>, PropagationStats)> {
    let mut block = CMatrix::from_column_slice(v.len(), 1, v.as_slice());
    let stats = propagate_block(system, &mut block, t_from, t_to, lambda, schedule, config)?;
    Ok((block.column(0).into_owned(), stats))
}

/// `U(t_to, t_from) state` in position coordinates.
pub fn evolve<T: Real>(
    system: &System<T>,
    state: &StateVector<T>,
    t_from: T,
    t_to: T,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<StateVector<T>> {
    if state.dim() != system.dim() {
        return Err(Error::InvalidConfig(format!(
            "state has dimension {}, system {}",
            state.dim(),
            system.dim()
        )));
    }
    let v = system.to_eigenbasis(&state.amplitudes);
    let (out, _) = evolve_eigen(system, &v, t_from, t_to, lambda, schedule, config)?;
    Ok(StateVector::new(system.from_eigenbasis(&out)))
}

/// `U(t_to, t_from)` as a matrix in the `H0` eigenbasis.
pub fn propagator<T: Real>(
    system: &System<T>,
    t_from: T,
    t_to: T,
    lambda: T,
    schedule: &SwitchingSchedule<T>,
    config: &EvolutionConfig<T>,
) -> Result<(CMatrix<T>, PropagationStats)> {
    let dim = system.dim();
    let mut u = CMatrix::identity(dim, dim);
    let stats = propagate_block(system, &mut u, t_from, t_to, lambda, schedule, config)?;
    Ok((u, stats))
}
