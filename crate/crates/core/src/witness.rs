//! The over-critical witness: the gap eigenvector at the moment the
//! switched coupling crosses `lambda_c`, its evolution through the switching
//! window, the adiabatic overlaps along the way, the auxiliary vector
//! `phi_tilde` and the Cook integrand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Band, Window};
use crate::propagation::{evolve_eigen, EvolutionConfig, StateVector};
use crate::scalar::{cplx, lit, modulus, partial_norm, to_f64, vec_norm, CVector, Real};
use crate::scattering::{plateau_residual, ProbeSet, Side, PLATEAU_TOLERANCE};
use crate::switching::{find_s0, BumpProfile, SwitchingSchedule};
use crate::system::System;

/// Lowest gap eigenpair of `H0 + lambda_eff V`, eigenbasis coordinates.
///
/// The phase makes the largest-magnitude position amplitude (lowest index
/// on ties) real and positive.
pub fn ground_gap_eigen<T: Real>(system: &System<T>, lambda_eff: T) -> Result<(T, CVector<T>)> {
    let dec = system.cached_coupled_decomposition(lambda_eff);
    let gap = system.bands().gap();
    let Some(&j) = dec.indices_in(&gap).first() else {
        return Err(Error::NoGapState { lambda_eff: to_f64(lambda_eff) });
    };
    let v = dec.eigenvectors.column(j).into_owned();
    let position = system.from_eigenbasis(&v);
    let mut best = 0;
    for (i, z) in position.iter().enumerate() {
        if modulus(*z) > modulus(position[best]) {
            best = i;
        }
    }
    let z = position[best];
    let fix = z.conj() / cplx(modulus(z), T::zero());
    Ok((dec.eigenvalues[j], v.map(|a| a * fix)))
}

/// [`ground_gap_eigen`] in position coordinates.
pub fn ground_gap_vector<T: Real>(system: &System<T>, lambda_eff: T) -> Result<(T, StateVector<T>)> {
    let (e, v) = ground_gap_eigen(system, lambda_eff)?;
    Ok((e, StateVector::new(system.from_eigenbasis(&v))))
}

/// Part of the witness fixed by the switch-on rate alone.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessPrefix<T: Real> {
    pub lambda: T,
    pub lambda_c: T,
    pub eps1: T,
    pub delta: T,
    pub s0: T,
    pub profile: BumpProfile<T>,
    /// `-(s0 + delta) / eps1`.
    pub t1: T,
    /// `lambda * phi(-(s0 + delta))`.
    pub mu1: T,
    pub energy: T,
    /// Eigenbasis coordinates of `psi_g`.
    pub psi_g: CVector<T>,
    /// `U(-2/eps1, t1) psi_g`, eigenbasis coordinates.
    pub phi_prime: CVector<T>,
    /// `U(0, -2/eps1) phi_prime`, eigenbasis coordinates.
    pub chi: CVector<T>,
    /// `||P_H0(sigma+) phi_prime||`.
    pub in1: T,
    /// `||P_H_lambda((-inf, b-]) chi||`.
    pub in2: T,
    pub norm_drift: f64,
    pub steps: usize,
}

/// The witness vectors and overlaps at one `(lambda, eps1, eps2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessBundle<T: Real> {
    pub lambda: T,
    pub lambda_c: T,
    pub eps1: T,
    pub eps2: T,
    pub delta: T,
    pub s0: T,
    pub energy: T,
    pub psi_g: StateVector<T>,
    pub phi_prime: StateVector<T>,
    /// `exp(-i (2/eps1) H0) phi_prime`.
    pub phi: StateVector<T>,
    /// `U(0, -2/eps1) phi_prime` in eigenbasis coordinates.
    pub chi: CVector<T>,
    pub in1_overlap: T,
    pub in2_overlap: T,
    /// `||P_H0(sigma-) U(2/eps2, 0) chi||`.
    pub transition: T,
    /// Largest relative norm drift over the three propagations.
    pub unitarity_defect: f64,
    pub steps: usize,
}

/// JSON record of a witness bundle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub lambda: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub delta: f64,
    pub s0: f64,
    pub in1: f64,
    pub in2: f64,
    pub transition: f64,
    pub unitarity_defect: f64,
}

impl<T: Real> WitnessBundle<T> {
    pub fn record(&self) -> WitnessRecord {
        WitnessRecord {
            lambda: to_f64(self.lambda),
            eps1: to_f64(self.eps1),
            eps2: to_f64(self.eps2),
            delta: to_f64(self.delta),
            s0: to_f64(self.s0),
            in1: to_f64(self.in1_overlap),
            in2: to_f64(self.in2_overlap),
            transition: to_f64(self.transition),
            unitarity_defect: self.unitarity_defect,
        }
    }

    pub fn schedule(&self, profile: BumpProfile<T>) -> Result<SwitchingSchedule<T>> {
        SwitchingSchedule::new(self.eps1, self.eps2, profile)
    }
}

/// Computes everything up to `t = 0`: `psi_g`, `phi_prime`, `chi`, `in1`,
/// `in2`.
pub fn witness_prefix<T: Real>(
    system: &System<T>,
    lambda: T,
    lambda_c: T,
    eps1: T,
    profile: BumpProfile<T>,
    delta: T,
    config: &EvolutionConfig<T>,
) -> Result<WitnessPrefix<T>> {
    if !(delta > T::zero() && delta < T::one()) {
        return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {delta}")));
    }
    let s0 = find_s0(&profile, lambda, lambda_c)?;
    // eps2 plays no role before t = 0.
    let schedule = SwitchingSchedule::new(eps1, eps1, profile)?;
    let t1 = -(s0 + delta) / eps1;
    let mu1 = lambda * schedule.phi_eps(t1);
    let (energy, psi_g) = ground_gap_eigen(system, mu1)?;

    let start = schedule.support().0;
    let (phi_prime, back) = evolve_eigen(system, &psi_g, t1, start, lambda, &schedule, config)?;
    let in1 = partial_norm(&phi_prime, system.band_indices(Band::Upper));
    let (chi, fwd) = evolve_eigen(system, &phi_prime, start, T::zero(), lambda, &schedule, config)?;
    let dec = system.cached_coupled_decomposition(lambda);
    let in2 = dec.projected_norm(&chi, &Window::at_most(system.bands().lower_max));

    Ok(WitnessPrefix {
        lambda,
        lambda_c,
        eps1,
        delta,
        s0,
        profile,
        t1,
        mu1,
        energy,
        psi_g,
        phi_prime,
        chi,
        in1,
        in2,
        norm_drift: back.max_norm_drift.max(fwd.max_norm_drift),
        steps: back.steps + fwd.steps,
    })
}

impl<T: Real> WitnessPrefix<T> {
    /// Evolves `chi` over `[0, 2/eps2]` and assembles the bundle.
    pub fn complete(&self, system: &System<T>, eps2: T, config: &EvolutionConfig<T>) -> Result<WitnessBundle<T>> {
        let schedule = SwitchingSchedule::new(self.eps1, eps2, self.profile)?;
        let end = schedule.support().1;
        let (out, stats) = evolve_eigen(system, &self.chi, T::zero(), end, self.lambda, &schedule, config)?;
        let transition = partial_norm(&out, system.band_indices(Band::Lower));
        let mut phi = self.phi_prime.clone();
        let mut block = nalgebra::DMatrix::from_column_slice(phi.len(), 1, phi.as_slice());
        system.free_evolve_block(&mut block, lit::<T>(2.0) / self.eps1);
        phi.copy_from(&block.column(0));
        Ok(WitnessBundle {
            lambda: self.lambda,
            lambda_c: self.lambda_c,
            eps1: self.eps1,
            eps2,
            delta: self.delta,
            s0: self.s0,
            energy: self.energy,
            psi_g: StateVector::new(system.from_eigenbasis(&self.psi_g)),
            phi_prime: StateVector::new(system.from_eigenbasis(&self.phi_prime)),
            phi: StateVector::new(system.from_eigenbasis(&phi)),
            chi: self.chi.clone(),
            in1_overlap: self.in1,
            in2_overlap: self.in2,
            transition,
            unitarity_defect: self.norm_drift.max(stats.max_norm_drift),
            steps: self.steps + stats.steps,
        })
    }
}

/// Full witness at `(lambda, schedule.eps1, schedule.eps2)`.
pub fn build_witness<T: Real>(
    system: &System<T>,
    lambda: T,
    lambda_c: T,
    schedule: &SwitchingSchedule<T>,
    delta: T,
    config: &EvolutionConfig<T>,
) -> Result<WitnessBundle<T>> {
    witness_prefix(system, lambda, lambda_c, schedule.eps1, schedule.profile, delta, config)?
        .complete(system, schedule.eps2, config)
}

/// `phi_tilde = P_H0(sigma-) W+(T)^dagger chi` with the static Moller
/// approximant at horizon `T`, and the error terms of the overlap chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TildePhi<T: Real> {
    pub vector: StateVector<T>,
    /// Eigenbasis coordinates.
    pub eigen: CVector<T>,
    pub horizon: T,
    pub norm: T,
    /// `||(W+_eps2 - W+(T)) phi_tilde||`.
    pub moller_distance: T,
    /// `|<W+_eps2 phi_tilde, chi>|`, a lower bound for the transition.
    pub chain_overlap: T,
    pub plateau_residual: T,
}

pub fn tilde_phi<T: Real>(
    system: &System<T>,
    bundle: &WitnessBundle<T>,
    profile: BumpProfile<T>,
    horizon: T,
    probes: &ProbeSet<T>,
    config: &EvolutionConfig<T>,
) -> Result<TildePhi<T>> {
    if !(bundle.lambda > bundle.lambda_c) {
        return Err(Error::OverUnderCritical { lambda: to_f64(bundle.lambda), lambda_c: to_f64(bundle.lambda_c) });
    }
    let residual = plateau_residual(system, bundle.lambda, horizon, Side::Plus, probes)?;
    if residual > lit::<T>(PLATEAU_TOLERANCE) {
        return Err(Error::NoPlateau { horizon: to_f64(horizon), residual: to_f64(residual) });
    }
    let dec = system.cached_coupled_decomposition(bundle.lambda);
    let one_col = |v: &CVector<T>| nalgebra::DMatrix::from_column_slice(v.len(), 1, v.as_slice());

    // W+(T)^dagger chi = exp(i T H0) exp(-i T H_lambda) chi.
    let mut pulled = dec.evolve_block(&one_col(&bundle.chi), horizon);
    system.free_evolve_block(&mut pulled, -horizon);
    let mut eigen = pulled.column(0).into_owned();
    for &i in system.band_indices(Band::Upper) {
        eigen[i] = cplx(T::zero(), T::zero());
    }

    // W+(T) phi_tilde.
    let mut static_image = one_col(&eigen);
    system.free_evolve_block(&mut static_image, horizon);
    let static_image = dec.evolve_block(&static_image, -horizon);

    // W+_eps2 phi_tilde = U(0, 2/eps2) exp(-i (2/eps2) H0) phi_tilde.
    let schedule = bundle.schedule(profile)?;
    let end = schedule.support().1;
    let mut seed = one_col(&eigen);
    system.free_evolve_block(&mut seed, end);
    let (adiabatic_image, _) =
        evolve_eigen(system, &seed.column(0).into_owned(), end, T::zero(), bundle.lambda, &schedule, config)?;

    let moller_distance = vec_norm(&(&adiabatic_image - static_image.column(0)));
    let chain_overlap = modulus(adiabatic_image.dotc(&bundle.chi));
    Ok(TildePhi {
        vector: StateVector::new(system.from_eigenbasis(&eigen)),
        norm: vec_norm(&eigen),
        eigen,
        horizon,
        moller_distance,
        chain_overlap,
        plateau_residual: residual,
    })
}

/// `t -> ||V exp(-i t H0) state||` on a uniform grid and its running
/// trapezoid integral.
#[derive(Debug, Clone, PartialEq)]
pub struct CookCurve<T> {
    pub eps1: Option<T>,
    pub t_grid: Vec<T>,
    pub integrand: Vec<T>,
    pub partial_integrals: Vec<T>,
}

/// `t_max` is capped by the reflection time of the lattice.
pub fn cook_integral<T: Real>(
    system: &System<T>,
    state: &StateVector<T>,
    t_max: T,
    dt: T,
) -> Result<CookCurve<T>> {
    if !(dt > T::zero()) || !(t_max >= T::zero()) {
        return Err(Error::InvalidConfig(format!("cook grid needs dt > 0 and t_max >= 0, got {dt}, {t_max}")));
    }
    let guard = system.reflection_time();
    if t_max > guard {
        return Err(Error::InvalidConfig(format!("t_max = {t_max} exceeds the reflection time {guard}")));
    }
    let v = system.to_eigenbasis(&state.amplitudes);
    let steps = to_f64((t_max / dt).ceil()) as usize;
    let mut curve = CookCurve { eps1: None, t_grid: vec![], integrand: vec![], partial_integrals: vec![] };
    let mut total = T::zero();
    for k in 0..=steps {
        let t = (lit::<T>(k as f64) * dt).min(t_max);
        let mut block = nalgebra::DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        system.free_evolve_block(&mut block, t);
        let f = system.potential_norm_of(&block.column(0).into_owned());
        if let (Some(&tp), Some(&fp)) = (curve.t_grid.last(), curve.integrand.last()) {
            total += (t - tp) * (f + fp) / lit::<T>(2.0);
        }
        curve.t_grid.push(t);
        curve.integrand.push(f);
        curve.partial_integrals.push(total);
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, TwoBandModel};

    fn small() -> System<f64> {
        let cfg = ModelConfig { n_sites: 32, ..ModelConfig::reference() };
        System::new(TwoBandModel::from_config(&cfg).unwrap()).unwrap()
    }

    #[test]
    fn no_gap_state_without_coupling() {
        let sys = small();
        assert!(matches!(ground_gap_vector(&sys, 0.0), Err(Error::NoGapState { .. })));
    }

    #[test]
    fn gap_vector_phase_is_fixed() {
        let sys = small();
        let (e, v) = ground_gap_vector(&sys, 0.8).unwrap();
        assert!(sys.bands().gap().contains(e));
        let top = v.amplitudes.iter().max_by(|a, b| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap()).unwrap();
        assert!(top.im.abs() < 1e-14 && top.re > 0.0);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn undercritical_witness_rejected() {
        let sys = small();
        let s = SwitchingSchedule::symmetric(0.5).unwrap();
        let r = build_witness(&sys, 0.5, 1.0, &s, 0.1, &EvolutionConfig::default());
        assert!(matches!(r, Err(Error::OverUnderCritical { .. })));
    }

    #[test]
    fn cook_curve_for_zero_potential_vanishes() {
        let cfg = ModelConfig { n_sites: 16, well_depth: 0.0, ..ModelConfig::reference() };
        let sys = System::<f64>::new(TwoBandModel::from_config(&cfg).unwrap()).unwrap();
        let mut amps = CVector::zeros(32);
        amps[3] = cplx(1.0, 0.0);
        let curve = cook_integral(&sys, &StateVector::new(amps), 4.0, 0.5).unwrap();
        assert_eq!(curve.t_grid.len(), 9);
        assert!(curve.integrand.iter().all(|&f| f == 0.0));
    }
}
