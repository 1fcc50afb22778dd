//! The smooth plateau bump and the two-sided adiabatic switching factor.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// `phi(s) = 1` for `|s| <= 1`, `0` for `|s| >= 2`, and
/// `g(2 - |s|)` in between, where
/// `g(x) = 1 / (1 + exp(a/x - a/(1-x)))` is the exponential smooth step of
/// sharpness `a`. Every derivative of `g` vanishes at `x = 0` and `x = 1`,
/// and `g(1/2) = 1/2` for every `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile<T> {
    pub sharpness: T,
}

impl<T: Real> Default for BumpProfile<T> {
    fn default() -> Self {
        Self { sharpness: T::one() }
    }
}

impl<T: Real> BumpProfile<T> {
    pub fn new(sharpness: T) -> Result<Self> {
        if !(sharpness > T::zero()) || !sharpness.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "transition sharpness must be positive, got {sharpness}"
            )));
        }
        Ok(Self { sharpness })
    }

    /// Smooth step on `[0, 1]`.
    pub fn step(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if x >= T::one() {
            return T::one();
        }
        let a = self.sharpness;
        T::one() / (T::one() + (a / x - a / (T::one() - x)).exp())
    }

    /// `dg/dx`.
    pub fn step_derivative(&self, x: T) -> T {
        if x <= T::zero() || x >= T::one() {
            return T::zero();
        }
        let g = self.step(x);
        if g == T::zero() || g == T::one() {
            return T::zero();
        }
        let y = T::one() - x;
        self.sharpness * (T::one() / (x * x) + T::one() / (y * y)) * g * (T::one() - g)
    }

    pub fn phi(&self, s: T) -> T {
        let a = s.abs();
        let two = lit::<T>(2.0);
        if a <= T::one() {
            T::one()
        } else if a >= two {
            T::zero()
        } else {
            self.step(two - a)
        }
    }

    /// `dphi/ds`.
    pub fn dphi(&self, s: T) -> T {
        let a = s.abs();
        let two = lit::<T>(2.0);
        if a <= T::one() || a >= two {
            return T::zero();
        }
        let d = -self.step_derivative(two - a);
        if s < T::zero() {
            -d
        } else {
            d
        }
    }

    /// `max |phi'|`, sampled on 4001 points of `(1, 2)`.
    pub fn max_slope(&self) -> T {
        let n = 4000;
        (1..n)
            .map(|k| self.step_derivative(lit::<T>(k as f64) / lit::<T>(n as f64)))
            .fold(T::zero(), |acc, v| acc.max(v))
    }
}

/// `phi_eps(t) = phi(eps1 t)` for `t < 0` and `phi(eps2 t)` for `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchingSchedule<T> {
    pub eps1: T,
    pub eps2: T,
    pub profile: BumpProfile<T>,
}

impl<T: Real> SwitchingSchedule<T> {
    pub fn new(eps1: T, eps2: T, profile: BumpProfile<T>) -> Result<Self> {
        for (name, e) in [("eps1", eps1), ("eps2", eps2)] {
            if !(e > T::zero()) || !e.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {e}")));
            }
        }
        Ok(Self { eps1, eps2, profile })
    }

    pub fn symmetric(eps: T) -> Result<Self> {
        Self::new(eps, eps, BumpProfile::default())
    }

    /// Rate governing time `t`.
    pub fn rate_at(&self, t: T) -> T {
        if t < T::zero() {
            self.eps1
        } else {
            self.eps2
        }
    }

    pub fn phi_eps(&self, t: T) -> T {
        self.profile.phi(self.rate_at(t) * t)
    }

    pub fn dphi_eps(&self, t: T) -> T {
        let e = self.rate_at(t);
        e * self.profile.dphi(e * t)
    }

    /// `[-2/eps1, 2/eps2]`.
    pub fn support(&self) -> (T, T) {
        let two = lit::<T>(2.0);
        (-two / self.eps1, two / self.eps2)
    }

    /// `[-1/eps1, 1/eps2]`, where `phi_eps = 1`.
    pub fn plateau(&self) -> (T, T) {
        (-T::one() / self.eps1, T::one() / self.eps2)
    }

    /// Points where `phi_eps` changes its analytic form, ascending.
    pub fn breakpoints(&self) -> [T; 5] {
        let (s0, s1) = self.support();
        let (p0, p1) = self.plateau();
        [s0, p0, T::zero(), p1, s1]
    }
}

/// The unique `s0` in `(1, 2)` with `phi(-s0) = lambda_c / lambda`, by
/// bisection to `1e-10`.
pub fn find_s0<T: Real>(profile: &BumpProfile<T>, lambda: T, lambda_c: T) -> Result<T> {
    if !(lambda_c > T::zero()) || !(lambda > lambda_c) {
        return Err(Error::OverUnderCritical { lambda: to_f64(lambda), lambda_c: to_f64(lambda_c) });
    }
    let ratio = lambda_c / lambda;
    let (mut lo, mut hi) = (T::one(), lit::<T>(2.0));
    let tol = crate::scalar::tolerance::<T>(1e-10);
    while hi - lo > tol {
        let mid = (lo + hi) / lit::<T>(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if profile.phi(-mid) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) / lit::<T>(2.0))
}

/// JSON form of the switching parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchingConfig {
    pub transition_sharpness: f64,
}

impl Default for SwitchingConfig {
    fn default() -> Self {
        Self { transition_sharpness: 1.0 }
    }
}

impl SwitchingConfig {
    pub fn profile<T: Real>(&self) -> Result<BumpProfile<T>> {
        BumpProfile::new(lit(self.transition_sharpness))
    }
}
