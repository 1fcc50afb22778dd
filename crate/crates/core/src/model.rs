//! The two-band lattice Dirac model, its Hamiltonian, the square-well
//! perturbation and the band windows of the free spectrum.
//!
//! State vectors have dimension `2 * n_sites`; the amplitude of component
//! `c` (0 = upper, 1 = lower spinor entry) on site `n` lives at index
//! `2 * n + c`.

use std::ops::Bound;

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cplx, frobenius, lit, tolerance, CMatrix, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Box,
}

/// JSON form of the model parameters.
///
/// Missing keys fall back to the reference configuration; a missing
/// `well_center` resolves to `n_sites / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub mass: f64,
    pub hopping: f64,
    pub wilson: f64,
    pub boundary: Boundary,
    pub well_depth: f64,
    pub well_halfwidth: usize,
    pub well_center: Option<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl ModelConfig {
    /// 256 sites, m = 0.5, kappa = 1, r = 0.5, square well of depth 1 and
    /// half-width 4 in the middle of a periodic chain.
    pub fn reference() -> Self {
        Self {
            n_sites: 256,
            mass: 0.5,
            hopping: 1.0,
            wilson: 0.5,
            boundary: Boundary::Periodic,
            well_depth: 1.0,
            well_halfwidth: 4,
            well_center: None,
        }
    }

    pub fn resolved_center(&self) -> usize {
        self.well_center.unwrap_or(self.n_sites / 2)
    }
}

/// Validated lattice parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBandModel<T> {
    pub n_sites: usize,
    pub mass: T,
    pub hopping: T,
    pub wilson: T,
    pub boundary: Boundary,
    pub well_depth: T,
    pub well_halfwidth: usize,
    pub well_center: usize,
}

impl<T: Real> TwoBandModel<T> {
    pub fn from_config(config: &ModelConfig) -> Result<Self> {
        let model = Self {
            n_sites: config.n_sites,
            mass: lit(config.mass),
            hopping: lit(config.hopping),
            wilson: lit(config.wilson),
            boundary: config.boundary,
            well_depth: lit(config.well_depth),
            well_halfwidth: config.well_halfwidth,
            well_center: config.resolved_center(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn reference() -> Self {
        Self::from_config(&ModelConfig::reference()).expect("reference model is valid")
    }

    pub fn to_config(&self) -> ModelConfig {
        use crate::scalar::to_f64;
        ModelConfig {
            n_sites: self.n_sites,
            mass: to_f64(self.mass),
            hopping: to_f64(self.hopping),
            wilson: to_f64(self.wilson),
            boundary: self.boundary,
            well_depth: to_f64(self.well_depth),
            well_halfwidth: self.well_halfwidth,
            well_center: Some(self.well_center),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidModel(msg));
        if self.n_sites < 4 {
            return bad(format!("n_sites = {} but at least 4 sites are required", self.n_sites));
        }
        if !(self.mass > T::zero()) || !self.mass.is_finite() {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.hopping >= T::zero()) || !self.hopping.is_finite() {
            return bad(format!("hopping must be non-negative, got {}", self.hopping));
        }
        if !(self.wilson >= T::zero()) || !self.wilson.is_finite() {
            return bad(format!("wilson must be non-negative, got {}", self.wilson));
        }
        if !(self.well_depth >= T::zero()) || !self.well_depth.is_finite() {
            return bad(format!("well_depth must be non-negative, got {}", self.well_depth));
        }
        let (c, w, n) = (self.well_center, self.well_halfwidth, self.n_sites);
        if c >= n {
            return bad(format!("well_center {c} outside a lattice of {n} sites"));
        }
        match self.boundary {
            Boundary::Periodic => {
                if 2 * w + 1 > n {
                    return bad(format!("well of half-width {w} does not fit {n} sites"));
                }
            }
            Boundary::Box => {
                if c < w + 1 || c + w + 1 >= n {
                    return bad(format!(
                        "well [{}, {}] must lie strictly inside the box [0, {}]",
                        c as i64 - w as i64,
                        c + w,
                        n - 1
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        2 * self.n_sites
    }

    /// Sites inside the well, ascending.
    pub fn well_sites(&self) -> Vec<usize> {
        let n = self.n_sites as i64;
        let c = self.well_center as i64;
        let w = self.well_halfwidth as i64;
        let mut sites: Vec<usize> = (c - w..=c + w)
            .map(|s| s.rem_euclid(n) as usize)
            .collect();
        sites.sort_unstable();
        sites
    }

    /// Positive branch of the periodic-chain dispersion,
    /// `sqrt((m + 2r(1 - cos k))^2 + kappa^2 sin^2 k)`.
    pub fn dispersion(&self, k: T) -> T {
        let a = self.mass + lit::<T>(2.0) * self.wilson * (T::one() - k.cos());
        let b = self.hopping * k.sin();
        (a * a + b * b).sqrt()
    }

    /// `dE/dk` of [`Self::dispersion`].
    pub fn group_velocity(&self, k: T) -> T {
        let a = self.mass + lit::<T>(2.0) * self.wilson * (T::one() - k.cos());
        let b = self.hopping * k.sin();
        let e = (a * a + b * b).sqrt();
        (a * lit::<T>(2.0) * self.wilson * k.sin() + b * self.hopping * k.cos()) / e
    }

    /// Largest `|dE/dk|` over the Brillouin zone, sampled on 4096 momenta.
    pub fn max_group_velocity(&self) -> T {
        let samples = 4096;
        (0..samples)
            .map(|j| {
                let k = T::two_pi() * lit::<T>(j as f64) / lit::<T>(samples as f64);
                self.group_velocity(k).abs()
            })
            .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
    }

    /// Time for a wave launched at the well to travel half the lattice at
    /// the maximal group velocity, `n_sites / (2 v_max)`.
    pub fn reflection_time(&self) -> T {
        let v = self.max_group_velocity();
        if v > T::zero() {
            lit::<T>(self.n_sites as f64) / (lit::<T>(2.0) * v)
        } else {
            T::max_value().unwrap_or_else(|| lit(1e30))
        }
    }
}

/// Dense Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator<T: Real> {
    matrix: CMatrix<T>,
}

impl<T: Real> HermitianOperator<T> {
    /// Accepts `matrix` if it is square and `||M - M^dagger||_F <= 1e-12 ||M||_F`.
    pub fn new(matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidModel(format!(
                "operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let defect = relative_hermiticity_defect(&matrix);
        if defect > tolerance::<T>(1e-12) {
            return Err(Error::NotHermitian { defect: crate::scalar::to_f64(defect) });
        }
        Ok(Self { matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }

    pub fn hermiticity_defect(&self) -> T {
        relative_hermiticity_defect(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> T {
        frobenius(&self.matrix)
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, other: &Self, a: T) -> Self {
        assert_eq!(self.dim(), other.dim(), "operator dimensions differ");
        let a = cplx(a, T::zero());
        Self { matrix: &self.matrix + other.matrix.map(|z| z * a) }
    }

    /// Diagonal entries, if the operator is real and diagonal.
    pub fn real_diagonal(&self) -> Option<Vec<T>> {
        let n = self.dim();
        let zero = T::zero();
        for j in 0..n {
            for i in 0..n {
                let z = self.matrix[(i, j)];
                if (i != j && (z.re != zero || z.im != zero)) || (i == j && z.im != zero) {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.matrix[(i, i)].re).collect())
    }
}

fn relative_hermiticity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let norm = frobenius(m);
    if norm == T::zero() {
        return T::zero();
    }
    frobenius(&(m - m.adjoint())) / norm
}

/// `H0` of the Wilson-Dirac chain:
/// `(H0 psi)_n = sz [m psi_n + r (2 psi_n - psi_{n+1} - psi_{n-1})]
///             - i kappa sx (psi_{n+1} - psi_{n-1}) / 2`.
///
/// Open ends of the box are Dirichlet (`psi_{-1} = psi_N = 0`).
pub fn build_h0<T: Real>(model: &TwoBandModel<T>) -> Result<HermitianOperator<T>> {
    model.validate()?;
    let n = model.n_sites;
    let mut h = CMatrix::<T>::zeros(2 * n, 2 * n);
    let two = lit::<T>(2.0);
    let onsite = model.mass + two * model.wilson;
    let half_k = model.hopping / two;
    for site in 0..n {
        h[(2 * site, 2 * site)] = cplx(onsite, T::zero());
        h[(2 * site + 1, 2 * site + 1)] = cplx(-onsite, T::zero());
        let next = match model.boundary {
            Boundary::Periodic => (site + 1) % n,
            Boundary::Box if site + 1 < n => site + 1,
            Boundary::Box => continue,
        };
        // Block <site| H |next> = -r sz - i (kappa/2) sx.
        let block = [
            [cplx(-model.wilson, T::zero()), cplx(T::zero(), -half_k)],
            [cplx(T::zero(), -half_k), cplx(model.wilson, T::zero())],
        ];
        for (a, row) in block.iter().enumerate() {
            for (b, &z) in row.iter().enumerate() {
                h[(2 * site + a, 2 * next + b)] += z;
                h[(2 * next + b, 2 * site + a)] += z.conj();
            }
        }
    }
    HermitianOperator::new(h)
}

/// `V = -v * chi_well (x) I2`: real, diagonal, non-positive.
pub fn build_potential<T: Real>(model: &TwoBandModel<T>) -> Result<HermitianOperator<T>> {
    model.validate()?;
    let dim = model.dim();
    let mut v = CMatrix::<T>::zeros(dim, dim);
    if model.well_depth > T::zero() {
        for site in model.well_sites() {
            v[(2 * site, 2 * site)] = cplx(-model.well_depth, T::zero());
            v[(2 * site + 1, 2 * site + 1)] = cplx(-model.well_depth, T::zero());
        }
    }
    HermitianOperator::new(v)
}

/// `H0 + lambda_eff * V`.
pub fn h_of<T: Real>(
    h0: &HermitianOperator<T>,
    potential: &HermitianOperator<T>,
    lambda_eff: T,
) -> HermitianOperator<T> {
    h0.add_scaled(potential, lambda_eff)
}

/// Real interval with arbitrary (open, closed or missing) ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window<T> {
    pub lo: Bound<T>,
    pub hi: Bound<T>,
}

impl<T: Real> Window<T> {
    pub fn closed(lo: T, hi: T) -> Self {
        Self { lo: Bound::Included(lo), hi: Bound::Included(hi) }
    }

    pub fn open(lo: T, hi: T) -> Self {
        Self { lo: Bound::Excluded(lo), hi: Bound::Excluded(hi) }
    }

    pub fn at_most(hi: T) -> Self {
        Self { lo: Bound::Unbounded, hi: Bound::Included(hi) }
    }

    pub fn at_least(lo: T) -> Self {
        Self { lo: Bound::Included(lo), hi: Bound::Unbounded }
    }

    pub fn everything() -> Self {
        Self { lo: Bound::Unbounded, hi: Bound::Unbounded }
    }

    pub fn contains(&self, x: T) -> bool {
        let above = match self.lo {
            Bound::Included(a) => x >= a,
            Bound::Excluded(a) => x > a,
            Bound::Unbounded => true,
        };
        let below = match self.hi {
            Bound::Included(b) => x <= b,
            Bound::Excluded(b) => x < b,
            Bound::Unbounded => true,
        };
        above && below
    }
}

/// Which part of the spectrum a window refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Lower,
    Gap,
    Upper,
}

/// Band windows of the free spectrum.
///
/// `sigma_minus = [a-, b-]`, `sigma_plus = [a+, b+]`, gap `(b-, a+)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandWindows<T> {
    pub lower_min: T,
    pub lower_max: T,
    pub upper_min: T,
    pub upper_max: T,
}

impl<T: Real> BandWindows<T> {
    pub fn sigma_minus(&self) -> Window<T> {
        Window::closed(self.lower_min, self.lower_max)
    }

    pub fn sigma_plus(&self) -> Window<T> {
        Window::closed(self.upper_min, self.upper_max)
    }

    pub fn gap(&self) -> Window<T> {
        Window::open(self.lower_max, self.upper_min)
    }

    pub fn gap_width(&self) -> T {
        self.upper_min - self.lower_max
    }

    /// Spectral windows used to classify the spectrum of a perturbed
    /// operator: everything at or below `b-`, the open gap, everything at
    /// or above `a+`. Together they cover the real line.
    pub fn classification_window(&self, band: Band) -> Window<T> {
        match band {
            Band::Lower => Window::at_most(self.lower_max),
            Band::Gap => self.gap(),
            Band::Upper => Window::at_least(self.upper_min),
        }
    }

    pub fn classify(&self, energy: T) -> Band {
        if energy <= self.lower_max {
            Band::Lower
        } else if energy >= self.upper_min {
            Band::Upper
        } else {
            Band::Gap
        }
    }
}

/// Band windows from the ascending `H0` spectrum of `model`.
///
/// The negative eigenvalues must form exactly half of the spectrum and be
/// separated from the positive half by at least `mass`.
pub fn band_edges<T: Real>(spectrum: &[T], model: &TwoBandModel<T>) -> Result<BandWindows<T>> {
    let half = model.n_sites;
    if spectrum.len() != 2 * half {
        return Err(Error::NoGap(format!(
            "spectrum has {} values, expected {}",
            spectrum.len(),
            2 * half
        )));
    }
    if spectrum.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::NoGap("spectrum is not sorted ascending".into()));
    }
    let negatives = spectrum.iter().filter(|&&e| e < T::zero()).count();
    if negatives != half {
        return Err(Error::NoGap(format!(
            "{negatives} negative eigenvalues, expected {half}"
        )));
    }
    let bands = BandWindows {
        lower_min: spectrum[0],
        lower_max: spectrum[half - 1],
        upper_min: spectrum[half],
        upper_max: spectrum[2 * half - 1],
    };
    if bands.gap_width() < model.mass {
        return Err(Error::NoGap(format!(
            "gap width {} is below the mass {}",
            bands.gap_width(),
            model.mass
        )));
    }
    Ok(bands)
}

/// Local `sigma_y` on every site; anticommutes with the free Hamiltonian.
pub fn chiral_operator<T: Real>(n_sites: usize) -> CMatrix<T> {
    let mut s = CMatrix::<T>::zeros(2 * n_sites, 2 * n_sites);
    for site in 0..n_sites {
        s[(2 * site, 2 * site + 1)] = Complex::new(T::zero(), -T::one());
        s[(2 * site + 1, 2 * site)] = Complex::new(T::zero(), T::one());
    }
    s
}
