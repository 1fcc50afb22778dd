//! Eigendecompositions, spectral projectors, gap states, dive curves and
//! the critical coupling.

use std::io::Write;
use std::path::Path;

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::model::{BandWindows, HermitianOperator, Window};
use crate::scalar::{cplx, frobenius, lit, modulus, to_f64, CMatrix, CVector, Real};
use crate::system::System;

/// Fraction of the gap width added to `b-` in the diving predicate.
pub const EDGE_MARGIN_FRACTION: f64 = 1e-3;

/// Minimal continuation overlap accepted by [`dive_curve`].
pub const MIN_TRACKING_OVERLAP: f64 = 0.8;

/// Eigenvalues in ascending order and the matching orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition<T: Real> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: CMatrix<T>,
    pub source_dim: usize,
}

impl<T: Real> SpectralDecomposition<T> {
    /// Decomposes a matrix the caller guarantees to be Hermitian.
    pub(crate) fn of_hermitian_matrix(m: CMatrix<T>) -> Self {
        let dim = m.nrows();
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .partial_cmp(&eig.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let eigenvectors = CMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { eigenvalues, eigenvectors, source_dim: dim }
    }

    pub fn dim(&self) -> usize {
        self.source_dim
    }

    /// Indices of the eigenvalues inside `window`, ascending.
    pub fn indices_in(&self, window: &Window<T>) -> Vec<usize> {
        (0..self.eigenvalues.len())
            .filter(|&i| window.contains(self.eigenvalues[i]))
            .collect()
    }

    pub fn count_in(&self, window: &Window<T>) -> usize {
        self.eigenvalues.iter().filter(|&&e| window.contains(e)).count()
    }

    /// `U f(Lambda) U^dagger`.
    pub fn function(&self, f: impl Fn(T) -> Complex<T>) -> CMatrix<T> {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let fj = f(e);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= fj;
            }
        }
        scaled * u.adjoint()
    }

    pub fn reconstruct(&self) -> CMatrix<T> {
        self.function(|e| cplx(e, T::zero()))
    }

    /// `||H - U Lambda U^dagger||_F / ||H||_F` (absolute for `H = 0`).
    pub fn reconstruction_residual(&self, h: &CMatrix<T>) -> T {
        let r = frobenius(&(h - self.reconstruct()));
        let n = frobenius(h);
        if n > T::zero() {
            r / n
        } else {
            r
        }
    }

    /// `||U^dagger U - I||_F`.
    pub fn orthonormality_defect(&self) -> T {
        crate::scalar::unitarity_defect(&self.eigenvectors)
    }

    /// `exp(-i t H) M`, with `M` given in the same coordinates as the
    /// eigenvectors.
    pub fn evolve_block(&self, block: &CMatrix<T>, time: T) -> CMatrix<T> {
        let mut coeffs = self.eigenvectors.ad_mul(block);
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let p = crate::scalar::phase(e * time);
            for z in coeffs.row_mut(j).iter_mut() {
                *z *= p;
            }
        }
        &self.eigenvectors * coeffs
    }

    /// Image of `v` under the spectral projector onto `window`.
    pub fn project(&self, v: &CVector<T>, window: &Window<T>) -> CVector<T> {
        let idx = self.indices_in(window);
        let mut out = CVector::<T>::zeros(v.len());
        for &j in &idx {
            let col = self.eigenvectors.column(j);
            let c = col.dotc(v);
            out.axpy(c, &col, Complex::new(T::one(), T::zero()));
        }
        out
    }

    /// `||P(window) v||`.
    pub fn projected_norm(&self, v: &CVector<T>, window: &Window<T>) -> T {
        self.indices_in(window)
            .iter()
            .fold(T::zero(), |acc, &j| acc + self.eigenvectors.column(j).dotc(v).norm_sqr())
            .sqrt()
    }
}

/// Full eigensystem of `h`, eigenvalues ascending.
pub fn decompose<T: Real>(h: &HermitianOperator<T>) -> Result<SpectralDecomposition<T>> {
    ensure_finite(h.matrix())?;
    Ok(SpectralDecomposition::of_hermitian_matrix(h.matrix().clone()))
}

/// Eigenvalues of `h`, ascending.
pub fn eigenvalues<T: Real>(h: &HermitianOperator<T>) -> Result<Vec<T>> {
    ensure_finite(h.matrix())?;
    Ok(sorted_eigenvalues(h.matrix().clone()))
}

pub(crate) fn sorted_eigenvalues<T: Real>(m: CMatrix<T>) -> Vec<T> {
    let mut values: Vec<T> = m.symmetric_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    values
}

fn ensure_finite<T: Real>(m: &CMatrix<T>) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NotHermitian { defect: f64::NAN })
    }
}

/// Orthogonal projector onto the eigenvectors whose eigenvalue lies in
/// `window`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector<T: Real> {
    pub matrix: CMatrix<T>,
    pub rank: usize,
    pub window: Window<T>,
}

impl<T: Real> Projector<T> {
    pub fn idempotence_defect(&self) -> T {
        frobenius(&(&self.matrix * &self.matrix - &self.matrix))
    }

    pub fn hermiticity_defect(&self) -> T {
        frobenius(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn trace(&self) -> T {
        self.matrix.diagonal().iter().fold(T::zero(), |acc, z| acc + z.re)
    }
}

/// Empty windows give the rank-0 projector.
pub fn spectral_projector<T: Real>(
    dec: &SpectralDecomposition<T>,
    window: Window<T>,
) -> Projector<T> {
    let idx = dec.indices_in(&window);
    let cols = dec.eigenvectors.select_columns(idx.iter());
    let matrix = &cols * cols.adjoint();
    Projector { matrix, rank: idx.len(), window }
}

/// Eigenpairs strictly inside the gap, ascending in energy.
pub fn gap_states<T: Real>(
    dec: &SpectralDecomposition<T>,
    bands: &BandWindows<T>,
) -> Vec<(T, CVector<T>)> {
    dec.indices_in(&bands.gap())
        .into_iter()
        .map(|i| (dec.eigenvalues[i], dec.eigenvectors.column(i).into_owned()))
        .collect()
}

/// `b- + 1e-3 * (a+ - b-)`.
pub fn diving_threshold<T: Real>(bands: &BandWindows<T>) -> T {
    bands.lower_max + lit::<T>(EDGE_MARGIN_FRACTION) * bands.gap_width()
}

/// Tracked lowest in-gap energy as a function of the coupling.
///
/// The curve starts at the first grid point with a gap eigenvalue. When
/// the tracked state leaves the gap it is recorded once more at the first
/// coupling where it has merged with the lower band (`dived = true`); the
/// overlap of that terminal point is the weight of the previous state in
/// the spectral subspace below the diving threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DiveCurve<T> {
    pub lambdas: Vec<T>,
    pub energies: Vec<T>,
    pub overlaps: Vec<T>,
    pub dived: bool,
}

impl<T: Real> DiveCurve<T> {
    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["lambda", "energy", "overlap"])?;
        for i in 0..self.len() {
            w.serialize((
                to_f64(self.lambdas[i]),
                to_f64(self.energies[i]),
                to_f64(self.overlaps[i]),
            ))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        self.write_csv(file)
            .map_err(|source| Error::Csv { path: path.to_path_buf(), source })
    }
}

/// Follows the lowest gap eigenvalue of `H0 + lambda V` along an ascending
/// grid by maximal-overlap continuation.
pub fn dive_curve<T: Real>(system: &System<T>, grid: &[T]) -> Result<DiveCurve<T>> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidConfig("dive grid must be strictly ascending".into()));
    }
    let bands = system.bands();
    let threshold = diving_threshold(bands);
    let min_overlap = lit::<T>(MIN_TRACKING_OVERLAP);
    let degenerate = lit::<T>(1e-9) * bands.gap_width();
    let mut curve = DiveCurve { lambdas: vec![], energies: vec![], overlaps: vec![], dived: false };
    let mut previous: Option<CVector<T>> = None;

    for &lambda in grid {
        let dec = system.coupled_decomposition(lambda);
        let gap_idx = dec.indices_in(&bands.gap());
        let Some(prev) = previous.as_ref() else {
            if let Some(&first) = gap_idx.first() {
                if gap_idx.len() > 1 && dec.eigenvalues[gap_idx[1]] - dec.eigenvalues[first] < degenerate {
                    return Err(Error::TrackingLost { lambda: to_f64(lambda), overlap: 0.0 });
                }
                curve.push(lambda, dec.eigenvalues[first], T::one());
                previous = Some(dec.eigenvectors.column(first).into_owned());
            }
            continue;
        };

        let best = gap_idx
            .iter()
            .map(|&j| (j, modulus(dec.eigenvectors.column(j).dotc(prev))))
            .fold(None, |acc: Option<(usize, T)>, (j, o)| match acc {
                Some((_, bo)) if bo >= o => acc,
                _ => Some((j, o)),
            });
        if let Some((j, overlap)) = best {
            if overlap >= min_overlap {
                let e = dec.eigenvalues[j];
                if gap_idx.iter().any(|&k| k != j && (dec.eigenvalues[k] - e).abs() < degenerate) {
                    return Err(Error::TrackingLost { lambda: to_f64(lambda), overlap: to_f64(overlap) });
                }
                curve.push(lambda, e, overlap);
                previous = Some(dec.eigenvectors.column(j).into_owned());
                continue;
            }
        }

        let lower = Window::at_most(threshold);
        let weight = dec.projected_norm(prev, &lower);
        if weight >= min_overlap {
            let n = system.model().n_sites;
            curve.push(lambda, dec.eigenvalues[n], weight);
            curve.dived = true;
            return Ok(curve);
        }
        let overlap = best.map(|(_, o)| o).unwrap_or(T::zero()).max(weight);
        return Err(Error::TrackingLost { lambda: to_f64(lambda), overlap: to_f64(overlap) });
    }
    Ok(curve)
}

impl<T: Real> DiveCurve<T> {
    fn push(&mut self, lambda: T, energy: T, overlap: T) {
        self.lambdas.push(lambda);
        self.energies.push(energy);
        self.overlaps.push(overlap);
    }
}

/// Critical coupling located by bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalCoupling<T> {
    /// Midpoint of the final bracket.
    pub lambda_c: T,
    /// `(lo, hi)`: the diving predicate is false at `lo` and true at `hi`.
    pub bracket: (T, T),
    pub tolerance: T,
    /// `b- + edge_margin`.
    pub threshold: T,
    pub edge_margin: T,
    pub energy_lo: T,
    pub energy_hi: T,
}

/// Smallest coupling at which the lowest in-gap eigenvalue reaches
/// `b- + 1e-3 * gap`.
///
/// The potential is non-positive, so every ordered eigenvalue of
/// `H0 + lambda V` is non-increasing in `lambda`. The lower cluster therefore
/// stays below `b-`, the lowest gap eigenvalue is the one with ordinal
/// `n_sites`, and the predicate is monotone in `lambda`.
pub fn find_lambda_c<T: Real>(system: &System<T>, tol: T) -> Result<CriticalCoupling<T>> {
    if !(tol > T::zero()) {
        return Err(Error::InvalidConfig(format!("lambda_c tolerance must be positive, got {tol}")));
    }
    let strength = system.potential_strength();
    if strength == T::zero() {
        return Err(Error::NoDive { lambda_max: 0.0 });
    }
    let bands = system.bands();
    let threshold = diving_threshold(bands);
    let ordinal = system.model().n_sites;
    let energy = |lambda: T| system.coupled_eigenvalues(lambda)[ordinal];

    let mut lo = T::zero();
    let mut energy_lo = energy(lo);
    let mut hi = bands.gap_width() / strength;
    let mut energy_hi = energy(hi);
    let mut doublings = 0;
    while energy_hi > threshold {
        if doublings == 24 {
            return Err(Error::NoDive { lambda_max: to_f64(hi) });
        }
        lo = hi;
        energy_lo = energy_hi;
        hi += hi;
        energy_hi = energy(hi);
        doublings += 1;
    }
    while hi - lo > tol {
        let mid = (lo + hi) / lit::<T>(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let e = energy(mid);
        if e <= threshold {
            hi = mid;
            energy_hi = e;
        } else {
            lo = mid;
            energy_lo = e;
        }
    }
    Ok(CriticalCoupling {
        lambda_c: (lo + hi) / lit::<T>(2.0),
        bracket: (lo, hi),
        tolerance: tol,
        threshold,
        edge_margin: threshold - bands.lower_max,
        energy_lo,
        energy_hi,
    })
}
