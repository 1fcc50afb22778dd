//! A validated model together with its operators and the `H0` eigenbasis.
//!
//! Dynamics is carried out in the `H0` eigenbasis: `H0` is the diagonal
//! `D = diag(E)` there, the band projectors are index ranges, and the
//! potential is the rank-`r` matrix `B diag(d) B^dagger` where `r` is the
//! number of non-zero diagonal entries `d` of `V` and `B[j, s]` is the
//! conjugated amplitude of eigenvector `j` on the `s`-th support index.

use std::sync::{Arc, Mutex};

use nalgebra::Complex;

use crate::error::Result;
use crate::model::{
    band_edges, build_h0, build_potential, h_of, Band, BandWindows, HermitianOperator,
    TwoBandModel,
};
use crate::scalar::{cplx, lit, phase, CMatrix, CVector, Real};
use crate::spectral::{decompose, diving_threshold, sorted_eigenvalues, SpectralDecomposition};

const CACHE_CAPACITY: usize = 6;

pub struct System<T: Real> {
    model: TwoBandModel<T>,
    h0: HermitianOperator<T>,
    potential: HermitianOperator<T>,
    h0_dec: SpectralDecomposition<T>,
    bands: BandWindows<T>,
    lower: Vec<usize>,
    upper: Vec<usize>,
    support: Vec<usize>,
    support_values: Vec<T>,
    coupling: CMatrix<T>,
    kernel: SplitCoupling<T>,
    cache: Mutex<Vec<(T, Arc<SpectralDecomposition<T>>)>>,
}

/// `B` split into real and imaginary parts, both column-major (`cols`)
/// and row-major (`rows`), so the kick loops run over contiguous reals.
struct SplitCoupling<T> {
    cols_re: Vec<T>,
    cols_im: Vec<T>,
    rows_re: Vec<T>,
    rows_im: Vec<T>,
}

impl<T: Real> SplitCoupling<T> {
    fn new(b: &CMatrix<T>) -> Self {
        let t = b.transpose();
        Self {
            cols_re: b.iter().map(|z| z.re).collect(),
            cols_im: b.iter().map(|z| z.im).collect(),
            rows_re: t.iter().map(|z| z.re).collect(),
            rows_im: t.iter().map(|z| z.im).collect(),
        }
    }
}

/// Column-major block stored as separate real and imaginary parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitBlock<T> {
    rows: usize,
    cols: usize,
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> SplitBlock<T> {
    pub fn from_matrix(m: &CMatrix<T>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            re: m.iter().map(|z| z.re).collect(),
            im: m.iter().map(|z| z.im).collect(),
        }
    }

    pub fn write_to(&self, m: &mut CMatrix<T>) {
        assert_eq!(m.shape(), (self.rows, self.cols), "shape mismatch");
        for ((z, &a), &b) in m.iter_mut().zip(&self.re).zip(&self.im) {
            *z = Complex::new(a, b);
        }
    }
}

/// Diagonal phases in split form.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPhases<T> {
    re: Vec<T>,
    im: Vec<T>,
}

impl<T: Real> SplitPhases<T> {
    pub fn apply(&self, block: &mut SplitBlock<T>) {
        let n = self.re.len();
        assert_eq!(block.rows, n, "phase count must match block rows");
        for (xr, xi) in block.re.chunks_exact_mut(n).zip(block.im.chunks_exact_mut(n)) {
            for (((zr, zi), &pr), &pi) in xr.iter_mut().zip(xi.iter_mut()).zip(&self.re).zip(&self.im) {
                let (a, b) = (*zr, *zi);
                *zr = a * pr - b * pi;
                *zi = a * pi + b * pr;
            }
        }
    }
}

impl<T: Real> std::fmt::Debug for System<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("System")
            .field("model", &self.model)
            .field("bands", &self.bands)
            .field("support", &self.support)
            .finish_non_exhaustive()
    }
}

impl<T: Real> System<T> {
    pub fn new(model: TwoBandModel<T>) -> Result<Self> {
        let h0 = build_h0(&model)?;
        let potential = build_potential(&model)?;
        let h0_dec = decompose(&h0)?;
        let bands = band_edges(&h0_dec.eigenvalues, &model)?;
        let n = model.n_sites;
        let diagonal = potential.real_diagonal().expect("potential is real diagonal");
        let support: Vec<usize> = (0..diagonal.len()).filter(|&i| diagonal[i] != T::zero()).collect();
        let support_values = support.iter().map(|&i| diagonal[i]).collect();
        let u = &h0_dec.eigenvectors;
        let coupling = CMatrix::from_fn(u.ncols(), support.len(), |j, s| u[(support[s], j)].conj());
        Ok(Self {
            model,
            h0,
            potential,
            h0_dec,
            bands,
            lower: (0..n).collect(),
            upper: (n..2 * n).collect(),
            support,
            support_values,
            kernel: SplitCoupling::new(&coupling),
            coupling,
            cache: Mutex::new(Vec::new()),
        })
    }

    pub fn reference() -> Self {
        Self::new(TwoBandModel::reference()).expect("reference model has a gap")
    }

    pub fn model(&self) -> &TwoBandModel<T> {
        &self.model
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn h0(&self) -> &HermitianOperator<T> {
        &self.h0
    }

    pub fn potential(&self) -> &HermitianOperator<T> {
        &self.potential
    }

    /// `H0 + lambda_eff V` in position coordinates.
    pub fn h_lambda(&self, lambda_eff: T) -> HermitianOperator<T> {
        h_of(&self.h0, &self.potential, lambda_eff)
    }

    pub fn h0_decomposition(&self) -> &SpectralDecomposition<T> {
        &self.h0_dec
    }

    /// Free energies `E`, ascending.
    pub fn energies(&self) -> &[T] {
        &self.h0_dec.eigenvalues
    }

    pub fn bands(&self) -> &BandWindows<T> {
        &self.bands
    }

    pub fn diving_threshold(&self) -> T {
        diving_threshold(&self.bands)
    }

    /// Eigenbasis indices of `sigma_minus` (`Lower`) or `sigma_plus`
    /// (`Upper`); `H0` has no gap eigenvalues, so `Gap` is empty.
    pub fn band_indices(&self, band: Band) -> &[usize] {
        match band {
            Band::Lower => &self.lower,
            Band::Upper => &self.upper,
            Band::Gap => &[],
        }
    }

    /// State indices where `V` is non-zero.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn support_values(&self) -> &[T] {
        &self.support_values
    }

    /// `B`: eigenbasis rows, support columns.
    pub fn coupling(&self) -> &CMatrix<T> {
        &self.coupling
    }

    /// `||V||`, the largest `|d|`.
    pub fn potential_strength(&self) -> T {
        self.support_values.iter().fold(T::zero(), |acc, d| acc.max(d.abs()))
    }

    /// `||H0||`.
    pub fn h0_norm(&self) -> T {
        let e = self.energies();
        e[0].abs().max(e[e.len() - 1].abs())
    }

    pub fn to_eigenbasis(&self, v: &CVector<T>) -> CVector<T> {
        self.h0_dec.eigenvectors.ad_mul(v)
    }

    pub fn from_eigenbasis(&self, v: &CVector<T>) -> CVector<T> {
        &self.h0_dec.eigenvectors * v
    }

    /// `H0 + mu V` in eigenbasis coordinates.
    pub fn coupled_matrix(&self, mu: T) -> CMatrix<T> {
        let b = &self.coupling;
        let mut scaled = b.clone();
        for (s, &d) in self.support_values.iter().enumerate() {
            let f = cplx(mu * d, T::zero());
            for z in scaled.column_mut(s).iter_mut() {
                *z *= f;
            }
        }
        let mut m = scaled * b.adjoint();
        for (j, &e) in self.energies().iter().enumerate() {
            m[(j, j)] += cplx(e, T::zero());
        }
        // Restore exact Hermiticity lost to rounding in the product.
        let mh = m.adjoint();
        (m + mh).map(|z| z * cplx(lit::<T>(0.5), T::zero()))
    }

    /// Eigensystem of `H0 + mu V`; eigenvectors in eigenbasis coordinates.
    pub fn coupled_decomposition(&self, mu: T) -> SpectralDecomposition<T> {
        if mu == T::zero() {
            let dim = self.dim();
            return SpectralDecomposition {
                eigenvalues: self.energies().to_vec(),
                eigenvectors: CMatrix::identity(dim, dim),
                source_dim: dim,
            };
        }
        SpectralDecomposition::of_hermitian_matrix(self.coupled_matrix(mu))
    }

    /// Memoized [`Self::coupled_decomposition`] for couplings that are
    /// requested repeatedly (plateau values, witness couplings).
    pub fn cached_coupled_decomposition(&self, mu: T) -> Arc<SpectralDecomposition<T>> {
        {
            let cache = self.cache.lock().expect("decomposition cache poisoned");
            if let Some((_, dec)) = cache.iter().find(|(m, _)| *m == mu) {
                return Arc::clone(dec);
            }
        }
        let dec = Arc::new(self.coupled_decomposition(mu));
        let mut cache = self.cache.lock().expect("decomposition cache poisoned");
        if cache.len() == CACHE_CAPACITY {
            cache.remove(0);
        }
        cache.push((mu, Arc::clone(&dec)));
        dec
    }

    /// Eigenvalues of `H0 + mu V`, ascending.
    pub fn coupled_eigenvalues(&self, mu: T) -> Vec<T> {
        sorted_eigenvalues(self.h_lambda(mu).into_matrix())
    }

    /// [`Self::free_phases`] in split form.
    pub fn split_phases(&self, time: T) -> SplitPhases<T> {
        let p = self.free_phases(time);
        SplitPhases { re: p.iter().map(|z| z.re).collect(), im: p.iter().map(|z| z.im).collect() }
    }

    /// `exp(-i t E_j)` for every free energy.
    pub fn free_phases(&self, time: T) -> Vec<Complex<T>> {
        self.energies().iter().map(|&e| phase(e * time)).collect()
    }

    /// Multiplies row `j` of `block` by `exp(-i t E_j)`.
    pub fn free_evolve_block(&self, block: &mut CMatrix<T>, time: T) {
        if time == T::zero() {
            return;
        }
        let phases = self.free_phases(time);
        for col in block.as_mut_slice().chunks_exact_mut(phases.len()) {
            for (z, &p) in col.iter_mut().zip(&phases) {
                *z *= p;
            }
        }
    }

    /// `block += B diag(c) B^dagger block`.
    pub fn low_rank_update(&self, block: &mut CMatrix<T>, c: &[Complex<T>]) {
        let mut split = SplitBlock::from_matrix(block);
        self.kick(&mut split, c);
        split.write_to(block);
    }

    /// `block <- diag(phases) (I + B diag(c) B^dagger) block`.
    pub fn kick_and_drift(&self, block: &mut SplitBlock<T>, c: &[Complex<T>], phases: &SplitPhases<T>) {
        self.kick(block, c);
        phases.apply(block);
    }

    fn kick(&self, block: &mut SplitBlock<T>, c: &[Complex<T>]) {
        let n = self.dim();
        let r = self.support.len();
        assert_eq!(block.rows, n, "block rows must match the state dimension");
        assert_eq!(c.len(), r, "one kick coefficient per support index");
        if r == 0 {
            return;
        }
        let k = &self.kernel;
        let mut yr = vec![T::zero(); r];
        let mut yi = vec![T::zero(); r];
        for (xr, xi) in block.re.chunks_exact_mut(n).zip(block.im.chunks_exact_mut(n)) {
            yr.iter_mut().for_each(|v| *v = T::zero());
            yi.iter_mut().for_each(|v| *v = T::zero());
            // y = B^dagger x, accumulated row by row of B.
            for ((&zr, &zi), (tr, ti)) in
                xr.iter().zip(xi.iter()).zip(k.rows_re.chunks_exact(r).zip(k.rows_im.chunks_exact(r)))
            {
                for (((ar, ai), &br), &bi) in yr.iter_mut().zip(yi.iter_mut()).zip(tr).zip(ti) {
                    *ar += br * zr + bi * zi;
                    *ai += br * zi - bi * zr;
                }
            }
            // x += B (c * y), one column of B at a time.
            for (s, (br, bi)) in k.cols_re.chunks_exact(n).zip(k.cols_im.chunks_exact(n)).enumerate() {
                let cr = c[s].re * yr[s] - c[s].im * yi[s];
                let ci = c[s].re * yi[s] + c[s].im * yr[s];
                for (((zr, zi), &ur), &ui) in xr.iter_mut().zip(xi.iter_mut()).zip(br).zip(bi) {
                    *zr += ur * cr - ui * ci;
                    *zi += ur * ci + ui * cr;
                }
            }
        }
    }

    /// `||V psi||` for `psi` in eigenbasis coordinates.
    pub fn potential_norm_of(&self, psi: &CVector<T>) -> T {
        let on_support = self.coupling.ad_mul(psi);
        on_support
            .iter()
            .zip(&self.support_values)
            .fold(T::zero(), |acc, (z, &d)| acc + z.norm_sqr() * d * d)
            .sqrt()
    }

    /// Time after which a packet launched at the well can wrap around the
    /// lattice, `n_sites / (2 v_max)`.
    pub fn reflection_time(&self) -> T {
        self.model.reflection_time()
    }
}
