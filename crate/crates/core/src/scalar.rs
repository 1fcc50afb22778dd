//! Scalar abstraction shared by the numerical modules.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point type the numerical core is generic over.
///
/// Implemented for `f32` and `f64`. Tolerances that are quoted in absolute
/// terms (for example `1e-12` for Hermiticity) are floored at a small
/// multiple of the type's machine epsilon, see [`tolerance`].
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
}

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

/// `exp(-i * theta)`.
#[inline]
pub fn phase<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), -theta.sin())
}

/// `|z|`.
#[inline]
pub fn modulus<T: Real>(z: Complex<T>) -> T {
    z.norm_sqr().sqrt()
}

/// `max(requested, 1000 * eps)`: a requested absolute tolerance, floored to
/// something reachable in the scalar type.
#[inline]
pub fn tolerance<T: Real>(requested: f64) -> T {
    let floor = T::default_epsilon() * lit::<T>(1000.0);
    let req = lit::<T>(requested);
    if req > floor {
        req
    } else {
        floor
    }
}

pub fn frobenius<T: Real>(m: &CMatrix<T>) -> T {
    m.iter()
        .fold(T::zero(), |acc, z| acc + z.norm_sqr())
        .sqrt()
}

pub fn vec_norm<T: Real>(v: &CVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt()
}

/// Norm of the entries of `v` selected by `indices`.
pub fn partial_norm<T: Real>(v: &CVector<T>, indices: &[usize]) -> T {
    indices
        .iter()
        .fold(T::zero(), |acc, &i| acc + v[i].norm_sqr())
        .sqrt()
}

/// Largest singular value of `m`, zero for an empty matrix.
pub fn spectral_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, &s| if s > acc { s } else { acc })
}

/// `||M^dagger M - I||_F`.
pub fn unitarity_defect<T: Real>(m: &CMatrix<T>) -> T {
    let n = m.ncols();
    let mut g = m.ad_mul(m);
    for i in 0..n {
        g[(i, i)] -= Complex::new(T::one(), T::zero());
    }
    frobenius(&g)
}

/// Rows `rows` and columns `cols` of `m`.
pub fn submatrix<T: Real>(m: &CMatrix<T>, rows: &[usize], cols: &[usize]) -> CMatrix<T> {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}
