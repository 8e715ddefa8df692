//! Scalar abstraction: the numerics are generic over the real scalar type,
//! with `f64` as the shipped default (see the aliases at the crate root).

use nalgebra as na;
use num_complex::Complex;
use num_traits as nt;

/// Real scalar the numerics run on: `f32` or `f64`.
///
/// Tolerances are part of the scalar contract so invariant checks stay
/// meaningful in both precisions. The `f64` values are the ones the
/// validation suite is written against.
pub trait Real:
    na::RealField + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + Copy + Send + Sync + 'static
{
    /// Tolerance for structural invariants (hermiticity, trace normalization).
    fn tol_structural() -> Self;
    /// Tolerance for derived equalities (closed form vs independent route);
    /// also the eigenvalue clipping window for positive-semidefinite inputs.
    fn tol_derived() -> Self;
    /// Convergence threshold for node-doubling quadrature.
    fn tol_quadrature() -> Self;
}

impl Real for f64 {
    fn tol_structural() -> Self {
        1e-12
    }
    fn tol_derived() -> Self {
        1e-10
    }
    fn tol_quadrature() -> Self {
        1e-11
    }
}

impl Real for f32 {
    fn tol_structural() -> Self {
        1e-4
    }
    fn tol_derived() -> Self {
        1e-3
    }
    fn tol_quadrature() -> Self {
        1e-4
    }
}

/// Complex number over the generic scalar.
pub type C<T> = Complex<T>;

/// Dense complex matrix.
pub type CMatrix<T> = na::DMatrix<C<T>>;

/// Dense complex vector.
pub type CVector<T> = na::DVector<C<T>>;

/// Dense real matrix.
pub type RMatrix<T> = na::DMatrix<T>;

/// Dense real vector.
pub type RVector<T> = na::DVector<T>;

/// Converts a finite `f64` literal into the generic scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("finite f64 literal converts to any Real")
}

/// Real value as a complex one with zero imaginary part.
#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}

/// The imaginary unit.
#[inline]
pub fn im_unit<T: Real>() -> C<T> {
    C::new(T::zero(), T::one())
}
