//! Dense Hermitian matrix functions: eigendecomposition-backed `f(A)` and
//! the unitary propagator `exp(-i t H)`.

use nalgebra::{ComplexField, SymmetricEigen};

use crate::error::{Error, Result};
use crate::real::{re, CMatrix, RVector, Real, C};

/// Largest modulus among the entries of `A - A^H`.
pub fn hermitian_deviation<T: Real>(a: &CMatrix<T>) -> T {
    let mut dev = T::zero();
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let d = (a[(i, k)] - a[(k, i)].conj()).modulus();
            if d > dev {
                dev = d;
            }
        }
    }
    dev
}

/// Largest entry modulus; handy as a max-norm for residual checks.
pub fn max_abs<T: Real>(a: &CMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, e| acc.max(e.modulus()))
}

/// Eigendecomposition `A = V diag(w) V^H` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen<T: Real> {
    /// Real eigenvalues, in the order produced by the solver.
    pub values: RVector<T>,
    /// Unitary matrix of eigenvectors (columns).
    pub vectors: CMatrix<T>,
}

impl<T: Real> HermitianEigen<T> {
    /// Assembles `V f(w) V^H` for a scalar function `f` of the eigenvalues.
    pub fn apply(&self, f: impl Fn(T) -> C<T>) -> CMatrix<T> {
        let d = self.values.len();
        let mut scaled = self.vectors.clone();
        for k in 0..d {
            let fw = f(self.values[k]);
            for i in 0..d {
                scaled[(i, k)] *= fw;
            }
        }
        scaled * self.vectors.adjoint()
    }
}

/// Eigendecomposition of `a`, rejecting inputs whose hermiticity deviation
/// exceeds the derived tolerance. The tiny anti-Hermitian part of an
/// accepted input is discarded by symmetrizing before solving.
pub fn hermitian_eigen<T: Real>(a: &CMatrix<T>) -> Result<HermitianEigen<T>> {
    let dev = hermitian_deviation(a);
    if dev > T::tol_derived() {
        return Err(Error::NotHermitian {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
            tolerance: T::tol_derived().to_f64().unwrap(),
        });
    }
    let half = T::one() / (T::one() + T::one());
    let sym = (a + a.adjoint()).map(|e| e * re(half));
    let eig = SymmetricEigen::new(sym);
    Ok(HermitianEigen {
        values: eig.eigenvalues,
        vectors: eig.eigenvectors,
    })
}

/// `f(A)` for Hermitian `A`, computed as `V f(w) V^H`.
pub fn hermitian_matrix_function<T: Real>(
    a: &CMatrix<T>,
    f: impl Fn(T) -> C<T>,
) -> Result<CMatrix<T>> {
    Ok(hermitian_eigen(a)?.apply(f))
}

/// Unitary propagator `exp(-i t H)` for Hermitian `H`.
pub fn unitary_evolution<T: Real>(h: &CMatrix<T>, t: T) -> Result<CMatrix<T>> {
    hermitian_matrix_function(h, |w| (-C::new(T::zero(), t * w)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{build_spin_operators, Spin};

    fn identity(d: usize) -> CMatrix<f64> {
        CMatrix::<f64>::identity(d, d)
    }

    #[test]
    fn rejects_non_hermitian_input() {
        let mut a = identity(2);
        a[(0, 1)] = C::new(0.5, 0.0); // asymmetric: a[(1,0)] stays 0
        let err = hermitian_eigen(&a).unwrap_err();
        assert!(matches!(err, Error::NotHermitian { .. }));
    }

    #[test]
    fn matrix_exponential_matches_2x2_closed_form() {
        // exp(-i t S_x) for j = 1/2: cos(t/2) I - 2 i sin(t/2) S_x.
        let spin = Spin::new(1).unwrap();
        let (sx, _, _) = build_spin_operators::<f64>(spin);
        let t = 0.73;
        let u = unitary_evolution(sx.matrix(), t).unwrap();
        let expect = identity(2).map(|e| e * C::new((t / 2.0).cos(), 0.0))
            + sx.matrix().map(|e| e * C::new(0.0, -2.0 * (t / 2.0).sin()));
        assert!(max_abs(&(u - expect)) <= 1e-14);
    }

    #[test]
    fn propagator_is_unitary_and_composes() {
        let spin = Spin::new(3).unwrap();
        let (sx, _, sz) = build_spin_operators::<f64>(spin);
        let h = sx.matrix() * C::new(0.8, 0.0) + sz.matrix() * C::new(-1.3, 0.0);
        let (t1, t2) = (0.31, 1.27);

        let u1 = unitary_evolution(&h, t1).unwrap();
        let u2 = unitary_evolution(&h, t2).unwrap();
        let u12 = unitary_evolution(&h, t1 + t2).unwrap();

        assert!(max_abs(&(&u1 * u1.adjoint() - identity(4))) <= 1e-13);
        assert!(max_abs(&(u1 * u2 - u12)) <= 1e-12);
    }

    #[test]
    fn matrix_function_reproduces_polynomials() {
        let spin = Spin::new(2).unwrap();
        let (sx, sy, _) = build_spin_operators::<f64>(spin);
        let a = sx.matrix() * C::new(1.0, 0.0) + sy.matrix() * C::new(0.4, 0.0);
        let sq = hermitian_matrix_function(&a, |w| C::new(w * w, 0.0)).unwrap();
        assert!(max_abs(&(&sq - &a * &a)) <= 1e-13);
    }

    #[test]
    fn generic_over_f32() {
        let spin = Spin::new(1).unwrap();
        let (sx, _, _) = build_spin_operators::<f32>(spin);
        let u = unitary_evolution(sx.matrix(), 0.5f32).unwrap();
        let id = CMatrix::<f32>::identity(2, 2);
        assert!(max_abs(&(&u * u.adjoint() - id)) <= f32::tol_structural());
    }
}
