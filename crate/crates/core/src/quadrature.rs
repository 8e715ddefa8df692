//! Gauss–Legendre quadrature on `[-1, 1]` and the Legendre polynomials,
//! used to build the axial harmonic operators and as an independent check
//! on the closed-form Legendre moments.

use crate::error::{Error, Result};
use crate::real::Real;

/// Legendre polynomial `P_l(x)` via the three-term recurrence
/// `(l+1) P_{l+1} = (2l+1) x P_l - l P_{l-1}`.
pub fn legendre_p<T: Real>(l: usize, x: T) -> T {
    match l {
        0 => T::one(),
        1 => x,
        _ => {
            let mut pm1 = T::one();
            let mut p = x;
            for k in 1..l {
                let kf = T::from_usize(k).unwrap();
                let next = ((kf + kf + T::one()) * x * p - kf * pm1) / (kf + T::one());
                pm1 = p;
                p = next;
            }
            p
        }
    }
}

/// Gauss–Legendre rule with `n` nodes on `[-1, 1]`; exact for polynomials
/// of degree `2n - 1`.
#[derive(Debug, Clone)]
pub struct GaussLegendre<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Real> GaussLegendre<T> {
    /// Computes the rule by Newton iteration on `P_n` from the Chebyshev
    /// initial guess; converges to machine precision in a few steps.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature rule needs at least one node");
        let mut nodes = vec![T::zero(); n];
        let mut weights = vec![T::zero(); n];
        let nf = T::from_usize(n).unwrap();
        let half = T::one() / (T::one() + T::one());
        let quarter = half * half;
        for i in 0..n.div_ceil(2) {
            let if_ = T::from_usize(i).unwrap();
            let mut x = (T::pi() * (if_ + T::one() - quarter) / (nf + half)).cos();
            for _ in 0..100 {
                let p = legendre_p(n, x);
                let pm1 = legendre_p(n - 1, x);
                // P'_n(x) = n (x P_n - P_{n-1}) / (x^2 - 1).
                let dp = nf * (x * p - pm1) / (x * x - T::one());
                let dx = p / dp;
                x -= dx;
                if dx.abs() <= T::default_epsilon() * (T::one() + x.abs()) {
                    break;
                }
            }
            // One polish step keeps dp in sync with the final x.
            let p = legendre_p(n, x);
            let pm1 = legendre_p(n - 1, x);
            let dp = nf * (x * p - pm1) / (x * x - T::one());
            let w = (T::one() + T::one()) / ((T::one() - x * x) * dp * dp);
            // Nodes come out positive-first; store symmetrically.
            nodes[i] = -x;
            weights[i] = w;
            nodes[n - 1 - i] = x;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `∫_{-1}^{1} f(x) dx` under this rule.
    pub fn integrate(&self, mut f: impl FnMut(T) -> T) -> T {
        let mut acc = T::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(x);
        }
        acc
    }
}

/// `∫_{-1}^{1} f(x) dx` by node doubling: starts at `start_n` nodes and
/// doubles until two successive results differ by less than the quadrature
/// tolerance, erroring out after `max_doublings`.
pub fn integrate_adaptive<T: Real>(
    mut f: impl FnMut(T) -> T,
    start_n: usize,
    max_doublings: u32,
) -> Result<T> {
    let mut n = start_n.max(2);
    let mut prev = GaussLegendre::new(n).integrate(&mut f);
    let mut last_change = f64::NAN;
    for _ in 0..max_doublings {
        n *= 2;
        let next = GaussLegendre::new(n).integrate(&mut f);
        let change = (next - prev).abs();
        if change <= T::tol_quadrature() {
            return Ok(next);
        }
        last_change = change.to_f64().unwrap_or(f64::NAN);
        prev = next;
    }
    Err(Error::QuadratureNotConverged {
        change: last_change,
        doublings: max_doublings,
    })
}

/// Reference value `∫_{-1}^{1} x^k P_l(x) dx` by quadrature, exact up to
/// round-off because the integrand is a polynomial.
pub fn legendre_moment_quadrature<T: Real>(l: usize, k: usize) -> T {
    let rule = GaussLegendre::<T>::new(l.max(k) + 2);
    rule.integrate(|x| {
        let mut xk = T::one();
        for _ in 0..k {
            xk *= x;
        }
        xk * legendre_p(l, x)
    })
}
