//! Decoherence factor for the measurement-like (static) coupling, where
//! each environment spin only accumulates phase through `S_z`.
//!
//! Three routes are provided and cross-checked: a closed form for spin
//! coherent states ([`gamma_pure`]), a Legendre expansion valid for any
//! axially symmetric mixture of coherent states ([`gamma_general`], with
//! coefficients pulled out of a density matrix by
//! [`extract_axial_coefficients`]), and a dense trace oracle
//! ([`oracle_gamma`]).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::matfun::unitary_evolution;
use crate::quadrature::{legendre_p, GaussLegendre};
use crate::real::{lit, re, CMatrix, RMatrix, RVector, Real, C};
use crate::spin::{build_spin_operators, Spin};
use crate::state::{spin_coherent_state, SpinState};

/// Inputs for the coherent-state decoherence factor.
///
/// `theta` is the polar angle of the coherent state (intended range
/// `[0, π]`), `g` the coupling over `Ω`, `t` the time in `1/Ω`, and
/// `delta_m = m - m'` the separation of the two central levels. Only the
/// product `g t delta_m` enters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentGammaParams<T> {
    pub spin: Spin,
    pub theta: T,
    pub g: T,
    pub t: T,
    pub delta_m: T,
}

impl<T: Real> CoherentGammaParams<T> {
    /// The accumulated phase `u = g t delta_m`.
    pub fn phase(&self) -> T {
        self.g * self.t * self.delta_m
    }
}

/// Decoherence factor of one spin prepared in a coherent state:
/// `γ = [cos(u/2) + i sin(u/2) cos θ]^{2j}` with `u = g t Δm`.
///
/// Independent of the coherent state's azimuth. `|γ| ≤ 1`, with `γ = 1`
/// at `t = 0` and full revivals at `u = 2π k`.
pub fn gamma_pure<T: Real>(p: &CoherentGammaParams<T>) -> C<T> {
    let half = p.phase() / (T::one() + T::one());
    let base = C::new(half.cos(), half.sin() * p.theta.cos());
    base.powi(p.spin.twice_j() as i32)
}

/// `|γ|²` of [`gamma_pure`] without complex arithmetic:
/// `[cos²θ + cos²(u/2) sin²θ]^{2j}`.
pub fn gamma_pure_modsq<T: Real>(p: &CoherentGammaParams<T>) -> T {
    let half = p.phase() / (T::one() + T::one());
    let (st, ct) = (p.theta.sin(), p.theta.cos());
    let base = ct * ct + half.cos() * half.cos() * st * st;
    base.powi(p.spin.twice_j() as i32)
}

/// Short-time Gaussian envelope of `|γ|`:
/// `exp(-(j/4) sin²θ g² Δm² t²)`.
pub fn gamma_pure_short_time<T: Real>(p: &CoherentGammaParams<T>) -> T {
    let four = lit::<T>(4.0);
    let st = p.theta.sin();
    let u = p.phase();
    (-(p.spin.j::<T>() / four) * st * st * u * u).exp()
}

/// Exact Legendre moment `∫_{-1}^{1} x^k P_l(x) dx` as a rational number.
///
/// Zero when `k < l` or `k + l` is odd; otherwise, with `s = (k - l)/2`,
/// equals `2 · k!/(k-l)! / [(2s+1)(2s+3)⋯(2s+2l+1)]`. The value is always
/// non-negative; in particular the moment at `l = k = 2` is `+4/15`, which
/// the quadrature route confirms (see the tests and the validation suite).
pub fn legendre_moment_exact(l: u32, k: u32) -> BigRational {
    if k < l || (k - l) % 2 == 1 {
        return BigRational::zero();
    }
    let s = (k - l) / 2;
    let mut numer = BigInt::from(2);
    for i in 0..l {
        numer *= BigInt::from(k - i);
    }
    let mut denom = BigInt::one();
    for i in 0..=l {
        denom *= BigInt::from(2 * s + 1 + 2 * i);
    }
    BigRational::new(numer, denom)
}

/// [`legendre_moment_exact`] rounded into the working scalar.
pub fn legendre_moment<T: Real>(l: u32, k: u32) -> T {
    lit(legendre_moment_exact(l, k)
        .to_f64()
        .expect("legendre moments are small rationals"))
}

/// Exact binomial coefficient, ample for `n ≤ 40`.
fn binomial(n: u32, k: u32) -> u128 {
    let k = k.min(n - k);
    let mut numer: u128 = 1;
    let mut denom: u128 = 1;
    for i in 0..k {
        numer *= (n - i) as u128;
        denom *= (i + 1) as u128;
    }
    numer / denom
}

/// `i^k` as a complex unit.
fn i_pow<T: Real>(k: u32) -> C<T> {
    match k % 4 {
        0 => C::new(T::one(), T::zero()),
        1 => C::new(T::zero(), T::one()),
        2 => C::new(-T::one(), T::zero()),
        _ => C::new(T::zero(), -T::one()),
    }
}

/// The diagonal axial harmonic operators `Ŷ_{l0}`, `l = 0 … 2j`, built by
/// Gauss–Legendre quadrature over the coherent-state polar angle (the
/// azimuthal integral is analytic and already folded in).
///
/// All operators are diagonal in the `S_z` basis; the matrix of their
/// diagonals is what [`extract_axial_coefficients`] solves against.
#[derive(Debug, Clone)]
pub struct AxialHarmonicBasis<T: Real> {
    spin: Spin,
    diagonals: Vec<RVector<T>>,
}

impl<T: Real> AxialHarmonicBasis<T> {
    /// Builds all `2j + 1` operators, doubling the node count until the
    /// diagonals settle below the quadrature tolerance (the integrands are
    /// polynomials, so the first doubling already agrees).
    pub fn build(spin: Spin) -> Result<Self> {
        const MAX_DOUBLINGS: u32 = 6;
        let d = spin.dimension();
        let mut n = 2 * d;
        let mut prev = Self::eval(spin, n);
        let mut last_change = f64::NAN;
        for _ in 0..MAX_DOUBLINGS {
            n *= 2;
            let next = Self::eval(spin, n);
            let mut change = T::zero();
            for l in 0..d {
                for m in 0..d {
                    change = change.max((next[l][m] - prev[l][m]).abs());
                }
            }
            if change <= T::tol_quadrature() {
                return Ok(Self {
                    spin,
                    diagonals: next,
                });
            }
            last_change = change.to_f64().unwrap_or(f64::NAN);
            prev = next;
        }
        Err(Error::QuadratureNotConverged {
            change: last_change,
            doublings: MAX_DOUBLINGS,
        })
    }

    /// Diagonals of all operators under an `n`-node rule:
    /// `diag_m(Ŷ_{l0}) = 2π sqrt((2l+1)/4π) ∫ P_l(x) |⟨m|n(θ=acos x)⟩|² dx`.
    fn eval(spin: Spin, n: usize) -> Vec<RVector<T>> {
        let d = spin.dimension();
        let rule = GaussLegendre::<T>::new(n);
        let pops: Vec<Vec<T>> = rule
            .nodes()
            .iter()
            .map(|&x| spin_coherent_state(spin, x.acos(), T::zero()).diagonal_populations())
            .collect();
        let four_pi = lit::<T>(4.0) * T::pi();
        (0..d)
            .map(|l| {
                let pref =
                    (T::pi() + T::pi()) * ((T::from_usize(2 * l + 1).unwrap()) / four_pi).sqrt();
                RVector::from_fn(d, |m, _| {
                    let mut acc = T::zero();
                    for (i, (&x, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
                        acc += w * legendre_p(l, x) * pops[i][m];
                    }
                    pref * acc
                })
            })
            .collect()
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    /// Diagonal of `Ŷ_{l0}` in basis order `m = +j … -j`.
    pub fn diagonal(&self, l: usize) -> &RVector<T> {
        &self.diagonals[l]
    }

    /// `Ŷ_{l0}` as a dense (diagonal) complex matrix.
    pub fn operator(&self, l: usize) -> CMatrix<T> {
        let d = self.spin.dimension();
        let mut out = CMatrix::<T>::zeros(d, d);
        for m in 0..d {
            out[(m, m)] = re(self.diagonals[l][m]);
        }
        out
    }
}

/// Single axial harmonic operator `Ŷ_{l0}`; builds the whole basis, so
/// prefer [`AxialHarmonicBasis::build`] when several `l` are needed.
pub fn build_yhat<T: Real>(spin: Spin, l: usize) -> Result<CMatrix<T>> {
    if l >= spin.dimension() {
        return Err(Error::DimensionMismatch {
            left: l,
            right: spin.dimension() - 1,
        });
    }
    Ok(AxialHarmonicBasis::build(spin)?.operator(l))
}

/// Coefficients `c_l` of a state's expansion over `Ŷ_{l0}`, `l = 0 … 2j`.
///
/// For any unit-trace state `c_0 = 1/(2 sqrt(π))`, enforced on
/// construction along with the length.
#[derive(Debug, Clone, PartialEq)]
pub struct AxialPCoefficients<T: Real> {
    spin: Spin,
    c: Vec<T>,
}

impl<T: Real> AxialPCoefficients<T> {
    pub fn new(spin: Spin, c: Vec<T>) -> Result<Self> {
        if c.len() != spin.dimension() {
            return Err(Error::DimensionMismatch {
                left: c.len(),
                right: spin.dimension(),
            });
        }
        let c0_expect = (lit::<T>(4.0) * T::pi()).sqrt().recip();
        if (c[0] - c0_expect).abs() > T::tol_structural() {
            return Err(Error::InternalConsistency(format!(
                "leading coefficient {:.17e} differs from 1/(2 sqrt(pi))",
                c[0].to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { spin, c })
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn coefficients(&self) -> &[T] {
        &self.c
    }
}

/// Recovers the axial expansion coefficients of a state by solving the
/// linear system formed by the `Ŷ_{l0}` diagonals against the state's
/// populations (only the diagonal of `rho` matters for dephasing).
pub fn extract_axial_coefficients<T: Real>(state: &SpinState<T>) -> Result<AxialPCoefficients<T>> {
    let basis = AxialHarmonicBasis::build(state.spin())?;
    extract_axial_coefficients_with(&basis, state)
}

/// [`extract_axial_coefficients`] against a prebuilt basis.
pub fn extract_axial_coefficients_with<T: Real>(
    basis: &AxialHarmonicBasis<T>,
    state: &SpinState<T>,
) -> Result<AxialPCoefficients<T>> {
    if basis.spin() != state.spin() {
        return Err(Error::DimensionMismatch {
            left: basis.spin().dimension(),
            right: state.spin().dimension(),
        });
    }
    let d = state.spin().dimension();
    let a = RMatrix::<T>::from_fn(d, d, |m, l| basis.diagonal(l)[m]);
    let rhs = RVector::<T>::from_vec(state.diagonal_populations());
    let c = a
        .clone()
        .col_piv_qr()
        .solve(&rhs)
        .ok_or_else(|| Error::InternalConsistency("projection system is singular".into()))?;
    let mut resid = T::zero();
    for r in (&a * &c - &rhs).iter() {
        resid = resid.max(r.abs());
    }
    if resid > T::tol_derived() * lit::<T>(10.0) {
        return Err(Error::InternalConsistency(format!(
            "projection residual {:.3e} too large",
            resid.to_f64().unwrap_or(f64::NAN)
        )));
    }
    AxialPCoefficients::new(state.spin(), c.iter().copied().collect())
}

/// Decoherence factor from an axial expansion:
/// `γ = sqrt(π) Σ_l c_l sqrt(2l+1) Σ_{k=l}^{2j} C(2j,k) cos^{2j-k}(u/2)
/// (i sin(u/2))^k I_{lk}` with `u = g t Δm` and `I_{lk}` the Legendre
/// moments. Agrees with [`gamma_pure`] for coherent-state coefficients and
/// with the trace oracle for any physical state.
pub fn gamma_general<T: Real>(coeffs: &AxialPCoefficients<T>, g: T, t: T, delta_m: T) -> C<T> {
    let tj = coeffs.spin().twice_j();
    let half = g * t * delta_m / (T::one() + T::one());
    let (s, c) = (half.sin(), half.cos());

    let mut acc = C::new(T::zero(), T::zero());
    for l in 0..=tj {
        let weight = coeffs.c[l as usize] * T::from_u32(2 * l + 1).unwrap().sqrt();
        let mut inner = C::new(T::zero(), T::zero());
        // Moments vanish unless k >= l with k + l even.
        let mut k = l;
        while k <= tj {
            let moment = legendre_moment::<T>(l, k);
            let scale = T::from_u128(binomial(tj, k)).unwrap()
                * c.powi((tj - k) as i32)
                * s.powi(k as i32)
                * moment;
            inner += i_pow::<T>(k) * re(scale);
            k += 2;
        }
        acc += re(weight) * inner;
    }
    acc * re(T::pi().sqrt())
}

/// Convenience: extract coefficients from a state and evaluate
/// [`gamma_general`].
pub fn gamma_general_from_state<T: Real>(
    state: &SpinState<T>,
    g: T,
    t: T,
    delta_m: T,
) -> Result<C<T>> {
    Ok(gamma_general(
        &extract_axial_coefficients(state)?,
        g,
        t,
        delta_m,
    ))
}

/// Dense reference route: `γ = Tr[rho exp(-i g t Δm S_z)]`, valid for any
/// state of one environment spin under the static coupling.
pub fn oracle_gamma<T: Real>(state: &SpinState<T>, g: T, t: T, delta_m: T) -> Result<C<T>> {
    let (_, _, sz) = build_spin_operators::<T>(state.spin());
    let u = unitary_evolution(sz.matrix(), g * t * delta_m)?;
    Ok((state.rho() * u).trace())
}
