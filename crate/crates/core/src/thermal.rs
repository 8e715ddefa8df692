//! Single-spin decoherence factor and environment-state fidelity for the
//! full dynamics: each environment spin evolves under
//! `H_m = 2 (m g S_z - Ω S_x)` conditioned on the central level `m`, and
//! starts in the thermal state `exp(-2 βΩ S_x)/Z`.
//!
//! Both quantities reduce to a 2×2 kernel lifted to spin `j` by explicit
//! `(2j + 1)`-term eigenvalue sums ([`gamma_thermal`],
//! [`fidelity_thermal`]); dense brute-force routes over the full matrices
//! ([`oracle_gamma`], [`oracle_fidelity`]) serve as independent checks.

use crate::error::{Error, Result};
use crate::matfun::{hermitian_eigen, unitary_evolution};
use crate::real::{re, RMatrix, Real, C};
use crate::spin::{build_spin_operators, twice_half_integer, Spin};
#[cfg(test)]
use crate::state::partition_function;
use crate::state::thermal_state;
use nalgebra::ComplexField;

/// Inputs for the thermal single-spin kernels.
///
/// All quantities are in units of the environment level splitting `Ω`:
/// `beta_omega = βΩ ≥ 0`, `g_over_omega = g/Ω ≥ 0`, time `t` in `1/Ω`.
/// The central levels `m`, `m_prime` must be exact half-integers; they are
/// range-checked against a concrete central spin only on request
/// ([`ThermalParams::validate_for_system`]), since the kernels themselves
/// are well-defined for any half-integer pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams<T> {
    pub spin: Spin,
    pub beta_omega: T,
    pub g_over_omega: T,
    pub m: T,
    pub m_prime: T,
    pub t: T,
}

impl<T: Real> ThermalParams<T> {
    /// Validates scalar ranges and half-integrality of the level labels.
    pub fn new(spin: Spin, beta_omega: T, g_over_omega: T, m: T, m_prime: T, t: T) -> Result<Self> {
        let mut problems = Vec::new();
        if !(beta_omega.is_finite() && beta_omega >= T::zero()) {
            problems.push(format!(
                "beta_omega: must be finite and >= 0, got {:?}",
                beta_omega.to_f64()
            ));
        }
        if !(g_over_omega.is_finite() && g_over_omega >= T::zero()) {
            problems.push(format!(
                "g_over_omega: must be finite and >= 0, got {:?}",
                g_over_omega.to_f64()
            ));
        }
        if !t.is_finite() {
            problems.push("t: must be finite".into());
        }
        for (name, v) in [("m", m), ("m_prime", m_prime)] {
            if twice_half_integer(v).is_none() {
                problems.push(format!(
                    "{name}: must be an exact integer or half-integer, got {:?}",
                    v.to_f64()
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidConfig(problems));
        }
        Ok(Self {
            spin,
            beta_omega,
            g_over_omega,
            m,
            m_prime,
            t,
        })
    }

    /// Checks that `m` and `m_prime` sit on the ladder of the given central
    /// spin (e.g. `m = 1/4` or `m = 1` are rejected for `j_S = 1/2`).
    pub fn validate_for_system(&self, central: Spin) -> Result<()> {
        central.validate_magnetic(self.m)?;
        central.validate_magnetic(self.m_prime)?;
        Ok(())
    }

    /// `Δm = m - m'`.
    pub fn delta_m(&self) -> T {
        self.m - self.m_prime
    }

    /// Conditional frequency `ω_m = sqrt(Ω² + m² g²)` in units of `Ω`.
    pub fn omega(&self, m: T) -> T {
        let mg = m * self.g_over_omega;
        (T::one() + mg * mg).sqrt()
    }
}

/// Pauli decomposition of the 2×2 overlap kernel
/// `u_{m'}† u_m = γ_0 1 - i (γ_x σ_x + γ_y σ_y + γ_z σ_z)`,
/// where `u_m` is the conditional propagator in the defining representation.
///
/// The components are unit-norm: `γ_0² + γ_x² + γ_y² + γ_z² = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaKernel<T> {
    pub gamma0: T,
    pub gamma_x: T,
    pub gamma_y: T,
    pub gamma_z: T,
}

/// Builds the overlap kernel from the two conditional rotations:
/// with `c = cos(ω_m t)`, `s = sin(ω_m t)` (primes for `m'`),
///
/// * `γ_0 = c c' + s s' (Ω² + m m' g²)/(ω_m ω_m')`
/// * `γ_x = Ω (s' c / ω_m' - c' s / ω_m)`
/// * `γ_y = -Δm Ω g s s' / (ω_m ω_m')`
/// * `γ_z = g (m s c' / ω_m - m' s' c / ω_m')`
pub fn gamma_kernel<T: Real>(p: &ThermalParams<T>) -> GammaKernel<T> {
    let g = p.g_over_omega;
    let om = p.omega(p.m);
    let omp = p.omega(p.m_prime);
    let (s, c) = (om * p.t).sin_cos();
    let (sp, cp) = (omp * p.t).sin_cos();

    let gamma0 = c * cp + s * sp * (T::one() + p.m * p.m_prime * g * g) / (om * omp);
    let gamma_x = sp * c / omp - cp * s / om;
    let gamma_y = -(p.delta_m()) * g * s * sp / (om * omp);
    let gamma_z = g * (p.m * s * cp / om - p.m_prime * sp * c / omp);

    GammaKernel {
        gamma0,
        gamma_x,
        gamma_y,
        gamma_z,
    }
}

impl<T: Real> GammaKernel<T> {
    /// `γ_0² + γ_x² + γ_y² + γ_z²`; equals 1 for every valid kernel.
    pub fn norm_sqr(&self) -> T {
        self.gamma0 * self.gamma0
            + self.gamma_x * self.gamma_x
            + self.gamma_y * self.gamma_y
            + self.gamma_z * self.gamma_z
    }
}

/// Thermal decoherence factor of one spin-`j` environment:
///
/// `γ = Σ_{l=-j}^{j} λ^{2l} / Σ_{l=-j}^{j} λ_0^{2l}` with
/// `λ = κ + sqrt(κ² - 1)`, `κ = γ_0 cosh(βΩ) + i γ_x sinh(βΩ)` and
/// `λ_0 = e^{βΩ}`. Both sums run over the explicit `2j + 1` terms, which
/// keeps the expression stable when `λ` sits near the branch point `±1`
/// (the sum is invariant under `λ → 1/λ`, so the branch choice is moot).
///
/// `t = 0` returns the analytic value 1 exactly (both evolutions are the
/// identity), with no roundoff from the sums.
pub fn gamma_thermal<T: Real>(p: &ThermalParams<T>) -> C<T> {
    if p.t == T::zero() {
        return re(T::one());
    }
    let kern = gamma_kernel(p);
    let b = p.beta_omega;
    let kappa = C::new(kern.gamma0 * b.cosh(), kern.gamma_x * b.sinh());
    let lambda = kappa + (kappa * kappa - re(T::one())).sqrt();

    let tj = p.spin.twice_j() as i32;
    let mut numer = C::new(T::zero(), T::zero());
    let mut denom = T::zero();
    let mut dl = -tj;
    while dl <= tj {
        numer += lambda.powi(dl);
        denom += (b * T::from_i32(dl).unwrap()).exp();
        dl += 2;
    }
    numer / re(denom)
}

/// The real eigenvalue `λ̃ = κ̃ + sqrt(κ̃² - 1)` of the fidelity kernel,
/// where `κ̃ = γ_z² + γ_y² + (γ_0² + γ_x²) cosh(2βΩ) ≥ 1`.
///
/// Values of `κ̃` inside `[1 - 1e-12, 1]` are clipped to 1 (round-off of
/// the exact identity `κ̃ = 1 + 2 sinh²(βΩ)(γ_0² + γ_x²)`); anything lower
/// signals corrupted inputs and is reported as an error.
pub fn fidelity_kernel<T: Real>(p: &ThermalParams<T>) -> Result<T> {
    let kern = gamma_kernel(p);
    let two = T::one() + T::one();
    let ct = (two * p.beta_omega).cosh();
    let mut kt = kern.gamma_z * kern.gamma_z
        + kern.gamma_y * kern.gamma_y
        + (kern.gamma0 * kern.gamma0 + kern.gamma_x * kern.gamma_x) * ct;
    if kt < T::one() {
        if kt < T::one() - T::tol_derived() * crate::real::lit::<T>(10.0) {
            return Err(Error::InternalConsistency(format!(
                "fidelity kernel kappa = {:.17e} fell below 1",
                kt.to_f64().unwrap_or(f64::NAN)
            )));
        }
        kt = T::one();
    }
    Ok(kt + (kt * kt - T::one()).sqrt())
}

/// Environment-state fidelity of one spin-`j` environment between the
/// branches conditioned on `m` and `m'`:
///
/// `F = Σ_{l=-j}^{j} λ̃^l / Σ_{l=-j}^{j} λ̃_0^l` with `λ̃_0 = e^{2βΩ}`,
/// both as explicit sums (half-integer powers go through `sqrt(λ̃)`).
///
/// `t = 0` returns the analytic value 1 exactly, matching
/// [`gamma_thermal`].
pub fn fidelity_thermal<T: Real>(p: &ThermalParams<T>) -> Result<T> {
    if p.t == T::zero() {
        return Ok(T::one());
    }
    let lt = fidelity_kernel(p)?;
    Ok(eigenvalue_sum_ratio(p.spin, p.beta_omega, lt))
}

/// Shared tail of [`fidelity_thermal`]: `Σ λ̃^l / Σ e^{2βΩ l}`.
fn eigenvalue_sum_ratio<T: Real>(spin: Spin, b: T, lt: T) -> T {
    let tj = spin.twice_j() as i32;
    let sq = lt.sqrt();
    let mut numer = T::zero();
    let mut denom = T::zero();
    let mut dl = -tj;
    while dl <= tj {
        numer += sq.powi(dl);
        denom += (b * T::from_i32(dl).unwrap()).exp();
        dl += 2;
    }
    numer / denom
}

/// [`gamma_thermal`] and [`fidelity_thermal`] sharing one kernel
/// evaluation; the fast path for ensemble sweeps.
pub fn gamma_and_fidelity<T: Real>(p: &ThermalParams<T>) -> Result<(C<T>, T)> {
    if p.t == T::zero() {
        return Ok((re(T::one()), T::one()));
    }
    let kern = gamma_kernel(p);
    let b = p.beta_omega;
    let tj = p.spin.twice_j() as i32;

    let kappa = C::new(kern.gamma0 * b.cosh(), kern.gamma_x * b.sinh());
    let lambda = kappa + (kappa * kappa - re(T::one())).sqrt();

    let two = T::one() + T::one();
    let mut kt = kern.gamma_z * kern.gamma_z
        + kern.gamma_y * kern.gamma_y
        + (kern.gamma0 * kern.gamma0 + kern.gamma_x * kern.gamma_x) * (two * b).cosh();
    if kt < T::one() {
        if kt < T::one() - T::tol_derived() * crate::real::lit::<T>(10.0) {
            return Err(Error::InternalConsistency(format!(
                "fidelity kernel kappa = {:.17e} fell below 1",
                kt.to_f64().unwrap_or(f64::NAN)
            )));
        }
        kt = T::one();
    }
    let sq = (kt + (kt * kt - T::one()).sqrt()).sqrt();

    let mut gamma_numer = C::new(T::zero(), T::zero());
    let mut fid_numer = T::zero();
    let mut denom = T::zero();
    let mut dl = -tj;
    while dl <= tj {
        gamma_numer += lambda.powi(dl);
        fid_numer += sq.powi(dl);
        denom += (b * T::from_i32(dl).unwrap()).exp();
        dl += 2;
    }
    Ok((gamma_numer / re(denom), fid_numer / denom))
}

/// Conditional Hamiltonian `H_m = 2 (m g S_z - S_x)` as a dense matrix
/// (units of `Ω`).
fn conditional_hamiltonian<T: Real>(p: &ThermalParams<T>, m: T) -> crate::real::CMatrix<T> {
    let (sx, _, sz) = build_spin_operators::<T>(p.spin);
    let two = T::one() + T::one();
    sz.matrix().map(|e| e * re(two * m * p.g_over_omega)) - sx.matrix().map(|e| e * re(two))
}

/// Brute-force decoherence factor
/// `γ = Tr[rho_β U_{m'}† U_m]` over the dense `(2j+1)`-dimensional space.
pub fn oracle_gamma<T: Real>(p: &ThermalParams<T>) -> Result<C<T>> {
    let u_m = unitary_evolution(&conditional_hamiltonian(p, p.m), p.t)?;
    let u_mp = unitary_evolution(&conditional_hamiltonian(p, p.m_prime), p.t)?;
    let rho = thermal_state::<T>(p.spin, p.beta_omega);
    Ok((rho.rho() * u_mp.adjoint() * u_m).trace())
}

/// Brute-force fidelity via the trace-norm identity
/// `Tr √(√ρ_m ρ_{m'} √ρ_m) = ‖√ρ_{m'} √ρ_m‖₁`.
///
/// The square roots come from the exact thermal eigenstructure (shifted
/// exponents, so nothing overflows), and the trace norm from a singular
/// value decomposition of a realified copy. Singular values carry only
/// O(ε) absolute error, so this stays accurate even when the state has
/// near-zero populations — unlike an eigenvalue route, whose √ of
/// near-zero eigenvalues amplifies roundoff to ~√ε.
pub fn oracle_fidelity<T: Real>(p: &ThermalParams<T>) -> Result<T> {
    let u_m = unitary_evolution(&conditional_hamiltonian(p, p.m), p.t)?;
    let u_mp = unitary_evolution(&conditional_hamiltonian(p, p.m_prime), p.t)?;

    // √ρ_β = V diag(e^{-βΩ (w - w_min)}) V† / √(Σ e^{-2βΩ (w - w_min)})
    // over the S_x eigenbasis; the common shift cancels in the ratio.
    let (sx, _, _) = build_spin_operators::<T>(p.spin);
    let eig = hermitian_eigen(sx.matrix())?;
    let b = p.beta_omega;
    let two = T::one() + T::one();
    let w_min = eig.values.iter().copied().fold(T::zero(), T::min);
    let z_shift = eig
        .values
        .iter()
        .fold(T::zero(), |acc, &w| acc + (-two * b * (w - w_min)).exp());
    let scale = z_shift.sqrt();
    let sqrt_rho = eig.apply(|w| re((-b * (w - w_min)).exp() / scale));

    let a = (&u_mp * &sqrt_rho * u_mp.adjoint()) * (&u_m * &sqrt_rho * u_m.adjoint());

    // Realify A as [[Re, -Im], [Im, Re]]: the block matrix has A's
    // singular values with doubled multiplicity.
    let d = p.spin.dimension();
    let realified = RMatrix::<T>::from_fn(2 * d, 2 * d, |r, c| {
        let e = a[(r % d, c % d)];
        match (r / d, c / d) {
            (0, 1) => -e.im,
            (1, 0) => e.im,
            _ => e.re,
        }
    });
    let total = realified
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, &s| acc + s);
    Ok(total / two)
}

/// Sanity anchor shared by tests: `Z = Σ e^{2βΩ l}` must match
/// [`partition_function`].
#[cfg(test)]
fn denom_is_partition_function(spin: Spin, b: f64) -> bool {
    let tj = spin.twice_j() as i32;
    let mut z = 0.0;
    let mut dl = -tj;
    while dl <= tj {
        z += (b * dl as f64).exp();
        dl += 2;
    }
    (z - partition_function::<f64>(spin, b)).abs() <= 1e-12 * z
}
