//! Density matrices of a single spin, the states used throughout (spin
//! coherent and thermal), and the Uhlmann fidelity between mixed states.

use crate::error::{Error, Result};
use crate::matfun::{hermitian_deviation, hermitian_eigen, unitary_evolution};
use crate::real::{re, CMatrix, Real, C};
use crate::spin::{build_spin_operators, Spin};
use nalgebra::ComplexField;

/// Density matrix of one spin in the `S_z` basis (`m = +j … -j`).
///
/// Validated on construction: Hermitian and unit trace to the structural
/// tolerance, smallest eigenvalue no lower than `-tol_derived`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState<T: Real> {
    spin: Spin,
    rho: CMatrix<T>,
}

impl<T: Real> SpinState<T> {
    /// Validates and wraps a density matrix.
    pub fn new(spin: Spin, rho: CMatrix<T>) -> Result<Self> {
        let d = spin.dimension();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: rho.nrows().max(rho.ncols()),
                right: d,
            });
        }
        let dev = hermitian_deviation(&rho);
        if dev > T::tol_structural() {
            return Err(Error::InvalidState(format!(
                "density matrix is not Hermitian: deviation {:.3e}",
                dev.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let tr = rho.trace();
        if (tr - re(T::one())).modulus() > T::tol_structural() {
            return Err(Error::InvalidState(format!(
                "density matrix trace {:?} differs from 1",
                (tr.re.to_f64(), tr.im.to_f64())
            )));
        }
        let eig = hermitian_eigen(&rho).expect("hermiticity already validated");
        let min = eig.values.iter().copied().fold(T::zero(), T::min);
        if min < -T::tol_derived() {
            return Err(Error::InvalidState(format!(
                "density matrix has eigenvalue {:.3e} below the positivity window",
                min.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { spin, rho })
    }

    /// Wraps a matrix known valid by construction; validated in debug builds.
    pub(crate) fn new_unchecked(spin: Spin, rho: CMatrix<T>) -> Self {
        debug_assert!(Self::new(spin, rho.clone()).is_ok());
        Self { spin, rho }
    }

    /// Maximally mixed state `I / (2j + 1)`.
    pub fn maximally_mixed(spin: Spin) -> Self {
        let d = spin.dimension();
        let w = T::one() / T::from_usize(d).unwrap();
        Self::new_unchecked(spin, CMatrix::<T>::identity(d, d) * re(w))
    }

    /// Pure state `|psi⟩⟨psi|` from an amplitude vector (normalized here).
    pub fn from_pure(spin: Spin, psi: &crate::real::CVector<T>) -> Result<Self> {
        if psi.len() != spin.dimension() {
            return Err(Error::DimensionMismatch {
                left: psi.len(),
                right: spin.dimension(),
            });
        }
        let norm = psi.norm();
        if norm <= T::tol_structural() {
            return Err(Error::InvalidState("zero amplitude vector".into()));
        }
        let v = psi.map(|e| e / re(norm));
        let rho = &v * v.adjoint();
        Ok(Self::new_unchecked(spin, rho))
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn rho(&self) -> &CMatrix<T> {
        &self.rho
    }

    /// Conjugates the state by a unitary: `U rho U^H`.
    pub fn evolve(&self, u: &CMatrix<T>) -> Result<Self> {
        if u.nrows() != self.spin.dimension() || u.ncols() != self.spin.dimension() {
            return Err(Error::DimensionMismatch {
                left: u.nrows().max(u.ncols()),
                right: self.spin.dimension(),
            });
        }
        Ok(Self {
            spin: self.spin,
            rho: u * &self.rho * u.adjoint(),
        })
    }

    /// `Tr[rho A]`.
    pub fn expectation(&self, a: &CMatrix<T>) -> C<T> {
        (&self.rho * a).trace()
    }

    /// Real part of the diagonal, in basis order `m = +j … -j`.
    pub fn diagonal_populations(&self) -> Vec<T> {
        (0..self.spin.dimension())
            .map(|i| self.rho[(i, i)].re)
            .collect()
    }
}

/// Spin coherent state: `|j; -j⟩` rotated by `exp(-i θ (sinφ S_x - cosφ S_y))`.
///
/// The result satisfies `⟨S_z⟩ = -j cos θ` and `|⟨S⟩| = j`; the azimuth `φ`
/// only moves the transverse components. Intended for `0 ≤ θ ≤ π`.
pub fn spin_coherent_state<T: Real>(spin: Spin, theta: T, phi: T) -> SpinState<T> {
    let d = spin.dimension();
    let (sx, sy, _) = build_spin_operators::<T>(spin);
    let h = sx.matrix().map(|e| e * re(phi.sin())) - sy.matrix().map(|e| e * re(phi.cos()));
    let u = unitary_evolution(&h, theta).expect("rotation generator is Hermitian");
    // |j; -j⟩ is the last basis vector.
    let psi = u.column(d - 1).into_owned();
    let rho = &psi * psi.adjoint();
    SpinState::new_unchecked(spin, rho)
}

/// Partition function `Z = Tr exp(-2 βΩ S_x) = sinh((2j+1) βΩ) / sinh(βΩ)`,
/// evaluated in overflow-safe form; `βΩ = 0` gives `2j + 1`.
pub fn partition_function<T: Real>(spin: Spin, beta_omega: T) -> T {
    let b = beta_omega;
    if b == T::zero() {
        return T::from_usize(spin.dimension()).unwrap();
    }
    let tj = T::from_u32(spin.twice_j()).unwrap();
    let two = T::one() + T::one();
    // sinh((2j+1)b)/sinh(b) = e^{2jb} (1 - e^{-(4j+2)b}) / (1 - e^{-2b}).
    let numer = -(-(two * tj + two) * b).exp_m1();
    let denom = -(-two * b).exp_m1();
    (tj * b).exp() * numer / denom
}

/// Thermal state `exp(-2 βΩ S_x) / Z` of a single spin.
///
/// Requires a finite `βΩ ≥ 0`. Evaluated through the eigenbasis of `S_x`
/// with the exponent shifted by its minimum, so large `βΩ` cannot overflow.
pub fn thermal_state<T: Real>(spin: Spin, beta_omega: T) -> SpinState<T> {
    assert!(
        beta_omega >= T::zero() && beta_omega.is_finite(),
        "thermal_state requires finite betaOmega >= 0"
    );
    let (sx, _, _) = build_spin_operators::<T>(spin);
    let eig = hermitian_eigen(sx.matrix()).expect("S_x is Hermitian by construction");
    let two = T::one() + T::one();
    let min = eig.values.iter().copied().fold(T::zero(), T::min);
    let weights: Vec<T> = eig
        .values
        .iter()
        .map(|&w| (-two * beta_omega * (w - min)).exp())
        .collect();
    let total = weights.iter().copied().fold(T::zero(), |a, b| a + b);
    let mut scaled = eig.vectors.clone();
    for (k, &w) in weights.iter().enumerate() {
        let p = re(w / total);
        for i in 0..spin.dimension() {
            scaled[(i, k)] *= p;
        }
    }
    SpinState::new_unchecked(spin, scaled * eig.vectors.adjoint())
}

/// Thermal state along the dephasing axis, `e^{-2 betaOmega S_z} / Z`.
///
/// Diagonal in the standard basis, so no eigendecomposition is needed; the
/// exponent is shifted by its minimum to stay finite for large `betaOmega`.
pub fn thermal_state_along_z<T: Real>(spin: Spin, beta_omega: T) -> SpinState<T> {
    assert!(
        beta_omega >= T::zero() && beta_omega.is_finite(),
        "thermal_state_along_z requires finite betaOmega >= 0"
    );
    let d = spin.dimension();
    let two = T::one() + T::one();
    let j = spin.j::<T>();
    let weights: Vec<T> = (0..d)
        .map(|i| (-two * beta_omega * (spin.magnetic::<T>(i) + j)).exp())
        .collect();
    let total = weights.iter().copied().fold(T::zero(), |a, b| a + b);
    let mut rho = CMatrix::<T>::zeros(d, d);
    for (i, &w) in weights.iter().enumerate() {
        rho[(i, i)] = re(w / total);
    }
    SpinState::new_unchecked(spin, rho)
}

/// Uhlmann fidelity `F(rho, sigma) = Tr sqrt(sqrt(rho) sigma sqrt(rho))`.
///
/// Eigenvalues of the positive-semidefinite intermediates inside
/// `[-tol_derived, 0]` are clipped to zero; anything lower is reported as an
/// internal-consistency error rather than silently absorbed.
pub fn fidelity<T: Real>(rho: &SpinState<T>, sigma: &SpinState<T>) -> Result<T> {
    if rho.spin() != sigma.spin() {
        return Err(Error::DimensionMismatch {
            left: rho.spin().dimension(),
            right: sigma.spin().dimension(),
        });
    }
    let eig_rho = hermitian_eigen(rho.rho())?;
    let d = eig_rho.values.len();
    let mut scaled = eig_rho.vectors.clone();
    for k in 0..d {
        let sw = re(clip_psd::<T>(eig_rho.values[k], "rho")?.sqrt());
        for i in 0..d {
            scaled[(i, k)] *= sw;
        }
    }
    let sqrt_rho = scaled * eig_rho.vectors.adjoint();
    let inner = &sqrt_rho * sigma.rho() * &sqrt_rho;
    let eig = hermitian_eigen(&inner)?;
    let mut f = T::zero();
    for &w in eig.values.iter() {
        f += clip_psd::<T>(w, "sqrt(rho) sigma sqrt(rho)")?.sqrt();
    }
    Ok(f)
}

/// Clips an eigenvalue of a nominally positive-semidefinite matrix:
/// values in `[-tol_derived, 0]` become `0`, lower values are an error.
fn clip_psd<T: Real>(w: T, what: &str) -> Result<T> {
    if w >= T::zero() {
        Ok(w)
    } else if w >= -T::tol_derived() {
        Ok(T::zero())
    } else {
        Err(Error::InternalConsistency(format!(
            "eigenvalue {:.3e} of {what} below the positivity window",
            w.to_f64().unwrap_or(f64::NAN)
        )))
    }
}

/// Reduced state of the central system: the matrix `α` with
/// `α_{m m'} = ⟨m| σ |m'⟩`, indexed like the `S_z` basis (`m = +j_S … -j_S`).
///
/// Validated on construction: Hermitian, diagonal real and non-negative,
/// diagonal summing to 1 (structural tolerance).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T: Real> {
    spin: Spin,
    alpha: CMatrix<T>,
}

impl<T: Real> SystemState<T> {
    pub fn new(spin: Spin, alpha: CMatrix<T>) -> Result<Self> {
        let d = spin.dimension();
        if alpha.nrows() != d || alpha.ncols() != d {
            return Err(Error::DimensionMismatch {
                left: alpha.nrows().max(alpha.ncols()),
                right: d,
            });
        }
        let dev = hermitian_deviation(&alpha);
        if dev > T::tol_structural() {
            return Err(Error::InvalidState(format!(
                "system matrix is not Hermitian: deviation {:.3e}",
                dev.to_f64().unwrap_or(f64::NAN)
            )));
        }
        let mut total = T::zero();
        for i in 0..d {
            let a = alpha[(i, i)];
            if a.im.abs() > T::tol_structural() || a.re < -T::tol_structural() {
                return Err(Error::InvalidState(format!(
                    "population {i} is not real non-negative"
                )));
            }
            total += a.re;
        }
        if (total - T::one()).abs() > T::tol_structural() {
            return Err(Error::InvalidState(format!(
                "populations sum to {:.17e}, not 1",
                total.to_f64().unwrap_or(f64::NAN)
            )));
        }
        Ok(Self { spin, alpha })
    }

    /// Pure equal superposition of the levels with the given magnetic
    /// numbers: every matrix element among them equals `1 / L`.
    pub fn equal_superposition(spin: Spin, levels: &[T]) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidState("no levels given".into()));
        }
        let mut idx = Vec::with_capacity(levels.len());
        for &m in levels {
            let i = spin.index_of_magnetic(m)?;
            if idx.contains(&i) {
                return Err(Error::InvalidState(format!(
                    "level m = {:?} listed twice",
                    m.to_f64()
                )));
            }
            idx.push(i);
        }
        let d = spin.dimension();
        let w = re(T::one() / T::from_usize(levels.len()).unwrap());
        let mut alpha = CMatrix::<T>::zeros(d, d);
        for &a in &idx {
            for &b in &idx {
                alpha[(a, b)] = w;
            }
        }
        Self::new(spin, alpha)
    }

    /// Fully dephased (diagonal) state with the given populations, in basis
    /// order `m = +j_S … -j_S`.
    pub fn diagonal(spin: Spin, populations: &[T]) -> Result<Self> {
        if populations.len() != spin.dimension() {
            return Err(Error::DimensionMismatch {
                left: populations.len(),
                right: spin.dimension(),
            });
        }
        let d = spin.dimension();
        let mut alpha = CMatrix::<T>::zeros(d, d);
        for (i, &p) in populations.iter().enumerate() {
            alpha[(i, i)] = re(p);
        }
        Self::new(spin, alpha)
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn alpha(&self) -> &CMatrix<T> {
        &self.alpha
    }

    /// `α_{m m'}` looked up by magnetic numbers.
    pub fn element(&self, m: T, m_prime: T) -> Result<C<T>> {
        let i = self.spin.index_of_magnetic(m)?;
        let k = self.spin.index_of_magnetic(m_prime)?;
        Ok(self.alpha[(i, k)])
    }
}

/// `⟨S⟩ = (⟨S_x⟩, ⟨S_y⟩, ⟨S_z⟩)` of a state; used by tests and examples.
pub fn spin_expectation<T: Real>(state: &SpinState<T>) -> [T; 3] {
    let (sx, sy, sz) = build_spin_operators::<T>(state.spin());
    [
        state.expectation(sx.matrix()).re,
        state.expectation(sy.matrix()).re,
        state.expectation(sz.matrix()).re,
    ]
}

/// Frozen reference value used by unit tests: `Z(j = 1/2, βΩ = 0.9)`.
#[cfg(test)]
pub(crate) fn z_half_09() -> f64 {
    2.0 * 0.9f64.cosh()
}
