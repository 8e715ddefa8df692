//! Spin quantum numbers and the angular-momentum operators `S_x`, `S_y`,
//! `S_z` in the `S_z` eigenbasis, ordered `m = +j, j-1, …, -j` (the
//! lowest-weight vector `|j; -j⟩` is the *last* basis vector).

use crate::error::{Error, Result};
use crate::real::{im_unit, re, CMatrix, Real};

/// Spin magnitude `j`, stored exactly as the integer `2j`.
///
/// Construction enforces a magnitude cap (default `2j <= 40`) because the
/// dense routines scale poorly past that point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice_j: u32,
}

impl Spin {
    /// Default magnitude cap on `2j`.
    pub const DEFAULT_MAX_TWICE_J: u32 = 40;

    /// Spin from `2j`, enforcing the default cap.
    pub fn new(twice_j: u32) -> Result<Self> {
        Self::with_cap(twice_j, Self::DEFAULT_MAX_TWICE_J)
    }

    /// Spin from `2j` with an explicit cap.
    pub fn with_cap(twice_j: u32, cap: u32) -> Result<Self> {
        if twice_j > cap {
            return Err(Error::SpinTooLarge { twice_j, cap });
        }
        Ok(Self { twice_j })
    }

    /// Spin from a floating `j`; accepts integers and half-integers only
    /// (`j = 0.25` is rejected).
    pub fn from_float(j: f64) -> Result<Self> {
        let twice = 2.0 * j;
        if !(twice.is_finite() && twice >= 0.0 && twice.fract() == 0.0) {
            return Err(Error::NotHalfInteger { value: j });
        }
        Self::new(twice as u32)
    }

    /// The integer `2j`.
    pub fn twice_j(&self) -> u32 {
        self.twice_j
    }

    /// Hilbert-space dimension `2j + 1`.
    pub fn dimension(&self) -> usize {
        self.twice_j as usize + 1
    }

    /// `j` as a scalar.
    pub fn j<T: Real>(&self) -> T {
        T::from_u32(self.twice_j).unwrap() / (T::one() + T::one())
    }

    /// `j (j + 1)`, computed exactly from `2j (2j + 2) / 4`.
    pub fn j_jp1<T: Real>(&self) -> T {
        let t = self.twice_j as u64;
        T::from_u64(t * (t + 2)).unwrap() / T::from_u8(4).unwrap()
    }

    /// Magnetic numbers in basis order, `m = +j` down to `-j`
    /// (exactly `2j + 1` values).
    pub fn magnetic_numbers<T: Real>(&self) -> Vec<T> {
        (0..self.dimension())
            .map(|i| self.magnetic::<T>(i))
            .collect()
    }

    /// Magnetic number of basis index `i`: `m_i = j - i`.
    pub fn magnetic<T: Real>(&self, index: usize) -> T {
        let two = T::one() + T::one();
        (T::from_u32(self.twice_j).unwrap() - two * T::from_usize(index).unwrap()) / two
    }

    /// Basis index of the magnetic number `m`, validating that `m` belongs
    /// to this spin's ladder (half-integer-exact; parity must match `j`).
    pub fn index_of_magnetic<T: Real>(&self, m: T) -> Result<usize> {
        let twice_m = self.validate_magnetic(m)?;
        Ok(((self.twice_j as i64 - twice_m) / 2) as usize)
    }

    /// Checks `m ∈ {-j, -j+1, …, +j}` exactly and returns the integer `2m`.
    pub fn validate_magnetic<T: Real>(&self, m: T) -> Result<i64> {
        let twice_m = twice_half_integer(m).ok_or(Error::InvalidMagneticNumber {
            value: m.to_f64().unwrap_or(f64::NAN),
            twice_j: self.twice_j,
        })?;
        let tj = self.twice_j as i64;
        if twice_m.abs() > tj || (twice_m - tj) % 2 != 0 {
            return Err(Error::InvalidMagneticNumber {
                value: m.to_f64().unwrap_or(f64::NAN),
                twice_j: self.twice_j,
            });
        }
        Ok(twice_m)
    }
}

impl std::fmt::Display for Spin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.twice_j.is_multiple_of(2) {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

/// Returns `2x` if `x` is exactly an integer or half-integer, else `None`.
pub fn twice_half_integer<T: Real>(x: T) -> Option<i64> {
    let twice = x + x;
    if twice.is_finite() && twice.fract() == T::zero() {
        twice.to_i64()
    } else {
        None
    }
}

/// A dense complex Hermitian operator tagged with the spin it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperator<T: Real> {
    spin: Spin,
    matrix: CMatrix<T>,
}

impl<T: Real> SpinOperator<T> {
    /// Wraps a matrix after checking its dimension and hermiticity.
    pub fn new(spin: Spin, matrix: CMatrix<T>) -> Result<Self> {
        if matrix.nrows() != spin.dimension() || matrix.ncols() != spin.dimension() {
            return Err(Error::DimensionMismatch {
                left: matrix.nrows().max(matrix.ncols()),
                right: spin.dimension(),
            });
        }
        let dev = crate::matfun::hermitian_deviation(&matrix);
        if dev > T::tol_structural() {
            return Err(Error::NotHermitian {
                deviation: dev.to_f64().unwrap_or(f64::NAN),
                tolerance: T::tol_structural().to_f64().unwrap(),
            });
        }
        Ok(Self { spin, matrix })
    }

    pub(crate) fn new_unchecked(spin: Spin, matrix: CMatrix<T>) -> Self {
        Self { spin, matrix }
    }

    /// Spin this operator acts on.
    pub fn spin(&self) -> Spin {
        self.spin
    }

    /// The dense matrix.
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Consumes the operator and returns the dense matrix.
    pub fn into_matrix(self) -> CMatrix<T> {
        self.matrix
    }
}

/// Builds `(S_x, S_y, S_z)` for the given spin via the ladder operators:
/// `⟨m+1| S_+ |m⟩ = sqrt(j(j+1) - m(m+1))`, `S_x = (S_+ + S_-)/2`,
/// `S_y = (S_+ - S_-)/(2i)`, `S_z = diag(j, j-1, …, -j)`.
pub fn build_spin_operators<T: Real>(
    spin: Spin,
) -> (SpinOperator<T>, SpinOperator<T>, SpinOperator<T>) {
    let d = spin.dimension();
    let jj = spin.j_jp1::<T>();
    let half = T::one() / (T::one() + T::one());

    let mut sx = CMatrix::<T>::zeros(d, d);
    let mut sy = CMatrix::<T>::zeros(d, d);
    let mut sz = CMatrix::<T>::zeros(d, d);

    for i in 0..d {
        let m = spin.magnetic::<T>(i);
        sz[(i, i)] = re(m);
        if i >= 1 {
            // S_+ raises |m⟩ = e_i to |m+1⟩ = e_{i-1}.
            let amp = (jj - m * (m + T::one())).sqrt() * half;
            sx[(i - 1, i)] += re(amp);
            sx[(i, i - 1)] += re(amp);
            sy[(i - 1, i)] += re(amp) * -im_unit::<T>();
            sy[(i, i - 1)] += re(amp) * im_unit::<T>();
        }
    }

    (
        SpinOperator::new_unchecked(spin, sx),
        SpinOperator::new_unchecked(spin, sy),
        SpinOperator::new_unchecked(spin, sz),
    )
}
