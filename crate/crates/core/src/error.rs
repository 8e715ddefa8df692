//! Error type shared by all numerical routines.

/// Errors reported by the library.
///
/// Numeric diagnostics are carried as `f64` regardless of the scalar the
/// computation ran in; they are for reporting only.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An operation requiring a Hermitian input received a matrix whose
    /// deviation `max |A - A^H|` exceeds the tolerance.
    #[error("matrix is not Hermitian: max |A - A^H| = {deviation:.3e} exceeds {tolerance:.3e}")]
    NotHermitian { deviation: f64, tolerance: f64 },

    /// Two operands live in different spin sectors / dimensions.
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// A density matrix failed validation (hermiticity, unit trace or
    /// positivity).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// Requested spin exceeds the configured magnitude cap.
    #[error("spin 2j = {twice_j} exceeds the cap 2j <= {cap}")]
    SpinTooLarge { twice_j: u32, cap: u32 },

    /// A quantity that must be a spin quantum number (integer or
    /// half-integer) is not.
    #[error("{value} is not an integer or half-integer spin value")]
    NotHalfInteger { value: f64 },

    /// A magnetic quantum number is outside the ladder of the given spin.
    #[error("m = {value} is not a magnetic number of spin with 2j = {twice_j}")]
    InvalidMagneticNumber { value: f64, twice_j: u32 },

    /// Node-doubling quadrature failed to settle below its threshold.
    #[error("quadrature did not converge: change {change:.3e} after {doublings} node doublings")]
    QuadratureNotConverged { change: f64, doublings: u32 },

    /// An internal identity that must hold for valid inputs was violated
    /// beyond tolerance; indicates corrupted input or a bug.
    #[error("internal consistency violation: {0}")]
    InternalConsistency(String),

    /// One or more configuration fields are invalid; every offending field
    /// is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    InvalidConfig(Vec<String>),
}

/// Convenience alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;
