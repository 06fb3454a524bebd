use thiserror::Error;

/// Errors produced by belief construction, adjustment, projection and the
/// study harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Two fields of a structure disagree on a dimension.
    #[error("dimension mismatch: {left} is {left_dim} but {right} is {right_dim}")]
    DimensionMismatch {
        left: &'static str,
        left_dim: usize,
        right: &'static str,
        right_dim: usize,
    },

    /// A matrix expected to be symmetric is not, beyond tolerance.
    #[error("matrix `{name}` is not symmetric: max |M - M'| = {asymmetry:.3e} exceeds {tol:.3e}")]
    NotSymmetric {
        name: &'static str,
        asymmetry: f64,
        tol: f64,
    },

    /// A matrix expected to be positive semi-definite has a negative
    /// eigenvalue beyond tolerance.
    #[error("matrix `{name}` is not positive semi-definite: eigenvalue {eigenvalue:.6e} below -{tol:.3e}")]
    NotPsd {
        name: &'static str,
        eigenvalue: f64,
        tol: f64,
    },

    /// Constraint-set construction was asked for an empty system.
    #[error("constraint set would be empty: {reason}")]
    EmptyConstraintSet { reason: &'static str },

    /// A constraint row has no nonzero coefficient.
    #[error("constraint row {row} ({label}) is all zero")]
    ZeroConstraintRow { row: usize, label: String },

    /// Box bounds cross.
    #[error("box bounds invalid at coordinate {index}: lower {lower} > upper {upper}")]
    InvalidBounds { index: usize, lower: f64, upper: f64 },

    /// An index list that must be a permutation is not.
    #[error("invalid index set: {reason}")]
    InvalidIndices { reason: String },

    /// The polyhedron A q >= b admits no point.
    #[error("infeasible constraint set: no point satisfies row {row} ({label})")]
    Infeasible { row: usize, label: String },

    /// A rank-deficient metric pins coordinates of the target point that
    /// violate the constraints, so no feasible point has finite objective.
    #[error("pinned infeasibility: null-space directions of the metric fix the point against row {row} ({label})")]
    PinnedInfeasible { row: usize, label: String },

    /// The active-set solver hit its iteration cap.
    #[error("projection did not converge within {limit} iterations")]
    IterationLimit { limit: usize },

    /// The solver terminated but its certificate exceeds tolerance.
    #[error("KKT residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    KktNotCertified { residual: f64, tol: f64 },

    /// A shrink function failed one of its coherency constraints.
    #[error("shrink function `{name}` rejected: {reason}")]
    InvalidShrink { name: String, reason: String },

    /// A shrink multiplier outside (0, 1].
    #[error("shrink value {value} at coordinate {index} outside (0, 1]")]
    ShrinkOutOfRange { index: usize, value: f64 },

    /// Kernel specification is unusable for the requested operation.
    #[error("invalid kernel: {reason}")]
    InvalidKernel { reason: String },

    /// Geographic coordinate outside its valid range.
    #[error("coordinate out of range: {name} = {value} not in [{min}, {max}]")]
    CoordinateOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// Name not present in a registry.
    #[error("unknown {kind}: `{name}`")]
    UnknownName { kind: &'static str, name: String },

    /// Invalid study configuration.
    #[error("invalid study configuration: {reason}")]
    InvalidConfig { reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
