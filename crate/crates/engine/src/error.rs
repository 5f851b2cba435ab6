use thiserror::Error;

/// Errors surfaced by the engine's public operations.
#[derive(Error, Debug)]
pub enum EngineError {
    #[error("ambient dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degree {degree} out of range (max {max})")]
    DegreeOutOfRange { degree: usize, max: usize },

    #[error("dimension must be even and at most 8, got {0}")]
    BadSpinorDimension(usize),

    #[error("matrix is not orthogonal (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("orientation-reversing input: det = -1")]
    ReflectionInput,

    #[error("scalar part is singular where inversion is required")]
    SingularScalarPart,

    #[error("square-root branch does not square to the scalar determinant")]
    BadBranch,

    #[error("fixed-point data has a unit eigenvalue in the normal bundle (theta = 0)")]
    UnitNormalEigenvalue,

    #[error("time parameter must be positive")]
    NonPositiveTime,

    #[error("pole order k = 0 has no integrable kernel extension")]
    PoleOrderZero,

    #[error("left factor of a symbol composition must be polynomial in (xi, tau)")]
    NotDifferential,

    #[error("matrix size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("element is outside the algebra span (residual {residual:.3e})")]
    OutsideAlgebra { residual: f64 },

    #[error("operator h must be selfadjoint (residual {residual:.3e})")]
    NotSelfadjoint { residual: f64 },

    #[error("U does not implement a scaling of D (residual {residual:.3e})")]
    NotScaling { residual: f64 },

    #[error("D is singular; the cocycle needs an invertible operator")]
    SingularOperator,

    #[error("rank computation ill-conditioned: singular value {value:.3e} inside guard band")]
    RankGuardBand { value: f64 },

    #[error("momentum cutoff {cutoff} too small: {reason}")]
    CutoffTooSmall { cutoff: usize, reason: String },

    #[error("isometry does not preserve the spin structure {0:?}")]
    SpinStructureMismatch([u8; 2]),

    #[error("isometry does not preserve the lattice")]
    LatticeMismatch,

    #[error("perturbation is not module-linear (residual {residual:.3e})")]
    NotModuleLinear { residual: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, EngineError>;
