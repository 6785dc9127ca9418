use thiserror::Error;

/// Errors produced by mesh construction, operator assembly and the solver stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 2 or 3)")]
    BadDimension(usize),

    #[error("element count along axis {0} must be at least 1")]
    ZeroElementCount(usize),

    #[error("degenerate extents along axis {axis}: length {length}")]
    DegenerateExtents { axis: usize, length: f64 },

    #[error("polynomial degree must be at least 1")]
    ZeroDegree,

    #[error("quadrature rule needs at least one point")]
    ZeroQuadrature,

    #[error("invalid mesh: det J = {det:e} <= 0 in element {element} at quadrature point {point}")]
    InvalidMesh {
        element: usize,
        point: usize,
        det: f64,
    },

    #[error("LOR refinement inverted a sub-element of element {parent}")]
    LorInverted { parent: usize },

    #[error("vector length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("operation requires an H1 space")]
    RequiresH1,

    #[error("dof index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("operator indefinite: p^T A p = {curvature:e} at iteration {iteration}")]
    IndefiniteOperator { iteration: usize, curvature: f64 },

    #[error("nonpositive diagonal entry {value:e} at dof {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("factorization pivot {pivot:e} <= 0 at row {row}; matrix is not positive definite")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("multigrid hierarchy needs at least two levels")]
    HierarchyTooShallow,

    #[error("quality metric barrier: det T = {0:e} <= 0")]
    MetricBarrier(f64),

    #[error("element {element} inverted at quadrature point {point}")]
    InvertedElement { element: usize, point: usize },

    #[error("inadmissible state{}{}",
        match .face { Some(f) => format!(" at face {f}"), None => String::new() },
        match .stage { Some(s) => format!(" in RK stage {s}"), None => String::new() })]
    InadmissibleState {
        face: Option<usize>,
        stage: Option<usize>,
    },

    #[error("matrix-free application is only available for mass operators")]
    MatrixFreeUnsupported,

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
