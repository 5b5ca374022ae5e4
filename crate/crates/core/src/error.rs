//! Error type shared by the numerical modules.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid needs at least 3 nodes per axis (axis {axis} has {got})")]
    GridTooSmall { axis: usize, got: usize },

    #[error("grid dimension must be 1, 2, or 3 (got {0})")]
    BadDimension(usize),

    #[error("operation requires a 1-d grid (got {0} dimensions)")]
    RequiresOneDim(usize),

    #[error("axis {axis} out of range for a {dims}-d grid")]
    AxisOutOfRange { axis: usize, dims: usize },

    #[error("grids do not match")]
    GridMismatch,

    #[error("field is not unit length: max | |u| - 1 | = {violation:.3e} exceeds tolerance {tol:.3e}")]
    SphereViolation { violation: f64, tol: f64 },

    #[error("field is not tangent: max |<X, u>| = {violation:.3e} exceeds tolerance {tol:.3e}")]
    TangencyViolation { violation: f64, tol: f64 },

    #[error("field contains non-finite values")]
    NonFiniteField,

    #[error("eps must lie in [0,1]")]
    EpsOutOfRange(f64),

    #[error("eps must be positive (got {0})")]
    EpsMustBePositive(f64),

    #[error("quantity is only defined for the undamped flow with eps = 0 (got eps = {0})")]
    RequiresZeroEps(f64),

    #[error("derivative order {requested} exceeds the cap of {cap}")]
    DerivativeCapExceeded { requested: usize, cap: usize },

    #[error("one-sided stencil of order {order} needs {needed} nodes but the axis has {got}")]
    StencilDoesNotFit { order: usize, needed: usize, got: usize },

    #[error("unsupported one-sided stencil order {0} (supported: 1, 2, 4)")]
    UnsupportedStencilOrder(usize),

    #[error(
        "dt must satisfy dt <= cfl_constant * h^2 (dt = {dt:.3e}, limit = {limit:.3e}); \
         set override_cfl = true to run anyway"
    )]
    CflViolation { dt: f64, limit: f64 },

    #[error("dt must be positive (got {0})")]
    NonPositiveDt(f64),

    #[error(
        "fixed-point solve did not converge within {iters} iterations \
         (residual {residual:.3e}); try a smaller dt"
    )]
    FixedPointDiverged { iters: usize, residual: f64 },

    #[error("integration blew up at t = {t:.6e}: non-finite update (max |du| = {max_step:.3e})")]
    IntegrationBlowup { t: f64, max_step: f64 },

    #[error("{0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
