use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("mesh mismatch between operands")]
    MeshMismatch,

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("length {got} does not match mesh node count {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("time level {index} out of range (have {len} levels)")]
    IndexOutOfRange { index: usize, len: usize },

    /// A leading exponent above zero admits no formal solution: equating the
    /// coefficients of x^{3 beta_0} forces mu |c_0|^2 c_0 = 0.
    #[error(
        "leading exponent {beta} > 0: the cubic term x^(3*beta) has nothing to balance it, \
         so mu*|c0|^2*c0 = 0 and no formal solution exists"
    )]
    PositiveLeadingExponent { beta: f64 },

    #[error("invalid exponent generators: {0}")]
    InvalidGenerators(String),

    #[error("coefficient {index} depends on index {dependency}, which was not supplied")]
    MissingDependency { index: usize, dependency: usize },

    #[error("series evaluation requires |x| >= 1 on the matching side, got x = {x}")]
    OutsideAsymptoticRegion { x: f64 },

    #[error("time {t} outside the solved horizon [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("series sides or parameters do not match: {0}")]
    SideMismatch(String),

    #[error("unsupported derivative order d_x^{dx} d_t^{dt}")]
    UnsupportedDerivative { dx: usize, dt: usize },

    #[error("step operator singular at level {level} (t = {time})")]
    SingularStep { level: usize, time: f64 },

    #[error("S_h norm {norm:.3e} exceeded blow-up guard {limit:.3e} at level {level} (t = {time})")]
    BlowUpGuard {
        level: usize,
        time: f64,
        norm: f64,
        limit: f64,
    },

    #[error("insufficient levels: {0}")]
    InsufficientLevels(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("ladder needs at least two rungs, got {0}")]
    LadderTooShort(usize),
}
