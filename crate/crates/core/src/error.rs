use thiserror::Error;

/// Errors raised by the geometric-phase pipelines.
///
/// Every precondition violation is reported; nothing is silently corrected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("Hilbert space dimension must be at least 2 (got {0})")]
    DimensionTooSmall(usize),

    #[error("zero vector has no ray")]
    ZeroVector,

    #[error("state is not normalized (|<psi|psi> - 1| = {deviation:e})")]
    NotNormalized { deviation: f64 },

    #[error("matrix is not Hermitian (max |H - H^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("chart {chart} unavailable: |Z^{chart}| = {magnitude:e}")]
    ChartUnavailable { chart: usize, magnitude: f64 },

    #[error("chart coordinate modulus {modulus:e} exceeds 1e8")]
    CoordinateOverflow { modulus: f64 },

    #[error("rays are orthogonal: shortest geodesic is not unique")]
    NotUnique,

    #[error("states are orthogonal and cannot be phase compared (|overlap| = {overlap:e}{})", link_suffix(*.link))]
    NotComparable { overlap: f64, link: Option<usize> },

    #[error("path is not closed (first/last ray distance {distance:e})")]
    NotClosed { distance: f64 },

    #[error("path is empty")]
    EmptyPath,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("level {level} crosses a neighbour at sample {sample} (gap {gap:e})")]
    LevelCrossing { level: usize, sample: usize, gap: f64 },

    #[error("south pole theta = pi lies outside the coordinate patch")]
    SouthPole,

    #[error("curve is self-intersecting (arcs {first} and {second})")]
    SelfIntersecting { first: usize, second: usize },

    #[error("integration step too large: norm drift {drift:e} at step {step}")]
    StepTooLarge { step: usize, drift: f64 },

    #[error("evolution is not cyclic (ray residual {residual:e} > {tolerance:e})")]
    NotCyclic { residual: f64, tolerance: f64 },

    #[error("sigma map undefined: s = {s}, u = {u}")]
    SigmaDomain { s: f64, u: f64 },

    #[error("unknown model {0:?}")]
    UnknownModel(String),
}

pub type Result<T> = std::result::Result<T, Error>;

fn link_suffix(link: Option<usize>) -> String {
    link.map(|i| format!(", link {i}")).unwrap_or_default()
}
