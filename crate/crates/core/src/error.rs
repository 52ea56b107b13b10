use thiserror::Error;

/// Every failure a numerical pipeline can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("transform size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("signal is not compactly supported in its window: edge/peak ratio {ratio:.3e} exceeds floor {floor:.1e}")]
    SupportViolation { ratio: f64, floor: f64 },
    #[error("grid too coarse: need at least {min_count} samples, got {count}")]
    Resolution { min_count: usize, count: usize },
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("mass leaked past the window edges: {leaked:.3e} (limit {limit:.1e})")]
    WindowLeakage { leaked: f64, limit: f64 },
    #[error("spectral tail above the resolved band carries {fraction:.3e} of the mass (limit {limit:.1e})")]
    SpectralTruncation { fraction: f64, limit: f64 },
    #[error("propagator kernel is singular at zero time lag")]
    Singular,
    #[error("fixed-point map did not contract: window {window:.3e} below minimum {min_window:.3e} (factor {factor:.3})")]
    Stiffness { window: f64, min_window: f64, factor: f64 },
    #[error("iteration cap {0} exceeded")]
    IterationCap(usize),
    #[error("near-singular marching coefficient at node {node}: |d| = {modulus:.3e}")]
    NearSingular { node: usize, modulus: f64 },
    #[error("exponent fit rejected: r^2 = {r_squared:.4} < {threshold}")]
    FitRejected { r_squared: f64, threshold: f64 },
    #[error("origin not resolved: {0}")]
    UnresolvedOrigin(String),
    #[error("initial data not in the operator domain: {0}")]
    NotInDomain(String),
    #[error("step rejected: {0}")]
    StepRejected(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
