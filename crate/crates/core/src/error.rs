use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("flux {flux} is not an integer multiple of 2π")]
    NonIntegralFlux { flux: f64 },

    #[error("plaquette flux {max_flux:.4} exceeds resolution guard {phi_max} (M = {m})")]
    ResolutionTooCoarse { max_flux: f64, phi_max: f64, m: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no relative spectral gap >= {threshold} among {candidates} candidate eigenvalues")]
    NoGapDetected { threshold: f64, candidates: usize },

    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),

    #[error("dense eigensolver limited to n <= {cap}, got {n}")]
    TooLarge { n: usize, cap: usize },

    #[error("kernel radius {radius} exceeds injectivity scale {limit}")]
    RadiusTooLarge { radius: f64, limit: f64 },

    #[error("insufficient samples for fit: {0}")]
    InsufficientSamples(usize),

    #[error("symbol rank {symbol} does not match bundle rank {bundle}")]
    RankMismatch { symbol: usize, bundle: usize },

    #[error("weight exponent {exponent:.1} exceeds overflow guard")]
    WeightOverflow { exponent: f64 },

    #[error("projector diagonal {value:e} below threshold at node {node}")]
    DegenerateDiagonal { node: usize, value: f64 },

    #[error("symbol `{0}` has no registered derivative")]
    MissingDerivative(String),

    #[error("quadrature did not converge: successive orders differ by {0:e}")]
    QuadratureNotConverged(f64),

    #[error("Fock truncation K_max = {k_max} insufficient (tail bound {tail:e})")]
    TruncationInsufficient { k_max: usize, tail: f64 },

    #[error("Poisson sign calibration ambiguous: defects {plus:e} vs {minus:e}")]
    AmbiguousSign { plus: f64, minus: f64 },

    #[error("all values vanish (below {floor:e})")]
    AllZero { floor: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
