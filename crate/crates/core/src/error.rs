use thiserror::Error;

/// Errors surfaced by the solver pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("gradient outside subsonic regime: no root of the density equation (q1={q1}, q2={q2})")]
    NoSubsonicRoot { q1: f64, q2: f64 },

    #[error("ellipticity lost: reconstructed state is sonic or supersonic (q1={q1}, q2={q2})")]
    EllipticityLost { q1: f64, q2: f64 },

    #[error("omega outside admissible range: no root of H in the search bracket (omega={omega})")]
    OmegaOutOfRange { omega: f64 },

    #[error("subsonicity lost at far field (p_r={p_r})")]
    SubsonicityLost { p_r: f64 },

    #[error("pressure exceeds stagnation pressure (p={p})")]
    StagnationExceeded { p: f64 },

    #[error("sigma too large for connector: inadmissible gradient at (x={x}, y={y})")]
    ConnectorInadmissible { x: f64, y: f64 },

    #[error("iterate left subsonic neighborhood at (x={x}, y={y}): {source}")]
    IterateInadmissible {
        x: f64,
        y: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed: relative residual {residual:.3e} after {iterations} iterations")]
    LinearSolveFailed {
        residual: f64,
        iterations: usize,
        history: Vec<f64>,
    },

    #[error("iteration diverged (sigma too large): residual increased for {0} consecutive damped steps")]
    IterationDiverged(usize),

    #[error("Lagrangian map not invertible: d(phi)/dY = {value} at (x={x}, Y={y})")]
    NotInvertible { x: f64, y: f64, value: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
