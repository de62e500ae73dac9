use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not hermitian: max asymmetry {asymmetry:e} at scale {scale:e}")]
    NotHermitian { asymmetry: f64, scale: f64 },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("eigendecomposition did not converge (dim {dim}, max-norm {norm:e})")]
    NoConvergence { dim: usize, norm: f64 },

    #[error("function undefined on spectrum at eigenvalue {eigenvalue:e}")]
    SpectrumDomain { eigenvalue: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("full-rank state required; near-zero eigenvalues {eigenvalues:?}")]
    RankDeficient { eigenvalues: Vec<f64> },

    #[error("dimension {dim} exceeds cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("quadrature did not converge: error estimate {achieved:e} > requested {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("zero Fisher information: {0}")]
    ZeroInformation(String),

    #[error(
        "MLE bracket [{lo}, {hi}] exhausted (log-likelihood {ll_lo} at low end, {ll_hi} at high end)"
    )]
    BracketExhausted {
        lo: f64,
        hi: f64,
        ll_lo: f64,
        ll_hi: f64,
    },

    #[error("Fock truncation needs n_max = {required} (cap {cap})")]
    Truncation { required: usize, cap: usize },

    #[error("invalid model: {0}")]
    Model(String),

    #[error("at T = {temperature}: {source}")]
    AtTemperature {
        temperature: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("at stencil point theta = {theta}: {source}")]
    Stencil {
        theta: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_temperature(self, temperature: f64) -> Self {
        Error::AtTemperature {
            temperature,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_stencil(self, theta: f64) -> Self {
        Error::Stencil {
            theta,
            source: Box::new(self),
        }
    }
}
