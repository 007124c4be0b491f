use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("Euler-rate map is singular at psi = {psi:.6} rad")]
    EulerSingularity { psi: f64 },

    #[error("joint {joint} angle {angle:.4} rad outside limits [{lo:.4}, {hi:.4}]")]
    JointLimit { joint: usize, angle: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("internal-wrench system is singular or ill-conditioned (cond ~ {condition:.3e}) at {context}")]
    SingularSystem { condition: f64, context: String },

    #[error("internal-wrench solve residual {residual:.3e} exceeds bound {bound:.3e} at {context}")]
    Residual { residual: f64, bound: f64, context: String },

    #[error("solver failure at t = {t:.4} s: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("negative squared rotor speed {value} at rotor {index}")]
    NegativeSpeed { index: usize, value: f64 },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn at_time(self, t: f64) -> Self {
        Error::AtTime { t, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
