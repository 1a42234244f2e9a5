use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("not enough data: need at least {needed}, got {got}")]
    SampleSize { needed: usize, got: usize },
    #[error("transform error: {0}")]
    Transform(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("fit failed: {reason} (iterations {iterations}, gradient norm {gradient_norm:e})")]
    Fit {
        reason: String,
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("complete or quasi-complete separation along `{direction}`")]
    Separation { direction: String },
    #[error("no threshold passes the goodness-of-fit rule; p-values (threshold, p_ad, p_cvm): {pvalues:?}")]
    Selection { pvalues: Vec<(f64, f64, f64)> },
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("AUC undefined: labels contain a single class")]
    UndefinedAuc,
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn fit(reason: impl Into<String>, iterations: usize, gradient_norm: f64) -> Self {
        Error::Fit {
            reason: reason.into(),
            iterations,
            gradient_norm,
        }
    }
}
