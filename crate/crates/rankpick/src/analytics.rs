//! Evaluation mathematics: rank correlation, regression quality, campaign
//! metrics, landscape roughness, and interval statistics.

pub mod rogi;
pub mod stats;
pub mod summary;

pub use rogi::{rogi, RogiReport};
pub use stats::{ci95, kendall_tau, normal_cdf, normal_pdf, pearson_r, r_squared, t_test};
pub use summary::{bo_auc, top_k_fraction, AucSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("input contains a non-finite value")]
    NonFinite,
    #[error("{what} has zero variance")]
    ZeroVariance { what: &'static str },
    #[error("true top set is empty")]
    EmptyTrueTop,
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("{0}")]
    BadParameter(String),
    #[error(transparent)]
    Chem(#[from] crate::chem::ChemError),
}
