//! The skill-versus-chance test battery.
//!
//! * [`persistence_test`]: correlation of a skill variable across two periods.
//! * [`learning_curve_test`]: cohort metric by experience bin, with power-law
//!   and exponential fits.
//! * [`qq_test`]: normal QQ linearity of per-player win rates.
//! * [`quantile_summary`]: cumulative group means and spreads.
//! * [`classify`]: combines the three tests into a verdict.

mod correlation;
mod learning;
mod qq;
mod summary;
mod verdict;

use thiserror::Error;

use crate::metrics::MetricError;

pub use correlation::{
    bootstrap_ci, pearson, persistence_test, BootstrapSettings, DateRange, PeriodSplit,
    PersistencePair, PersistenceResult,
};
pub use learning::{
    bin_cohort, fit_curve, fit_exponential, fit_power, learning_curve_test, trend_direction,
    BinAggregate, CurveModel, FitParams, LearningCurveResult, ModelFit, TrendDirection, TrendStats,
};
pub use qq::{qq_test, QQResult};
pub use summary::{quantile_summary, PlayerOrdering, PlayerSummary, QuantileGroup, QuantileSummary};
pub use verdict::{classify, Thresholds, Verdict, VerdictReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {required} points, got {found}")]
    TooFewPoints { found: usize, required: usize },
    #[error("a sequence has zero variance")]
    ZeroVariance,
    #[error("only {found} players qualify; need at least {required}")]
    InsufficientPlayers { found: usize, required: usize },
    #[error("only {found} players; need at least {required}")]
    TooFewPlayers { found: usize, required: usize },
    #[error("bin width must be at least 1")]
    InvalidBinWidth,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}
