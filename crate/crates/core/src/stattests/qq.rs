use serde::{Deserialize, Serialize};

use super::{pearson, StatError, Thresholds};
use crate::metrics::{percentile_position, rank_average, standardize, theoretical_quantile, QuantilePoint};
use crate::numeric::{mean, sample_sd};

/// Minimum cohort size for a QQ comparison.
pub const QQ_MIN_PLAYERS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QQResult {
    pub n: usize,
    /// Cohort mean and sample sd used for standardizing.
    pub mean: f64,
    pub sd: f64,
    /// Sorted by percentile.
    pub points: Vec<QuantilePoint>,
    /// R² of the least-squares line through (theoretical_q, observed_q).
    pub r_squared: f64,
    /// Largest |observed_q − theoretical_q|.
    pub max_abs_deviation: f64,
    pub normal_consistent: bool,
}

impl QQResult {
    pub fn normal_consistent_under(&self, thresholds: &Thresholds) -> bool {
        self.r_squared >= thresholds.qq_min_r_squared && self.max_abs_deviation <= thresholds.qq_max_abs_deviation
    }
}

/// Normal QQ comparison of per-player values (typically win rates).
pub fn qq_test(values: &[f64], thresholds: &Thresholds) -> Result<QQResult, StatError> {
    let n = values.len();
    if n < QQ_MIN_PLAYERS {
        return Err(StatError::TooFewPlayers {
            found: n,
            required: QQ_MIN_PLAYERS,
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(StatError::InvalidArgument("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = mean(&sorted).unwrap_or(0.0);
    let sd = sample_sd(&sorted).unwrap_or(0.0);
    if sd.is_nan() || sd <= 0.0 {
        return Err(StatError::ZeroVariance);
    }
    let ranks = rank_average(&sorted);
    let points = sorted
        .iter()
        .zip(&ranks)
        .map(|(&v, &rank)| {
            let percentile = percentile_position(rank, n)?;
            Ok(QuantilePoint {
                rank,
                percentile,
                theoretical_q: theoretical_quantile(percentile)?,
                observed_q: standardize(v, m, sd)?,
            })
        })
        .collect::<Result<Vec<_>, StatError>>()?;
    let theo: Vec<f64> = points.iter().map(|p| p.theoretical_q).collect();
    let obs: Vec<f64> = points.iter().map(|p| p.observed_q).collect();
    let r_squared = match pearson(&theo, &obs) {
        Ok(r) => r * r,
        Err(StatError::ZeroVariance) => 0.0,
        Err(e) => return Err(e),
    };
    let max_abs_deviation = points
        .iter()
        .map(|p| (p.observed_q - p.theoretical_q).abs())
        .fold(0.0, f64::max);
    let mut result = QQResult {
        n,
        mean: m,
        sd,
        points,
        r_squared,
        max_abs_deviation,
        normal_consistent: false,
    };
    result.normal_consistent = result.normal_consistent_under(thresholds);
    Ok(result)
}
