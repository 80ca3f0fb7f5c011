use serde::{Deserialize, Serialize};

use super::{trend_direction, LearningCurveResult, PersistenceResult, QQResult, QuantileSummary, TrendDirection};

/// Decision thresholds; every report carries the values it was judged by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Minimum persistence correlation for a skill verdict.
    pub r_min: f64,
    /// QQ linearity: minimum R².
    pub qq_min_r_squared: f64,
    /// QQ linearity: maximum |observed − theoretical| quantile gap.
    pub qq_max_abs_deviation: f64,
    /// Minimum fitted change over the bins, relative to the mean level.
    pub trend_min_relative_change: f64,
    /// Significance level of the fitted-curve vs constant F-test.
    pub trend_alpha: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            r_min: 0.3,
            qq_min_r_squared: 0.98,
            qq_max_abs_deviation: 0.15,
            trend_min_relative_change: 0.02,
            trend_alpha: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SkillDominant,
    ChanceDominant,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub persistence: PersistenceResult,
    pub learning: LearningCurveResult,
    pub normality: QQResult,
    pub quantiles: QuantileSummary,
    pub verdict: Verdict,
    pub thresholds_used: Thresholds,
}

impl VerdictReport {
    /// Re-derives the verdict from the stored statistics.
    pub fn reclassify(&self) -> Verdict {
        decide(&self.persistence, &self.learning, &self.normality, &self.thresholds_used)
    }
}

fn decide(p: &PersistenceResult, l: &LearningCurveResult, q: &QQResult, t: &Thresholds) -> Verdict {
    let (lo, hi) = p.bootstrap_ci95;
    let trend = trend_direction(&l.trend, t);
    let normal = q.normal_consistent_under(t);
    if p.r >= t.r_min && lo > 0.0 && trend == TrendDirection::Improving && !normal {
        Verdict::SkillDominant
    } else if lo <= 0.0 && 0.0 <= hi && trend == TrendDirection::Flat {
        Verdict::ChanceDominant
    } else {
        Verdict::Inconclusive
    }
}

/// Combines the three tests.
///
/// Skill needs persistent performance (r ≥ r_min, CI above 0), improvement
/// with experience and a non-normal win-rate distribution. Chance needs a
/// CI covering 0 and a flat learning curve. Anything else is inconclusive.
pub fn classify(
    persistence: PersistenceResult,
    mut learning: LearningCurveResult,
    mut normality: QQResult,
    quantiles: QuantileSummary,
    thresholds: Thresholds,
) -> VerdictReport {
    learning.trend_direction = trend_direction(&learning.trend, &thresholds);
    normality.normal_consistent = normality.normal_consistent_under(&thresholds);
    let verdict = decide(&persistence, &learning, &normality, &thresholds);
    VerdictReport {
        persistence,
        learning,
        normality,
        quantiles,
        verdict,
        thresholds_used: thresholds,
    }
}
