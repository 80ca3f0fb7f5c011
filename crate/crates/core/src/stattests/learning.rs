use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use super::{StatError, Thresholds};
use crate::ingest::Cohort;
use crate::metrics::{metric_value, MetricKind, OpponentView, PlayerScope, Polarity, SeriesPoint, SkillSeries};
use crate::numeric::{exact_sum, mean};

/// Learning-curve families: `A + B·x^−α` and `A + B·e^(−α·x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveModel {
    Power,
    Exponential,
}

impl CurveModel {
    fn basis(self, alpha: f64, x: f64) -> f64 {
        match self {
            CurveModel::Power => x.powf(-alpha),
            CurveModel::Exponential => (-alpha * x).exp(),
        }
    }

    pub fn eval(self, p: &FitParams, x: f64) -> f64 {
        p.a + p.b * self.basis(p.alpha, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub sse: f64,
    pub aic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ModelFit {
    Converged(FitParams),
    Diverged { reason: String },
}

impl ModelFit {
    pub fn params(&self) -> Option<&FitParams> {
        match self {
            ModelFit::Converged(p) => Some(p),
            ModelFit::Diverged { .. } => None,
        }
    }
}

const ALPHA_MIN: f64 = 1e-4;
const ALPHA_MAX: f64 = 20.0;
const GRID: usize = 400;
const SSE_FLOOR: f64 = 1e-300;
const PARAMS: f64 = 3.0;

/// Least-squares `(A, B, SSE)` for a fixed `alpha`.
fn linear_part(model: CurveModel, alpha: f64, xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let g: Vec<f64> = xs.iter().map(|&x| model.basis(alpha, x)).collect();
    let mg = mean(&g).unwrap_or(0.0);
    let my = mean(ys).unwrap_or(0.0);
    let sgg = exact_sum(g.iter().map(|v| (v - mg) * (v - mg)));
    let sgy = exact_sum(g.iter().zip(ys).map(|(v, y)| (v - mg) * (y - my)));
    let b = if sgg > 1e-300 { sgy / sgg } else { 0.0 };
    let a = my - b * mg;
    let sse = exact_sum(
        g.iter()
            .zip(ys)
            .map(|(v, y)| {
                let r = y - (a + b * v);
                r * r
            }),
    );
    (a, b, sse)
}

/// Slope of the least-squares line through `(u, v)`.
fn slope(u: &[f64], v: &[f64]) -> Option<f64> {
    let mu = mean(u)?;
    let mv = mean(v)?;
    let suu = exact_sum(u.iter().map(|x| (x - mu) * (x - mu)));
    let suv = exact_sum(u.iter().zip(v).map(|(x, y)| (x - mu) * (y - mv)));
    (suu > 0.0).then(|| suv / suu)
}

/// Starting exponents: log-space regression (power) or endpoint asymptote
/// (exponential).
fn initial_alpha(model: CurveModel, xs: &[f64], ys: &[f64]) -> Option<f64> {
    let last = *ys.last()?;
    let first = *ys.first()?;
    let asymptote = match model {
        CurveModel::Power => last - 0.05 * (first - last),
        CurveModel::Exponential => last,
    };
    let (u, v): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ys)
        .filter_map(|(&x, &y)| {
            let d = (y - asymptote).abs();
            (d > 0.0).then(|| {
                let u = match model {
                    CurveModel::Power => x.ln(),
                    CurveModel::Exponential => x,
                };
                (u, d.ln())
            })
        })
        .unzip();
    if u.len() < 2 {
        return None;
    }
    let alpha = -slope(&u, &v)?;
    (alpha.is_finite() && alpha > 0.0).then(|| alpha.clamp(ALPHA_MIN, ALPHA_MAX))
}

/// Fits one curve family by variable projection: `(A, B)` in closed form for
/// each `alpha`, and `alpha` by grid search plus golden-section refinement.
pub fn fit_curve(model: CurveModel, xs: &[f64], ys: &[f64]) -> ModelFit {
    let diverged = |reason: &str| ModelFit::Diverged {
        reason: reason.to_string(),
    };
    if xs.len() != ys.len() {
        return diverged("x and y lengths differ");
    }
    if xs.len() < 3 {
        return diverged("need at least 3 points");
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return diverged("non-finite input");
    }
    if model == CurveModel::Power && xs.iter().any(|&x| x <= 0.0) {
        return diverged("power law needs x > 0");
    }

    let sse_at = |log_alpha: f64| linear_part(model, log_alpha.exp(), xs, ys).2;
    let (lo, hi) = (ALPHA_MIN.ln(), ALPHA_MAX.ln());
    let step = (hi - lo) / (GRID - 1) as f64;
    let mut candidates: Vec<f64> = (0..GRID).map(|i| lo + step * i as f64).collect();
    if let Some(a0) = initial_alpha(model, xs, ys) {
        candidates.push(a0.ln());
    }
    let (best, _) = candidates
        .iter()
        .map(|&c| (c, sse_at(c)))
        .fold((lo, f64::INFINITY), |acc, (c, s)| if s < acc.1 { (c, s) } else { acc });

    // Golden section inside the neighbouring grid cells.
    let mut a = (best - step).max(lo);
    let mut b = (best + step).min(hi);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse_at(c), sse_at(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse_at(d);
        }
    }
    let refined = if fc <= fd { c } else { d };
    let log_alpha = if sse_at(refined) <= sse_at(best) { refined } else { best };

    let alpha = log_alpha.exp();
    let (a, b, sse) = linear_part(model, alpha, xs, ys);
    if ![a, b, alpha, sse].iter().all(|v| v.is_finite()) {
        return diverged("non-finite parameters");
    }
    let m = xs.len() as f64;
    ModelFit::Converged(FitParams {
        a,
        b,
        alpha,
        sse,
        aic: m * (sse.max(SSE_FLOOR) / m).ln() + 2.0 * PARAMS,
    })
}

pub fn fit_power(xs: &[f64], ys: &[f64]) -> ModelFit {
    fit_curve(CurveModel::Power, xs, ys)
}

pub fn fit_exponential(xs: &[f64], ys: &[f64]) -> ModelFit {
    fit_curve(CurveModel::Exponential, xs, ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrendDirection {
    Improving,
    Flat,
    Worsening,
}

/// Statistics the trend direction is decided from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendStats {
    /// Fitted value at the last bin minus fitted value at the first bin.
    pub fitted_change: f64,
    /// `|fitted_change| / |mean y|`.
    pub relative_change: f64,
    /// p-value of the F-test of the preferred fit against a constant.
    pub p_value: f64,
    pub polarity: Polarity,
}

/// Direction implied by `stats` under the given thresholds.
pub fn trend_direction(stats: &TrendStats, thresholds: &Thresholds) -> TrendDirection {
    let moved = stats.relative_change >= thresholds.trend_min_relative_change
        && stats.p_value < thresholds.trend_alpha
        && stats.fitted_change != 0.0;
    if !moved {
        return TrendDirection::Flat;
    }
    let rising = stats.fitted_change > 0.0;
    match (rising, stats.polarity) {
        (true, Polarity::HigherIsBetter) | (false, Polarity::LowerIsBetter) => TrendDirection::Improving,
        _ => TrendDirection::Worsening,
    }
}

/// How per-player bin values are combined into one cohort value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinAggregate {
    /// Mean of the per-player metric.
    #[default]
    Mean,
    /// Share of players whose net value in the bin is positive.
    PositiveNetShare,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurveResult {
    pub metric: MetricKind,
    pub bin_width: usize,
    pub aggregate: BinAggregate,
    pub binned: SkillSeries,
    pub power_fit: ModelFit,
    pub exp_fit: ModelFit,
    pub preferred: Option<CurveModel>,
    pub trend: TrendStats,
    pub trend_direction: TrendDirection,
}

impl LearningCurveResult {
    pub fn preferred_fit(&self) -> Option<(CurveModel, &FitParams)> {
        match self.preferred? {
            CurveModel::Power => self.power_fit.params().map(|p| (CurveModel::Power, p)),
            CurveModel::Exponential => self.exp_fit.params().map(|p| (CurveModel::Exponential, p)),
        }
    }
}

/// Cohort value of `metric` per experience bin of `bin_width` games.
///
/// Only complete bins are used. Players whose metric is undefined in a bin
/// (for example no losing hands) are left out of that bin. Bins with no
/// contributing player are gaps.
pub fn bin_cohort(
    cohort: &Cohort,
    metric: MetricKind,
    bin_width: usize,
    view: Option<&OpponentView>,
    aggregate: BinAggregate,
) -> Result<SkillSeries, StatError> {
    if bin_width == 0 {
        return Err(StatError::InvalidBinWidth);
    }
    let bins = cohort.values().map(|t| t.len() / bin_width).max().unwrap_or(0);
    let mut per_bin: Vec<Vec<f64>> = vec![Vec::new(); bins];
    for tl in cohort.values() {
        for (k, values) in per_bin.iter_mut().enumerate().take(tl.len() / bin_width) {
            let range = k * bin_width..(k + 1) * bin_width;
            let value = match aggregate {
                BinAggregate::Mean => metric_value(metric, tl, Some(range), view).ok(),
                BinAggregate::PositiveNetShare => {
                    let net = exact_sum(tl.outcomes()[range].iter().map(|o| o.value_delta));
                    Some(if net > 0.0 { 1.0 } else { 0.0 })
                }
            };
            values.extend(value);
        }
    }
    let points = per_bin
        .iter()
        .enumerate()
        .filter_map(|(k, values)| {
            mean(values).map(|y| SeriesPoint {
                x: (k + 1) as f64,
                y,
            })
        })
        .collect();
    Ok(SkillSeries {
        metric,
        scope: PlayerScope::Cohort,
        points,
    })
}

fn trend_stats(binned: &SkillSeries, preferred: Option<(CurveModel, &FitParams)>, polarity: Polarity) -> TrendStats {
    let flat = TrendStats {
        fitted_change: 0.0,
        relative_change: 0.0,
        p_value: 1.0,
        polarity,
    };
    let (Some((model, params)), Some(first), Some(last)) = (preferred, binned.points.first(), binned.points.last())
    else {
        return flat;
    };
    let ys = binned.ys();
    let m = ys.len();
    let my = mean(&ys).unwrap_or(0.0);
    let sse0 = exact_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if sse0 <= 1e-24 * (m as f64) * my.abs().max(1.0).powi(2) {
        return flat;
    }
    let fitted_change = model.eval(params, last.x) - model.eval(params, first.x);
    let relative_change = fitted_change.abs() / my.abs().max(1e-12);
    let p_value = if m <= 3 {
        1.0
    } else if params.sse <= 0.0 || params.sse < sse0 * 1e-15 {
        0.0
    } else {
        let df2 = (m - 3) as f64;
        let f = ((sse0 - params.sse).max(0.0) / 2.0) / (params.sse / df2);
        FisherSnedecor::new(2.0, df2).map_or(1.0, |d| d.sf(f))
    };
    TrendStats {
        fitted_change,
        relative_change,
        p_value,
        polarity,
    }
}

/// Bins the cohort by experience, fits both curve families and reads the
/// trend off the better one (lower AIC; ties go to the power law).
pub fn learning_curve_test(
    cohort: &Cohort,
    metric: MetricKind,
    bin_width: usize,
    view: Option<&OpponentView>,
    aggregate: BinAggregate,
    thresholds: &Thresholds,
) -> Result<LearningCurveResult, StatError> {
    if cohort.is_empty() {
        return Err(StatError::TooFewPlayers { found: 0, required: 1 });
    }
    let binned = bin_cohort(cohort, metric, bin_width, view, aggregate)?;
    let (xs, ys) = (binned.xs(), binned.ys());
    let power_fit = fit_power(&xs, &ys);
    let exp_fit = fit_exponential(&xs, &ys);
    let preferred = match (power_fit.params(), exp_fit.params()) {
        (Some(p), Some(e)) => Some(if e.aic < p.aic { CurveModel::Exponential } else { CurveModel::Power }),
        (Some(_), None) => Some(CurveModel::Power),
        (None, Some(_)) => Some(CurveModel::Exponential),
        (None, None) => None,
    };
    let polarity = match aggregate {
        BinAggregate::Mean => metric.polarity(),
        BinAggregate::PositiveNetShare => Polarity::HigherIsBetter,
    };
    let mut result = LearningCurveResult {
        metric,
        bin_width,
        aggregate,
        binned,
        power_fit,
        exp_fit,
        preferred,
        trend: TrendStats {
            fitted_change: 0.0,
            relative_change: 0.0,
            p_value: 1.0,
            polarity,
        },
        trend_direction: TrendDirection::Flat,
    };
    result.trend = trend_stats(&result.binned, result.preferred_fit(), polarity);
    result.trend_direction = trend_direction(&result.trend, thresholds);
    Ok(result)
}
