use chrono::{Datelike, NaiveDate, TimeZone, Utc};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::StatError;
use crate::ingest::Cohort;
use crate::metrics::{metric_value, MetricKind, OpponentView};
use crate::model::{format_timestamp, Millis};
use crate::numeric::{exact_sum, mean};
use crate::rng;

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatError> {
    if xs.len() != ys.len() {
        return Err(StatError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 3 {
        return Err(StatError::TooFewPoints {
            found: xs.len(),
            required: 3,
        });
    }
    let mx = mean(xs).unwrap_or(0.0);
    let my = mean(ys).unwrap_or(0.0);
    let sxy = exact_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = exact_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let syy = exact_sum(ys.iter().map(|y| (y - my) * (y - my)));
    if !(sxx > 0.0 && syy > 0.0) {
        return Err(StatError::ZeroVariance);
    }
    // One square root of the product keeps pearson(x, x) exactly 1; the
    // split form guards against overflow of the product.
    let prod = sxx * syy;
    let denom = if prod.is_finite() && prod > 0.0 { prod.sqrt() } else { sxx.sqrt() * syy.sqrt() };
    Ok((sxy / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSettings {
    pub resamples: usize,
    pub seed: u64,
}

impl Default for BootstrapSettings {
    fn default() -> Self {
        Self {
            resamples: 1000,
            seed: 0,
        }
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// 95% percentile bootstrap interval for the Pearson correlation.
///
/// Resample `i` draws from its own derived stream, so the interval does not
/// depend on the number of worker threads. Degenerate resamples (zero
/// variance) are skipped.
pub fn bootstrap_ci(xs: &[f64], ys: &[f64], settings: BootstrapSettings) -> Result<(f64, f64), StatError> {
    pearson(xs, ys)?;
    let n = xs.len();
    let mut rs: Vec<f64> = (0..settings.resamples)
        .into_par_iter()
        .filter_map(|i| {
            let mut rng = rng::stream(settings.seed, "bootstrap", i as u64);
            let mut bx = Vec::with_capacity(n);
            let mut by = Vec::with_capacity(n);
            for _ in 0..n {
                let j = rng.random_range(0..n);
                bx.push(xs[j]);
                by.push(ys[j]);
            }
            pearson(&bx, &by).ok()
        })
        .collect();
    if rs.is_empty() {
        return Ok((-1.0, 1.0));
    }
    rs.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&rs, 0.025), quantile_sorted(&rs, 0.975)))
}

/// How the observation window is cut into periods A and B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum PeriodSplit {
    /// Calendar-month boundary closest to the middle of the data.
    NearestMonthBoundary,
    /// Period B starts at the first instant of this month.
    Month { year: i32, month: u32 },
    /// Exact temporal midpoint of the data.
    Midpoint,
    /// Explicit boundary.
    At { millis: Millis },
}

fn month_start(year: i32, month: u32) -> Option<Millis> {
    NaiveDate::from_ymd_opt(year, month, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

impl PeriodSplit {
    /// Parses `YYYY-MM`.
    pub fn parse_month(text: &str) -> Option<PeriodSplit> {
        let (y, m) = text.trim().split_once('-')?;
        let year: i32 = y.parse().ok()?;
        let month: u32 = m.parse().ok()?;
        month_start(year, month)?;
        Some(PeriodSplit::Month { year, month })
    }

    /// Boundary instant for data spanning `first..=last`.
    pub fn boundary(self, first: Millis, last: Millis) -> Millis {
        let mid = first + (last - first) / 2;
        match self {
            PeriodSplit::At { millis } => millis,
            PeriodSplit::Midpoint => mid,
            PeriodSplit::Month { year, month } => month_start(year, month).unwrap_or(mid),
            PeriodSplit::NearestMonthBoundary => {
                let Some(dt) = Utc.timestamp_millis_opt(mid).single() else {
                    return mid;
                };
                let this = month_start(dt.year(), dt.month()).unwrap_or(mid);
                let (ny, nm) = if dt.month() == 12 { (dt.year() + 1, 1) } else { (dt.year(), dt.month() + 1) };
                let next = month_start(ny, nm).unwrap_or(mid);
                if (mid - this).abs() <= (next - mid).abs() {
                    this
                } else {
                    next
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: String,
    pub end: String,
}

/// One player's metric in both periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub user_id: String,
    pub period_a: f64,
    pub period_b: f64,
    pub games_a: usize,
    pub games_b: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceResult {
    pub metric: MetricKind,
    pub r: f64,
    pub n_players: usize,
    pub period_a: DateRange,
    pub period_b: DateRange,
    pub split: PeriodSplit,
    pub boundary: String,
    pub min_games: usize,
    pub bootstrap_resamples: usize,
    pub bootstrap_ci95: (f64, f64),
    /// Per-player values behind `r`; written to CSV, not to the report.
    #[serde(skip)]
    pub pairs: Vec<PersistencePair>,
}

/// Correlates each player's metric before and after the split boundary.
///
/// Only players with at least `min_games` in each period whose metric is
/// defined in both periods take part.
pub fn persistence_test(
    cohort: &Cohort,
    split: PeriodSplit,
    metric: MetricKind,
    min_games: usize,
    view: Option<&OpponentView>,
    bootstrap: BootstrapSettings,
) -> Result<PersistenceResult, StatError> {
    let first = cohort
        .values()
        .filter_map(|t| t.outcomes().first())
        .map(|o| o.timestamp)
        .min();
    let last = cohort
        .values()
        .filter_map(|t| t.outcomes().last())
        .map(|o| o.timestamp)
        .max();
    let (Some(first), Some(last)) = (first, last) else {
        return Err(StatError::InsufficientPlayers { found: 0, required: 3 });
    };
    let boundary = split.boundary(first, last);

    let mut pairs = Vec::new();
    let (mut a_lo, mut a_hi, mut b_lo, mut b_hi) = (Millis::MAX, Millis::MIN, Millis::MAX, Millis::MIN);
    for (user, tl) in cohort {
        let ra = tl.time_range(Millis::MIN, boundary);
        let rb = tl.time_range(boundary, Millis::MAX);
        if ra.len() < min_games.max(1) || rb.len() < min_games.max(1) {
            continue;
        }
        let (Ok(va), Ok(vb)) = (
            metric_value(metric, tl, Some(ra.clone()), view),
            metric_value(metric, tl, Some(rb.clone()), view),
        ) else {
            continue;
        };
        let o = tl.outcomes();
        a_lo = a_lo.min(o[ra.start].timestamp);
        a_hi = a_hi.max(o[ra.end - 1].timestamp);
        b_lo = b_lo.min(o[rb.start].timestamp);
        b_hi = b_hi.max(o[rb.end - 1].timestamp);
        pairs.push(PersistencePair {
            user_id: user.clone(),
            period_a: va,
            period_b: vb,
            games_a: ra.len(),
            games_b: rb.len(),
        });
    }
    if pairs.len() < 3 {
        return Err(StatError::InsufficientPlayers {
            found: pairs.len(),
            required: 3,
        });
    }
    let xs: Vec<f64> = pairs.iter().map(|p| p.period_a).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.period_b).collect();
    let r = pearson(&xs, &ys)?;
    let (lo, hi) = bootstrap_ci(&xs, &ys, bootstrap)?;
    Ok(PersistenceResult {
        metric,
        r,
        n_players: pairs.len(),
        period_a: DateRange {
            start: format_timestamp(a_lo),
            end: format_timestamp(a_hi),
        },
        period_b: DateRange {
            start: format_timestamp(b_lo),
            end: format_timestamp(b_hi),
        },
        split,
        boundary: format_timestamp(boundary),
        min_games,
        bootstrap_resamples: bootstrap.resamples,
        bootstrap_ci95: (lo.min(r), hi.max(r)),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Game, Outcome, PlayerTimeline};
    use proptest::prelude::*;

    /// Definitional Pearson, written independently of the implementation.
    fn oracle_pearson(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let (sx, sy): (f64, f64) = (xs.iter().sum(), ys.iter().sum());
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);
        let ys = [2.0, 4.0, 5.0, 9.0];
        // Hand computation: 11 / sqrt(5 * 26).
        let expected = 0.964_764_0;
        assert!((oracle_pearson(&xs, &ys) - expected).abs() < 1e-6);
        assert!((pearson(&xs, &ys).unwrap() - expected).abs() < 1e-4);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]), Err(StatError::LengthMismatch(3, 2)));
        assert_eq!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(StatError::ZeroVariance));
        assert!(matches!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(StatError::TooFewPoints { .. })));
    }

    #[test]
    fn month_boundaries() {
        let dec1 = month_start(2022, 12).unwrap();
        let feb1 = month_start(2023, 2).unwrap();
        let jan1 = month_start(2023, 1).unwrap();
        assert_eq!(PeriodSplit::NearestMonthBoundary.boundary(dec1, feb1 - 1), jan1);
        assert_eq!(PeriodSplit::parse_month("2023-01"), Some(PeriodSplit::Month { year: 2023, month: 1 }));
        assert_eq!(PeriodSplit::parse_month("2023-13"), None);
        assert_eq!(PeriodSplit::Midpoint.boundary(0, 10), 5);
    }

    fn cohort_from(values: &[(f64, f64)]) -> Cohort {
        // 10 games per period with `round(v * 10)` wins.
        values
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| {
                let mut outcomes = Vec::new();
                for (period, v) in [(0i64, a), (1, b)] {
                    let wins = (v * 10.0).round() as usize;
                    for g in 0..10 {
                        outcomes.push(Outcome {
                            won: g < wins,
                            value_delta: 0.0,
                            voluntary_entry: None,
                            timestamp: period * 1000 + g as i64,
                            game_id: format!("g{period}{g}"),
                            deal_number: Some(1),
                        });
                    }
                }
                let user = format!("u{i:03}");
                (user.clone(), PlayerTimeline::new(user, Game::Rummy, 2, outcomes))
            })
            .collect()
    }

    #[test]
    fn copied_periods_correlate_perfectly() {
        let values: Vec<(f64, f64)> = (0..20).map(|i| f64::from(i % 11) / 10.0).map(|v| (v, v)).collect();
        let cohort = cohort_from(&values);
        let res = persistence_test(
            &cohort,
            PeriodSplit::At { millis: 1000 },
            MetricKind::WinRate,
            10,
            None,
            BootstrapSettings { resamples: 200, seed: 1 },
        )
        .unwrap();
        assert!((res.r - 1.0).abs() < 1e-12);
        assert_eq!(res.n_players, 20);
        assert!(res.bootstrap_ci95.0 <= res.r && res.r <= res.bootstrap_ci95.1);
    }

    #[test]
    fn too_few_qualifying_players() {
        let cohort = cohort_from(&[(0.1, 0.2), (0.3, 0.4), (0.5, 0.7)]);
        let err = persistence_test(
            &cohort,
            PeriodSplit::At { millis: 1000 },
            MetricKind::WinRate,
            11,
            None,
            BootstrapSettings::default(),
        )
        .unwrap_err();
        assert_eq!(err, StatError::InsufficientPlayers { found: 0, required: 3 });
    }

    #[test]
    fn bootstrap_is_reproducible() {
        let xs: Vec<f64> = (0..50).map(|i| f64::from(i).sin()).collect();
        let ys: Vec<f64> = (0..50).map(|i| f64::from(i).sin() + f64::from(i % 7) * 0.1).collect();
        let s = BootstrapSettings { resamples: 300, seed: 9 };
        let a = bootstrap_ci(&xs, &ys, s).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| bootstrap_ci(&xs, &ys, s).unwrap());
        assert_eq!(a, b);
        assert!(a.0 < a.1);
    }

    proptest! {
        #[test]
        fn affine_invariance(
            xs in prop::collection::vec(-100.0f64..100.0, 3..60),
            noise in prop::collection::vec(-100.0f64..100.0, 60),
            scale in 0.01f64..100.0,
            shift in -1e3f64..1e3,
        ) {
            let ys: Vec<f64> = xs.iter().zip(&noise).map(|(x, n)| x + n).collect();
            if let Ok(r) = pearson(&xs, &ys) {
                let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
                prop_assert!((pearson(&moved, &ys).unwrap() - r).abs() < 1e-12);
                prop_assert!((oracle_pearson(&xs, &ys) - r).abs() < 1e-9);
            }
        }
    }
}
