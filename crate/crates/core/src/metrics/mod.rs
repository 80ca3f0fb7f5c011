//! Skill variables and the derived statistics computed from timelines.
//!
//! Poker values are in big blinds; rummy values are in points. All cohort
//! aggregates use [`crate::numeric::exact_sum`], so their results do not
//! depend on iteration order.

mod normal;

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Cohort, Granularity};
use crate::model::{Game, Outcome, PlayerTimeline, RummyDealRecord};
use crate::numeric::{exact_sum, mean, sample_sd};

pub use normal::{standard_normal_cdf, theoretical_quantile};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("timeline is empty")]
    EmptyTimeline,
    #[error("metric requires a poker timeline")]
    NotPoker,
    #[error("metric requires a rummy timeline")]
    NotRummy,
    #[error("bin width must be at least 1")]
    InvalidBinWidth,
    #[error("window contains no outcomes")]
    EmptyWindow,
    #[error("window {start}..{end} exceeds timeline length {len}")]
    WindowOutOfBounds { start: usize, end: usize, len: usize },
    #[error("voluntary-entry flag missing from outcomes")]
    MissingVoluntaryEntry,
    #[error("no losing deals in window")]
    NoLosingDeals,
    #[error("no winning deals in window")]
    NoWinningDeals,
    #[error("opponent losses unavailable for this player's wins")]
    OpponentsUnavailable,
    #[error("rank {rank} outside 1..={n}")]
    OutOfRange { rank: f64, n: usize },
    #[error("probability {0} outside (0, 1)")]
    DomainError(f64),
    #[error("standard deviation must be positive, got {0}")]
    ZeroSd(f64),
}

/// Skill variables that can be tracked as a series or compared across periods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    WinProbability,
    AvgBlindWon,
    AvgBlindLost,
    Tightness,
    WinRate,
    AvgPointsLostLosing,
    AvgPointsLostByOpponent,
    #[serde(rename = "bb_per_100")]
    BbPer100,
}

/// Direction in which a metric counts as better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherIsBetter,
    LowerIsBetter,
}

impl MetricKind {
    pub const ALL: [MetricKind; 8] = [
        MetricKind::WinProbability,
        MetricKind::AvgBlindWon,
        MetricKind::AvgBlindLost,
        MetricKind::Tightness,
        MetricKind::WinRate,
        MetricKind::AvgPointsLostLosing,
        MetricKind::AvgPointsLostByOpponent,
        MetricKind::BbPer100,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::WinProbability => "win_probability",
            MetricKind::AvgBlindWon => "avg_blind_won",
            MetricKind::AvgBlindLost => "avg_blind_lost",
            MetricKind::Tightness => "tightness",
            MetricKind::WinRate => "win_rate",
            MetricKind::AvgPointsLostLosing => "avg_points_lost_losing",
            MetricKind::AvgPointsLostByOpponent => "avg_points_lost_by_opponent",
            MetricKind::BbPer100 => "bb_per_100",
        }
    }

    pub fn polarity(self) -> Polarity {
        match self {
            MetricKind::AvgBlindLost | MetricKind::AvgPointsLostLosing => Polarity::LowerIsBetter,
            _ => Polarity::HigherIsBetter,
        }
    }

    /// The game a metric is restricted to, if any.
    pub fn game(self) -> Option<Game> {
        match self {
            MetricKind::AvgBlindWon
            | MetricKind::AvgBlindLost
            | MetricKind::Tightness
            | MetricKind::BbPer100 => Some(Game::Poker),
            MetricKind::AvgPointsLostLosing | MetricKind::AvgPointsLostByOpponent => Some(Game::Rummy),
            MetricKind::WinProbability | MetricKind::WinRate => None,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('-', "_");
        MetricKind::ALL
            .into_iter()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlayerScope {
    Player(String),
    Cohort,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub x: f64,
    pub y: f64,
}

/// A metric trajectory; `x` strictly increasing, `y` finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillSeries {
    pub metric: MetricKind,
    pub scope: PlayerScope,
    pub points: Vec<SeriesPoint>,
}

impl SkillSeries {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.y).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub rank: f64,
    pub percentile: f64,
    pub theoretical_q: f64,
    pub observed_q: f64,
}

fn window(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<&[Outcome], MetricError> {
    let all = tl.outcomes();
    let range = range.unwrap_or(0..all.len());
    if range.end > all.len() || range.start > range.end {
        return Err(MetricError::WindowOutOfBounds {
            start: range.start,
            end: range.end,
            len: all.len(),
        });
    }
    let slice = &all[range];
    if slice.is_empty() {
        return Err(MetricError::EmptyWindow);
    }
    Ok(slice)
}

fn require(tl: &PlayerTimeline, game: Game) -> Result<(), MetricError> {
    match (tl.game(), game) {
        (g, want) if g == want => Ok(()),
        (_, Game::Poker) => Err(MetricError::NotPoker),
        (_, Game::Rummy) => Err(MetricError::NotRummy),
    }
}

/// Cumulative win probability after each of the player's games.
pub fn win_probability_series(tl: &PlayerTimeline) -> Result<SkillSeries, MetricError> {
    if tl.is_empty() {
        return Err(MetricError::EmptyTimeline);
    }
    let mut wins = 0usize;
    let points = tl
        .outcomes()
        .iter()
        .enumerate()
        .map(|(i, o)| {
            wins += usize::from(o.won);
            let k = i + 1;
            SeriesPoint {
                x: k as f64,
                y: wins as f64 / k as f64,
            }
        })
        .collect();
    Ok(SkillSeries {
        metric: MetricKind::WinProbability,
        scope: PlayerScope::Player(tl.user_id().to_string()),
        points,
    })
}

/// Which side of the ledger [`avg_blind_amount`] averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Won,
    Lost,
}

fn avg_amount(outcomes: &[Outcome], side: Side) -> Option<f64> {
    let values: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.won == (side == Side::Won))
        .map(|o| o.value_delta.abs())
        .collect();
    mean(&values)
}

/// Mean big blinds won (over won hands) or lost (over lost hands) per bin of
/// `bin_width` consecutive hands. Bins with no qualifying hand are gaps.
pub fn avg_blind_amount(tl: &PlayerTimeline, side: Side, bin_width: usize) -> Result<SkillSeries, MetricError> {
    require(tl, Game::Poker)?;
    if bin_width == 0 {
        return Err(MetricError::InvalidBinWidth);
    }
    let points = tl
        .outcomes()
        .chunks(bin_width)
        .enumerate()
        .filter_map(|(i, bin)| {
            avg_amount(bin, side).map(|y| SeriesPoint {
                x: (i + 1) as f64,
                y,
            })
        })
        .collect();
    Ok(SkillSeries {
        metric: match side {
            Side::Won => MetricKind::AvgBlindWon,
            Side::Lost => MetricKind::AvgBlindLost,
        },
        scope: PlayerScope::Player(tl.user_id().to_string()),
        points,
    })
}

/// Big blinds won per 100 hands over the window.
pub fn bb_per_100(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<f64, MetricError> {
    require(tl, Game::Poker)?;
    let hands = window(tl, range)?;
    Ok(100.0 * exact_sum(hands.iter().map(|o| o.value_delta)) / hands.len() as f64)
}

/// Fraction of hands with a voluntary pre-flop entry.
pub fn vpip(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<f64, MetricError> {
    require(tl, Game::Poker)?;
    let hands = window(tl, range)?;
    let mut entered = 0usize;
    for o in hands {
        match o.voluntary_entry {
            Some(true) => entered += 1,
            Some(false) => {}
            None => return Err(MetricError::MissingVoluntaryEntry),
        }
    }
    Ok(entered as f64 / hands.len() as f64)
}

/// `1 − VPIP`.
pub fn tightness(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<f64, MetricError> {
    vpip(tl, range).map(|v| 1.0 - v)
}

pub fn win_rate(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<f64, MetricError> {
    let games = window(tl, range)?;
    Ok(games.iter().filter(|o| o.won).count() as f64 / games.len() as f64)
}

/// Mean points conceded over the player's losing deals.
pub fn avg_points_lost_losing(tl: &PlayerTimeline, range: Option<Range<usize>>) -> Result<f64, MetricError> {
    require(tl, Game::Rummy)?;
    let deals = window(tl, range)?;
    avg_amount(deals, Side::Lost).ok_or(MetricError::NoLosingDeals)
}

/// Game id plus deal number (absent at game granularity).
type DealKey = (String, Option<u32>);

/// Loss points of every participant in each deal (or game).
#[derive(Debug, Clone, Default)]
pub struct OpponentView {
    losses: HashMap<DealKey, Vec<(String, f64)>>,
}

impl OpponentView {
    /// Indexes loss points at the same granularity as the timelines.
    pub fn from_records(records: &[RummyDealRecord], granularity: Granularity) -> Self {
        let mut losses: HashMap<DealKey, Vec<(String, f64)>> = HashMap::new();
        for r in records {
            let deal = match granularity {
                Granularity::Record => Some(r.deal_number),
                Granularity::Game => None,
            };
            let entry = losses.entry((r.game_id.clone(), deal)).or_default();
            let points = f64::from(r.loss_points);
            match entry.iter_mut().find(|(u, _)| *u == r.user_id) {
                Some((_, total)) => *total += points,
                None => entry.push((r.user_id.clone(), points)),
            }
        }
        Self { losses }
    }

    /// Loss points of everyone except `user` in the given deal.
    pub fn opponents_of<'a>(
        &'a self,
        user: &'a str,
        game_id: &str,
        deal_number: Option<u32>,
    ) -> impl Iterator<Item = f64> + 'a {
        self.losses
            .get(&(game_id.to_string(), deal_number))
            .into_iter()
            .flatten()
            .filter(move |(u, _)| u != user)
            .map(|(_, p)| *p)
    }
}

/// Mean loss points conceded by opponents in the deals the player won.
pub fn avg_points_lost_by_opponent(
    tl: &PlayerTimeline,
    range: Option<Range<usize>>,
    view: &OpponentView,
) -> Result<f64, MetricError> {
    require(tl, Game::Rummy)?;
    let deals = window(tl, range)?;
    let won: Vec<&Outcome> = deals.iter().filter(|o| o.won).collect();
    if won.is_empty() {
        return Err(MetricError::NoWinningDeals);
    }
    let conceded: Vec<f64> = won
        .iter()
        .flat_map(|o| view.opponents_of(tl.user_id(), &o.game_id, o.deal_number))
        .collect();
    mean(&conceded).ok_or(MetricError::OpponentsUnavailable)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RummySkill {
    pub win_rate: f64,
    pub avg_points_lost_losing: f64,
    pub avg_points_lost_by_opponent: f64,
}

/// The three rummy skill variables over a whole timeline.
pub fn rummy_skill_variables(tl: &PlayerTimeline, view: &OpponentView) -> Result<RummySkill, MetricError> {
    require(tl, Game::Rummy)?;
    Ok(RummySkill {
        win_rate: win_rate(tl, None)?,
        avg_points_lost_losing: avg_points_lost_losing(tl, None)?,
        avg_points_lost_by_opponent: avg_points_lost_by_opponent(tl, None, view)?,
    })
}

/// Scalar value of `kind` over a window of one timeline.
pub fn metric_value(
    kind: MetricKind,
    tl: &PlayerTimeline,
    range: Option<Range<usize>>,
    view: Option<&OpponentView>,
) -> Result<f64, MetricError> {
    match kind {
        MetricKind::WinProbability | MetricKind::WinRate => win_rate(tl, range),
        MetricKind::AvgBlindWon | MetricKind::AvgBlindLost => {
            require(tl, Game::Poker)?;
            let side = if kind == MetricKind::AvgBlindWon { Side::Won } else { Side::Lost };
            avg_amount(window(tl, range)?, side).ok_or(MetricError::EmptyWindow)
        }
        MetricKind::Tightness => tightness(tl, range),
        MetricKind::BbPer100 => bb_per_100(tl, range),
        MetricKind::AvgPointsLostLosing => avg_points_lost_losing(tl, range),
        MetricKind::AvgPointsLostByOpponent => match view {
            Some(v) => avg_points_lost_by_opponent(tl, range, v),
            None => Err(MetricError::OpponentsUnavailable),
        },
    }
}

/// Ascending ranks 1..=n; tied values share the mean of their positions.
pub fn rank_average(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their midpoint.
        let shared = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = shared;
        }
        start = end;
    }
    ranks
}

/// `(rank − 0.5) / n`.
pub fn percentile_position(rank: f64, n: usize) -> Result<f64, MetricError> {
    if n == 0 || !(rank >= 1.0 && rank <= n as f64) {
        return Err(MetricError::OutOfRange { rank, n });
    }
    Ok((rank - 0.5) / n as f64)
}

/// `(x − mean) / sd`.
pub fn standardize(x: f64, mean: f64, sd: f64) -> Result<f64, MetricError> {
    if sd.is_nan() || sd <= 0.0 {
        return Err(MetricError::ZeroSd(sd));
    }
    Ok((x - mean) / sd)
}

/// Cohort mean and sample standard deviation of final win probabilities.
pub fn cohort_win_probability_stats(cohort: &Cohort) -> Option<(f64, f64)> {
    let values: Vec<f64> = cohort
        .values()
        .filter(|t| !t.is_empty())
        .map(|t| t.wins() as f64 / t.len() as f64)
        .collect();
    Some((mean(&values)?, sample_sd(&values)?))
}
