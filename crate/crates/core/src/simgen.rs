//! Synthetic poker and rummy logs with planted ground truth.
//!
//! Play proceeds in lock-step rounds. Each round the active players (those
//! below their target game count) are shuffled and dealt into tables of
//! `table_size`; leftovers sit the round out. Every table has exactly one
//! winner, drawn with weight 1 (chance) or `exp(s_i(n))` (skill), where
//! `s_i(n) = s_i + Δ(n)` and `Δ` follows the configured learning curve.
//!
//! Seeding, tables and outcomes each use their own derived stream, so output
//! bytes depend on the config alone and not on thread count.


use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{GameLog, IngestError};
use crate::model::{
    Game, Millis, PokerGameType, PokerHandRecord, PokerVariant, RummyDealRecord, RummyGameType, STANDARD_TABLE_SIZES,
};
use crate::numeric::mean;
use crate::rng::{self, StreamRng};
use crate::stattests::CurveModel;

/// 2022-12-01T00:00:00Z.
pub const SIM_EPOCH: Millis = 1_669_852_800_000;
/// Simulated calendar span for `games_per_player` rounds.
pub const SIM_SPAN: Millis = 62 * 86_400_000;

const POKER_STAKES: [f64; 4] = [1.0, 2.0, 5.0, 10.0];
const RUMMY_POINT_VALUES: [f64; 4] = [0.1, 0.25, 0.5, 1.0];
/// Voluntary contribution range in big blinds, on top of any blind.
const VOLUNTARY_BB: std::ops::RangeInclusive<u32> = 2..=8;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: &'static str, reason: String },
    #[error(transparent)]
    Write(#[from] IngestError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> SimError {
    SimError::ConfigInvalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    #[default]
    Chance,
    Skill,
}

/// Learning increment `Δ(n)` after `n` games.
///
/// Power: `B·(1 − (n+1)^−α)`; exponential: `B·(1 − e^(−α·n))`. Both start at
/// 0 and saturate at `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningSpec {
    pub curve: CurveModel,
    pub b: f64,
    pub alpha: f64,
}

impl Default for LearningSpec {
    fn default() -> Self {
        Self {
            curve: CurveModel::Power,
            b: 0.5,
            alpha: 0.5,
        }
    }
}

impl LearningSpec {
    pub fn flat() -> Self {
        Self { b: 0.0, ..Self::default() }
    }

    /// Fraction of the eventual improvement reached after `n` games.
    pub fn progress(&self, n: u32) -> f64 {
        let n = f64::from(n);
        match self.curve {
            CurveModel::Power => 1.0 - (n + 1.0).powf(-self.alpha),
            CurveModel::Exponential => 1.0 - (-self.alpha * n).exp(),
        }
    }

    pub fn delta(&self, n: u32) -> f64 {
        self.b * self.progress(n)
    }
}

/// Loser voluntary-entry probability, moving from `start` to `end` along
/// the learning curve's progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VpipSchedule {
    pub start: f64,
    pub end: f64,
}

impl Default for VpipSchedule {
    fn default() -> Self {
        Self { start: 0.5, end: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub game: Game,
    pub table_size: u32,
    pub n_players: usize,
    /// Target games per player; also the number of rounds spread over the
    /// simulated two months.
    pub games_per_player: u32,
    /// When set, each player's target is uniform in
    /// `[min_games_per_player, games_per_player]`.
    pub min_games_per_player: Option<u32>,
    pub mode: SimMode,
    pub skill_sd: f64,
    pub learning: LearningSpec,
    pub points_mu: f64,
    pub points_sd: f64,
    /// Loss points shed per unit of effective skill.
    pub points_skill_coef: f64,
    pub points_min: u32,
    pub points_max: u32,
    pub vpip_schedule: VpipSchedule,
    pub seed: u64,
    /// Replaces the drawn base skills (skill mode only).
    pub planted_skills: Option<Vec<f64>>,
    /// Monte Carlo tables per player for expected win rates when no closed
    /// form applies.
    pub truth_samples: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            game: Game::Poker,
            table_size: 2,
            n_players: 1000,
            games_per_player: 100,
            min_games_per_player: None,
            mode: SimMode::Chance,
            skill_sd: 0.8,
            learning: LearningSpec::default(),
            points_mu: 40.0,
            points_sd: 10.0,
            points_skill_coef: 10.0,
            points_min: 2,
            points_max: 80,
            vpip_schedule: VpipSchedule::default(),
            seed: 0,
            planted_skills: None,
            truth_samples: 4096,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !STANDARD_TABLE_SIZES.contains(&self.table_size) {
            return Err(invalid("table_size", format!("must be one of 2, 3, 6; got {}", self.table_size)));
        }
        if self.n_players < self.table_size as usize {
            return Err(invalid("n_players", "fewer players than seats at one table"));
        }
        if self.games_per_player == 0 {
            return Err(invalid("games_per_player", "must be positive"));
        }
        if let Some(min) = self.min_games_per_player {
            if min == 0 || min > self.games_per_player {
                return Err(invalid("min_games_per_player", "must be in 1..=games_per_player"));
            }
        }
        if !(self.skill_sd.is_finite() && self.skill_sd >= 0.0) {
            return Err(invalid("skill_sd", "must be finite and >= 0"));
        }
        let l = &self.learning;
        if !l.b.is_finite() {
            return Err(invalid("learning.b", "must be finite"));
        }
        if !(l.alpha.is_finite() && l.alpha > 0.0) {
            return Err(invalid("learning.alpha", "must be finite and > 0"));
        }
        if !self.points_mu.is_finite() {
            return Err(invalid("points_mu", "must be finite"));
        }
        if !(self.points_sd.is_finite() && self.points_sd >= 0.0) {
            return Err(invalid("points_sd", "must be finite and >= 0"));
        }
        if !self.points_skill_coef.is_finite() {
            return Err(invalid("points_skill_coef", "must be finite"));
        }
        if self.points_min == 0 || self.points_min > self.points_max {
            return Err(invalid("points_min", "must be in 1..=points_max"));
        }
        for (field, v) in [("vpip_schedule.start", self.vpip_schedule.start), ("vpip_schedule.end", self.vpip_schedule.end)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(field, "must be in [0, 1]"));
            }
        }
        if let Some(skills) = &self.planted_skills {
            if skills.len() != self.n_players {
                return Err(invalid(
                    "planted_skills",
                    format!("expected {} values, got {}", self.n_players, skills.len()),
                ));
            }
            if skills.iter().any(|s| !s.is_finite()) {
                return Err(invalid("planted_skills", "values must be finite"));
            }
        }
        if self.truth_samples == 0 {
            return Err(invalid("truth_samples", "must be positive"));
        }
        Ok(())
    }

    /// The config actually simulated: chance mode zeroes skills and learning
    /// and holds vpip at its start value.
    pub fn effective(&self) -> SimConfig {
        let mut c = self.clone();
        if c.mode == SimMode::Chance {
            c.skill_sd = 0.0;
            c.learning = LearningSpec::flat();
            c.vpip_schedule.end = c.vpip_schedule.start;
            c.planted_skills = None;
        }
        c
    }

    fn vpip(&self, n: u32) -> f64 {
        let VpipSchedule { start, end } = self.vpip_schedule;
        start + (end - start) * self.learning.progress(n)
    }

    fn round_step(&self) -> Millis {
        (SIM_SPAN / Millis::from(self.games_per_player)).max(1)
    }
}

/// Heads-up probability that skill `a` beats skill `b`.
pub fn heads_up_win_probability(a: f64, b: f64) -> f64 {
    1.0 / (1.0 + (b - a).exp())
}

pub fn user_id(index: usize) -> String {
    format!("p{index:06}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTruth {
    pub user_id: String,
    /// Base skill `s_i`.
    pub skill: f64,
    pub target_games: u32,
    /// Long-run win rate under uniform seating against the rest of the
    /// pool, from base skills (learning shifts all players equally).
    pub expected_win_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMethod {
    Uniform,
    PairwiseExact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SimConfig,
    pub learning: LearningSpec,
    pub expectation_method: ExpectationMethod,
    pub mean_expected_win_rate: f64,
    pub players: Vec<PlayerTruth>,
}

impl GroundTruth {
    pub fn effective_skill(&self, player: usize, games_played: u32) -> f64 {
        self.players[player].skill + self.learning.delta(games_played)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ground truth serializes")
    }
}

fn base_skills(c: &SimConfig) -> Vec<f64> {
    if c.mode == SimMode::Chance {
        return vec![0.0; c.n_players];
    }
    if let Some(s) = &c.planted_skills {
        return s.clone();
    }
    let normal = Normal::new(0.0, c.skill_sd).expect("validated sd");
    let mut r = rng::stream(c.seed, "skill", 0);
    (0..c.n_players).map(|_| normal.sample(&mut r)).collect()
}

fn targets(c: &SimConfig) -> Vec<u32> {
    match c.min_games_per_player {
        None => vec![c.games_per_player; c.n_players],
        Some(min) => {
            let mut r = rng::stream(c.seed, "target", 0);
            (0..c.n_players).map(|_| r.random_range(min..=c.games_per_player)).collect()
        }
    }
}

fn expected_win_rates(c: &SimConfig, skills: &[f64]) -> (ExpectationMethod, Vec<f64>) {
    let k = c.table_size as usize;
    let n = skills.len();
    if c.mode == SimMode::Chance {
        return (ExpectationMethod::Uniform, vec![1.0 / k as f64; n]);
    }
    if k == 2 && n <= 20_000 {
        let rates = (0..n)
            .into_par_iter()
            .map(|i| {
                let probs: Vec<f64> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| heads_up_win_probability(skills[i], skills[j]))
                    .collect();
                mean(&probs).unwrap_or(0.5)
            })
            .collect();
        return (ExpectationMethod::PairwiseExact, rates);
    }
    let samples = c.truth_samples;
    let rates = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(c.seed, "truth", i as u64);
            let probs: Vec<f64> = (0..samples)
                .map(|_| {
                    let mut total = 1.0;
                    let mut drawn = 0;
                    let mut seen = Vec::with_capacity(k - 1);
                    while drawn < k - 1 {
                        let j = r.random_range(0..n);
                        if j == i || seen.contains(&j) {
                            continue;
                        }
                        seen.push(j);
                        total += (skills[j] - skills[i]).exp();
                        drawn += 1;
                    }
                    1.0 / total
                })
                .collect();
            mean(&probs).unwrap_or(0.0)
        })
        .collect();
    (ExpectationMethod::MonteCarlo, rates)
}

/// Planted parameters of `config`, without running the simulation.
pub fn ground_truth(config: &SimConfig) -> Result<GroundTruth, SimError> {
    config.validate()?;
    let c = config.effective();
    let skills = base_skills(&c);
    let targets = targets(&c);
    let (method, rates) = expected_win_rates(&c, &skills);
    let players = skills
        .iter()
        .zip(&targets)
        .zip(&rates)
        .enumerate()
        .map(|(i, ((&skill, &target_games), &expected_win_rate))| PlayerTruth {
            user_id: user_id(i),
            skill,
            target_games,
            expected_win_rate,
        })
        .collect();
    Ok(GroundTruth {
        learning: c.learning,
        expectation_method: method,
        mean_expected_win_rate: mean(&rates).unwrap_or(0.0),
        players,
        config: c,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub log: GameLog,
    pub truth: GroundTruth,
    /// Games actually played per player; can fall short of the target when
    /// too few players remain active to fill a table.
    pub games_played: Vec<u32>,
    pub rounds: u32,
}

struct Table {
    game_id: String,
    start: Millis,
    seats: Vec<usize>,
}

enum TableRows {
    Poker(Vec<PokerHandRecord>),
    Rummy(Vec<RummyDealRecord>),
}

/// Runs the simulation. Deterministic in `config`.
pub fn simulate(config: &SimConfig) -> Result<SimOutput, SimError> {
    let truth = ground_truth(config)?;
    let c = &truth.config;
    let k = c.table_size as usize;
    let skills: Vec<f64> = truth.players.iter().map(|p| p.skill).collect();
    let targets: Vec<u32> = truth.players.iter().map(|p| p.target_games).collect();
    let ids: Vec<String> = (0..c.n_players).map(user_id).collect();
    let step = c.round_step();

    let mut played = vec![0u32; c.n_players];
    let mut poker = Vec::new();
    let mut rummy = Vec::new();
    let mut round = 0u32;
    loop {
        let mut active: Vec<usize> = (0..c.n_players).filter(|&i| played[i] < targets[i]).collect();
        if active.len() < k {
            break;
        }
        active.shuffle(&mut rng::stream(c.seed, "seating", u64::from(round)));
        let start = SIM_EPOCH + Millis::from(round) * step;
        let tables: Vec<Table> = active
            .chunks_exact(k)
            .enumerate()
            .map(|(t, seats)| Table {
                game_id: format!("g{round:06}-{t:05}"),
                start,
                seats: seats.to_vec(),
            })
            .collect();
        let rows: Vec<TableRows> = tables
            .par_iter()
            .enumerate()
            .map(|(t, table)| {
                let mut r = rng::stream(c.seed, "table", (u64::from(round) << 24) | t as u64);
                match c.game {
                    Game::Poker => TableRows::Poker(poker_hand(c, table, &skills, &played, &ids, step, &mut r)),
                    Game::Rummy => TableRows::Rummy(rummy_deal(c, table, &skills, &played, &ids, step, &mut r)),
                }
            })
            .collect();
        for table in &tables {
            for &p in &table.seats {
                played[p] += 1;
            }
        }
        for batch in rows {
            match batch {
                TableRows::Poker(v) => poker.extend(v),
                TableRows::Rummy(v) => rummy.extend(v),
            }
        }
        round += 1;
    }
    let log = match c.game {
        Game::Poker => GameLog::Poker(poker),
        Game::Rummy => GameLog::Rummy(rummy),
    };
    Ok(SimOutput {
        log,
        truth,
        games_played: played,
        rounds: round,
    })
}

/// Convenience form: CSV bytes plus ground truth.
pub fn simulate_log(config: &SimConfig) -> Result<(Vec<u8>, GroundTruth), SimError> {
    let out = simulate(config)?;
    Ok((out.log.to_csv_bytes(), out.truth))
}

/// Seat index of the winner: weight 1 each in chance mode, `exp(s(n))` in
/// skill mode. One uniform draw either way.
fn draw_winner(c: &SimConfig, table: &Table, skills: &[f64], played: &[u32], r: &mut StreamRng) -> usize {
    let eff: Vec<f64> = table
        .seats
        .iter()
        .map(|&p| skills[p] + c.learning.delta(played[p]))
        .collect();
    let top = eff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = eff.iter().map(|s| (s - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = r.random::<f64>() * total;
    for (seat, w) in weights.iter().enumerate() {
        if u < *w {
            return seat;
        }
        u -= w;
    }
    weights.len() - 1
}

fn poker_hand(
    c: &SimConfig,
    table: &Table,
    skills: &[f64],
    played: &[u32],
    ids: &[String],
    step: Millis,
    r: &mut StreamRng,
) -> Vec<PokerHandRecord> {
    let k = table.seats.len();
    let bb = POKER_STAKES[r.random_range(0..POKER_STAKES.len())];
    let winner = draw_winner(c, table, skills, played, r);
    // Seats are already in random order: seat 0 posts the small blind,
    // seat 1 the big blind.
    let mut placed = vec![0.0f64; k];
    let mut voluntary = vec![false; k];
    placed[0] = 0.5;
    placed[1] = 1.0;
    for seat in 0..k {
        let enters = seat == winner || r.random::<f64>() < c.vpip(played[table.seats[seat]]);
        if enters {
            voluntary[seat] = true;
            placed[seat] += f64::from(r.random_range(VOLUNTARY_BB));
        }
    }
    let pot: f64 = placed.iter().sum();
    let end = table.start + (step / 2).max(1);
    (0..k)
        .map(|seat| PokerHandRecord {
            user_id: ids[table.seats[seat]].clone(),
            game_id: table.game_id.clone(),
            game_type: PokerGameType::Ring,
            game_variant: PokerVariant::TexasHoldem,
            big_blind: bb,
            chips_placed: placed[seat] * bb,
            chips_won: if seat == winner { pot * bb } else { 0.0 },
            num_players: k as u32,
            max_players: k as u32,
            min_players: 2,
            voluntary_entry: voluntary[seat],
            game_start: table.start,
            game_end: end,
        })
        .collect()
}

fn rummy_deal(
    c: &SimConfig,
    table: &Table,
    skills: &[f64],
    played: &[u32],
    ids: &[String],
    step: Millis,
    r: &mut StreamRng,
) -> Vec<RummyDealRecord> {
    let k = table.seats.len();
    let value = RUMMY_POINT_VALUES[r.random_range(0..RUMMY_POINT_VALUES.len())];
    let winner = draw_winner(c, table, skills, played, r);
    let loss: Vec<u32> = (0..k)
        .map(|seat| {
            let p = table.seats[seat];
            let s = skills[p] + c.learning.delta(played[p]);
            let mu = c.points_mu - c.points_skill_coef * s;
            let drawn = Normal::new(mu, c.points_sd).expect("validated").sample(r).round();
            if seat == winner {
                0
            } else {
                drawn.clamp(f64::from(c.points_min), f64::from(c.points_max)) as u32
            }
        })
        .collect();
    let winner_points: u32 = loss.iter().sum();
    let end = table.start + (step / 2).max(1);
    let deal_id = format!("{}-1", table.game_id);
    let buy_in = cents(f64::from(c.points_max) * value);
    (0..k)
        .map(|seat| {
            let won = seat == winner;
            RummyDealRecord {
                user_id: ids[table.seats[seat]].clone(),
                game_id: table.game_id.clone(),
                game_type: RummyGameType::Points,
                game_variant: value,
                max_players: k as u32,
                actual_players: k as u32,
                game_start: table.start,
                game_end: end,
                deal_start: table.start,
                deal_end: end,
                buy_in,
                win_amt: if won { cents(f64::from(winner_points) * value) } else { 0.0 },
                deal_id: deal_id.clone(),
                deal_number: 1,
                is_winner: won,
                winner_points: if won { winner_points } else { 0 },
                loss_points: loss[seat],
            }
        })
        .collect()
}

fn cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn small(game: Game, mode: SimMode) -> SimConfig {
        SimConfig {
            game,
            mode,
            n_players: 60,
            games_per_player: 20,
            seed: 11,
            truth_samples: 64,
            ..SimConfig::default()
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = |f: fn(&mut SimConfig)| {
            let mut c = SimConfig::default();
            f(&mut c);
            match c.validate() {
                Err(SimError::ConfigInvalid { field, .. }) => field,
                other => panic!("{other:?}"),
            }
        };
        assert_eq!(bad(|c| c.table_size = 4), "table_size");
        assert_eq!(bad(|c| c.n_players = 1), "n_players");
        assert_eq!(bad(|c| c.skill_sd = -1.0), "skill_sd");
        assert_eq!(bad(|c| c.vpip_schedule.end = 1.5), "vpip_schedule.end");
        assert_eq!(bad(|c| c.min_games_per_player = Some(500)), "min_games_per_player");
        assert_eq!(bad(|c| c.planted_skills = Some(vec![0.0])), "planted_skills");
        assert_eq!(bad(|c| c.learning.alpha = 0.0), "learning.alpha");
    }

    #[test]
    fn learning_increment() {
        let p = LearningSpec { curve: CurveModel::Power, b: 2.0, alpha: 1.0 };
        assert_eq!(p.delta(0), 0.0);
        assert!((p.delta(1) - 1.0).abs() < 1e-15);
        let e = LearningSpec { curve: CurveModel::Exponential, b: 2.0, alpha: 0.5 };
        assert_eq!(e.delta(0), 0.0);
        assert!((e.delta(2) - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert_eq!(LearningSpec::flat().delta(50), 0.0);
    }

    #[test]
    fn heads_up_closed_form() {
        assert!((heads_up_win_probability(0.8, 0.0) - 0.689_974_481_127_612_8).abs() < 1e-15);
        assert_eq!(heads_up_win_probability(0.3, 0.3), 0.5);
    }

    #[test]
    fn chance_truth_is_uniform() {
        let mut c = small(Game::Rummy, SimMode::Chance);
        c.table_size = 6;
        let t = ground_truth(&c).unwrap();
        assert_eq!(t.expectation_method, ExpectationMethod::Uniform);
        assert!(t.players.iter().all(|p| p.expected_win_rate == 1.0 / 6.0 && p.skill == 0.0));
        assert_eq!(t.config.learning.b, 0.0);
    }

    #[test]
    fn skill_truth_pairwise() {
        let mut c = small(Game::Poker, SimMode::Skill);
        c.n_players = 3;
        c.planted_skills = Some(vec![0.8, 0.0, -0.4]);
        let t = ground_truth(&c).unwrap();
        let want = (heads_up_win_probability(0.8, 0.0) + heads_up_win_probability(0.8, -0.4)) / 2.0;
        assert!((t.players[0].expected_win_rate - want).abs() < 1e-15);
        assert!((t.mean_expected_win_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_truth_sums_to_one_per_table_on_average() {
        let mut c = small(Game::Poker, SimMode::Skill);
        c.table_size = 3;
        c.truth_samples = 4000;
        let t = ground_truth(&c).unwrap();
        assert_eq!(t.expectation_method, ExpectationMethod::MonteCarlo);
        assert!((t.mean_expected_win_rate - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn deterministic() {
        for game in [Game::Poker, Game::Rummy] {
            let c = small(game, SimMode::Skill);
            let a = simulate_log(&c).unwrap();
            let b = simulate_log(&c).unwrap();
            assert_eq!(a, b);
            let other = simulate_log(&SimConfig { seed: 12, ..c }).unwrap();
            assert_ne!(a.0, other.0);
        }
    }

    #[test]
    fn skill_without_spread_or_learning_equals_chance() {
        for game in [Game::Poker, Game::Rummy] {
            let chance = small(game, SimMode::Chance);
            let mut skill = chance.clone();
            skill.mode = SimMode::Skill;
            skill.skill_sd = 0.0;
            skill.learning.b = 0.0;
            skill.vpip_schedule.end = skill.vpip_schedule.start;
            assert_eq!(simulate_log(&chance).unwrap().0, simulate_log(&skill).unwrap().0);
        }
    }

    #[test]
    fn one_winner_per_table_and_poker_conservation() {
        let mut c = small(Game::Poker, SimMode::Skill);
        c.table_size = 6;
        let out = simulate(&c).unwrap();
        let GameLog::Poker(rows) = &out.log else { panic!() };
        let mut by_game: BTreeMap<&str, Vec<&PokerHandRecord>> = BTreeMap::new();
        for r in rows {
            by_game.entry(&r.game_id).or_default().push(r);
        }
        for hand in by_game.values() {
            assert_eq!(hand.len(), 6);
            assert_eq!(hand.iter().filter(|r| r.chips_won > 0.0).count(), 1);
            let net: f64 = hand.iter().map(|r| r.value_delta_bb()).sum();
            assert_eq!(net, 0.0);
        }
    }

    #[test]
    fn rummy_points_respect_clamp() {
        let mut c = small(Game::Rummy, SimMode::Skill);
        c.table_size = 3;
        c.points_sd = 60.0;
        let out = simulate(&c).unwrap();
        let GameLog::Rummy(rows) = &out.log else { panic!() };
        let mut winners: BTreeMap<&str, usize> = BTreeMap::new();
        for r in rows {
            if r.is_winner {
                *winners.entry(&r.game_id).or_default() += 1;
                assert_eq!(r.loss_points, 0);
            } else {
                assert!((2..=80).contains(&r.loss_points));
                assert_eq!(r.winner_points, 0);
            }
        }
        assert!(winners.values().all(|&n| n == 1));
        assert_eq!(winners.len(), rows.len() / 3);
    }

    #[test]
    fn targets_and_sit_outs() {
        let mut c = small(Game::Poker, SimMode::Chance);
        c.n_players = 61;
        c.min_games_per_player = Some(5);
        let out = simulate(&c).unwrap();
        for (p, &n) in out.truth.players.iter().zip(&out.games_played) {
            assert!((5..=20).contains(&p.target_games));
            assert!(n <= p.target_games);
        }
        assert!(out.rounds >= 20);
    }

    #[test]
    fn rounds_span_two_months() {
        let c = small(Game::Poker, SimMode::Chance);
        let out = simulate(&c).unwrap();
        let GameLog::Poker(rows) = &out.log else { panic!() };
        let last = rows.iter().map(|r| r.game_start).max().unwrap();
        assert_eq!(rows[0].game_start, SIM_EPOCH);
        assert_eq!(last, SIM_EPOCH + 19 * (SIM_SPAN / 20));
    }
}
