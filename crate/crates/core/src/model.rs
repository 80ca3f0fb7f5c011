//! Validated play records, per-player timelines and the timestamp codec.
//!
//! Raw rows arrive as text fields keyed by column name ([`FieldSource`]).
//! [`validate_poker_record`] and [`validate_rummy_record`] turn them into
//! records that satisfy every structural invariant, or return exactly one
//! [`RecordError`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::BuildHasher;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Milliseconds since the Unix epoch, UTC.
pub type Millis = i64;

/// Table sizes the analyses are defined for.
pub const STANDARD_TABLE_SIZES: [u32; 3] = [2, 3, 6];

/// A single structured validation failure.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail")]
pub enum RecordError {
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}` has unparseable value {text:?}")]
    TypeError { field: String, text: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("winner flag contradicts points: {0}")]
    WinnerContradiction(String),
    #[error("malformed row: {0}")]
    Malformed(String),
}

/// Read access to the text fields of one raw row.
pub trait FieldSource {
    fn field(&self, name: &str) -> Option<&str>;
}

impl<S: BuildHasher> FieldSource for HashMap<String, String, S> {
    fn field(&self, name: &str) -> Option<&str> {
        self.get(name).map(String::as_str)
    }
}

impl<S: BuildHasher> FieldSource for HashMap<&str, &str, S> {
    fn field(&self, name: &str) -> Option<&str> {
        self.get(name).copied()
    }
}

impl FieldSource for BTreeMap<String, String> {
    fn field(&self, name: &str) -> Option<&str> {
        self.get(name).map(String::as_str)
    }
}

impl FieldSource for [(&str, &str)] {
    fn field(&self, name: &str) -> Option<&str> {
        self.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }
}

/// Which game a record or timeline belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Game {
    Poker,
    Rummy,
}

impl fmt::Display for Game {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Game::Poker => "poker",
            Game::Rummy => "rummy",
        })
    }
}

impl FromStr for Game {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "poker" => Ok(Game::Poker),
            "rummy" => Ok(Game::Rummy),
            other => Err(format!("unknown game {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PokerGameType {
    Ring,
    Tournament,
}

impl PokerGameType {
    pub fn as_str(self) -> &'static str {
        match self {
            PokerGameType::Ring => "Ring",
            PokerGameType::Tournament => "Tournament",
        }
    }
}

impl FromStr for PokerGameType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ring" => Ok(PokerGameType::Ring),
            "tournament" => Ok(PokerGameType::Tournament),
            _ => Err(()),
        }
    }
}

/// Closed set of poker rule variants; anything else is a parse error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PokerVariant {
    TexasHoldem,
    Plo,
}

impl PokerVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            PokerVariant::TexasHoldem => "TexasHoldem",
            PokerVariant::Plo => "PLO",
        }
    }
}

impl FromStr for PokerVariant {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "texasholdem" | "holdem" | "nlhe" => Ok(PokerVariant::TexasHoldem),
            "plo" | "potlimitomaha" => Ok(PokerVariant::Plo),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RummyGameType {
    Points,
    Pool,
    Deal,
}

impl RummyGameType {
    pub fn as_str(self) -> &'static str {
        match self {
            RummyGameType::Points => "Points",
            RummyGameType::Pool => "Pool",
            RummyGameType::Deal => "Deal",
        }
    }
}

impl FromStr for RummyGameType {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "points" => Ok(RummyGameType::Points),
            "pool" => Ok(RummyGameType::Pool),
            "deal" => Ok(RummyGameType::Deal),
            _ => Err(()),
        }
    }
}

/// One player's participation in one poker hand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PokerHandRecord {
    pub user_id: String,
    pub game_id: String,
    pub game_type: PokerGameType,
    pub game_variant: PokerVariant,
    pub big_blind: f64,
    pub chips_placed: f64,
    pub chips_won: f64,
    pub num_players: u32,
    pub max_players: u32,
    pub min_players: u32,
    pub voluntary_entry: bool,
    pub game_start: Millis,
    pub game_end: Millis,
}

/// One player's participation in one rummy deal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RummyDealRecord {
    pub user_id: String,
    pub game_id: String,
    pub game_type: RummyGameType,
    /// Value per point (points rummy) or buy-in of the variant.
    pub game_variant: f64,
    pub max_players: u32,
    pub actual_players: u32,
    pub game_start: Millis,
    pub game_end: Millis,
    pub deal_start: Millis,
    pub deal_end: Millis,
    pub buy_in: f64,
    pub win_amt: f64,
    pub deal_id: String,
    pub deal_number: u32,
    pub is_winner: bool,
    pub winner_points: u32,
    pub loss_points: u32,
}

/// Column order of the poker log format.
pub const POKER_COLUMNS: [&str; 13] = [
    "user_id",
    "game_id",
    "game_type",
    "game_variant",
    "big_blind",
    "chips_placed",
    "chips_won",
    "num_players",
    "max_players",
    "min_players",
    "voluntary_entry",
    "game_start",
    "game_end",
];

/// Column order of the rummy log format.
pub const RUMMY_COLUMNS: [&str; 17] = [
    "user_id",
    "game_id",
    "game_type",
    "game_variant",
    "max_players",
    "actual_players",
    "game_start",
    "game_end",
    "deal_start",
    "deal_end",
    "buy_in",
    "win_amt",
    "deal_id",
    "deal_number",
    "is_winner",
    "winner_points",
    "loss_points",
];

/// Parses ISO-8601 text into UTC milliseconds.
///
/// Accepts RFC 3339 with any offset, naive `YYYY-MM-DD[T ]HH:MM:SS[.fff]`
/// (read as UTC) and bare dates.
pub fn parse_timestamp(text: &str) -> Option<Millis> {
    let t = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(t) {
        return Some(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(t, fmt) {
            return Some(naive.and_utc().timestamp_millis());
        }
    }
    NaiveDate::parse_from_str(t, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp_millis())
}

/// Canonical text form: RFC 3339, UTC, millisecond precision.
pub fn format_timestamp(ms: Millis) -> String {
    match Utc.timestamp_millis_opt(ms).single() {
        Some(dt) => dt.to_rfc3339_opts(SecondsFormat::Millis, true),
        None => ms.to_string(),
    }
}

fn required<'a, F: FieldSource + ?Sized>(raw: &'a F, name: &str) -> Result<&'a str, RecordError> {
    raw.field(name)
        .map(str::trim)
        .ok_or_else(|| RecordError::MissingField(name.to_string()))
}

fn type_error(field: &str, text: &str) -> RecordError {
    RecordError::TypeError {
        field: field.to_string(),
        text: text.to_string(),
    }
}

fn parse_with<T, F: FieldSource + ?Sized>(
    raw: &F,
    name: &str,
    parse: impl FnOnce(&str) -> Option<T>,
) -> Result<T, RecordError> {
    let text = required(raw, name)?;
    parse(text).ok_or_else(|| type_error(name, text))
}

fn id_field<F: FieldSource + ?Sized>(raw: &F, name: &str) -> Result<String, RecordError> {
    let text = required(raw, name)?;
    if text.is_empty() {
        return Err(type_error(name, text));
    }
    Ok(text.to_string())
}

fn amount(text: &str) -> Option<f64> {
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn flag(text: &str) -> Option<bool> {
    match text {
        "1" => Some(true),
        "0" => Some(false),
        t if t.eq_ignore_ascii_case("true") => Some(true),
        t if t.eq_ignore_ascii_case("false") => Some(false),
        _ => None,
    }
}

fn check(cond: bool, what: &str) -> Result<(), RecordError> {
    if cond {
        Ok(())
    } else {
        Err(RecordError::InvariantViolation(what.to_string()))
    }
}

/// Validates one raw poker row.
pub fn validate_poker_record<F: FieldSource + ?Sized>(
    raw: &F,
) -> Result<PokerHandRecord, RecordError> {
    let record = PokerHandRecord {
        user_id: id_field(raw, "user_id")?,
        game_id: id_field(raw, "game_id")?,
        game_type: parse_with(raw, "game_type", |t| t.parse().ok())?,
        game_variant: parse_with(raw, "game_variant", |t| t.parse().ok())?,
        big_blind: parse_with(raw, "big_blind", amount)?,
        chips_placed: parse_with(raw, "chips_placed", amount)?,
        chips_won: parse_with(raw, "chips_won", amount)?,
        num_players: parse_with(raw, "num_players", |t| t.parse().ok())?,
        max_players: parse_with(raw, "max_players", |t| t.parse().ok())?,
        min_players: parse_with(raw, "min_players", |t| t.parse().ok())?,
        voluntary_entry: parse_with(raw, "voluntary_entry", flag)?,
        game_start: parse_with(raw, "game_start", parse_timestamp)?,
        game_end: parse_with(raw, "game_end", parse_timestamp)?,
    };
    check(record.big_blind > 0.0, "big_blind > 0")?;
    check(record.chips_placed >= 0.0, "chips_placed >= 0")?;
    check(record.chips_won >= 0.0, "chips_won >= 0")?;
    check(record.min_players <= record.num_players, "min_players <= num_players")?;
    check(record.num_players <= record.max_players, "num_players <= max_players")?;
    check(record.game_start <= record.game_end, "game_start <= game_end")?;
    Ok(record)
}

/// Validates one raw rummy row.
pub fn validate_rummy_record<F: FieldSource + ?Sized>(
    raw: &F,
) -> Result<RummyDealRecord, RecordError> {
    let record = RummyDealRecord {
        user_id: id_field(raw, "user_id")?,
        game_id: id_field(raw, "game_id")?,
        game_type: parse_with(raw, "game_type", |t| t.parse().ok())?,
        game_variant: parse_with(raw, "game_variant", amount)?,
        max_players: parse_with(raw, "max_players", |t| t.parse().ok())?,
        actual_players: parse_with(raw, "actual_players", |t| t.parse().ok())?,
        game_start: parse_with(raw, "game_start", parse_timestamp)?,
        game_end: parse_with(raw, "game_end", parse_timestamp)?,
        deal_start: parse_with(raw, "deal_start", parse_timestamp)?,
        deal_end: parse_with(raw, "deal_end", parse_timestamp)?,
        buy_in: parse_with(raw, "buy_in", amount)?,
        win_amt: parse_with(raw, "win_amt", amount)?,
        deal_id: id_field(raw, "deal_id")?,
        deal_number: parse_with(raw, "deal_number", |t| t.parse().ok())?,
        is_winner: parse_with(raw, "is_winner", flag)?,
        winner_points: parse_with(raw, "winner_points", |t| t.parse().ok())?,
        loss_points: parse_with(raw, "loss_points", |t| t.parse().ok())?,
    };
    check(record.actual_players <= record.max_players, "actual_players <= max_players")?;
    check(record.deal_start <= record.deal_end, "deal_start <= deal_end")?;
    check(record.game_start <= record.game_end, "game_start <= game_end")?;
    check(record.deal_number >= 1, "deal_number >= 1")?;
    check(record.buy_in >= 0.0, "buy_in >= 0")?;
    check(record.win_amt >= 0.0, "win_amt >= 0")?;
    if record.is_winner && record.loss_points > 0 {
        return Err(RecordError::WinnerContradiction(format!(
            "is_winner = 1 but loss_points = {}",
            record.loss_points
        )));
    }
    if !record.is_winner && record.winner_points > 0 {
        return Err(RecordError::WinnerContradiction(format!(
            "is_winner = 0 but winner_points = {}",
            record.winner_points
        )));
    }
    Ok(record)
}

fn flag_text(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

impl PokerHandRecord {
    /// Fields in [`POKER_COLUMNS`] order, in canonical text form.
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.user_id.clone(),
            self.game_id.clone(),
            self.game_type.as_str().to_string(),
            self.game_variant.as_str().to_string(),
            self.big_blind.to_string(),
            self.chips_placed.to_string(),
            self.chips_won.to_string(),
            self.num_players.to_string(),
            self.max_players.to_string(),
            self.min_players.to_string(),
            flag_text(self.voluntary_entry),
            format_timestamp(self.game_start),
            format_timestamp(self.game_end),
        ]
    }

    /// Net result of the hand in big blinds.
    pub fn value_delta_bb(&self) -> f64 {
        (self.chips_won - self.chips_placed) / self.big_blind
    }

    pub fn outcome(&self) -> Outcome {
        Outcome {
            won: self.chips_won > 0.0,
            value_delta: self.value_delta_bb(),
            voluntary_entry: Some(self.voluntary_entry),
            timestamp: self.game_start,
            game_id: self.game_id.clone(),
            deal_number: None,
        }
    }
}

impl RummyDealRecord {
    /// Fields in [`RUMMY_COLUMNS`] order, in canonical text form.
    pub fn to_row(&self) -> Vec<String> {
        vec![
            self.user_id.clone(),
            self.game_id.clone(),
            self.game_type.as_str().to_string(),
            self.game_variant.to_string(),
            self.max_players.to_string(),
            self.actual_players.to_string(),
            format_timestamp(self.game_start),
            format_timestamp(self.game_end),
            format_timestamp(self.deal_start),
            format_timestamp(self.deal_end),
            self.buy_in.to_string(),
            self.win_amt.to_string(),
            self.deal_id.clone(),
            self.deal_number.to_string(),
            flag_text(self.is_winner),
            self.winner_points.to_string(),
            self.loss_points.to_string(),
        ]
    }

    pub fn outcome(&self) -> Outcome {
        let value_delta = if self.is_winner {
            f64::from(self.winner_points)
        } else {
            -f64::from(self.loss_points)
        };
        Outcome {
            won: self.is_winner,
            value_delta,
            voluntary_entry: None,
            timestamp: self.game_start,
            game_id: self.game_id.clone(),
            deal_number: Some(self.deal_number),
        }
    }
}

/// The result of one unit of play (hand, deal, session or game) for one player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub won: bool,
    /// Poker: net big blinds. Rummy: `+winner_points` or `-loss_points`.
    pub value_delta: f64,
    /// Poker only.
    pub voluntary_entry: Option<bool>,
    pub timestamp: Millis,
    pub game_id: String,
    pub deal_number: Option<u32>,
}

impl Outcome {
    fn order_key(&self) -> (Millis, &str, Option<u32>) {
        (self.timestamp, self.game_id.as_str(), self.deal_number)
    }
}

/// One player's outcomes at one table size, in play order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerTimeline {
    user_id: String,
    game: Game,
    table_size: u32,
    outcomes: Vec<Outcome>,
}

impl PlayerTimeline {
    /// Builds a timeline, ordering outcomes by `(timestamp, game_id, deal_number)`.
    pub fn new(user_id: impl Into<String>, game: Game, table_size: u32, mut outcomes: Vec<Outcome>) -> Self {
        outcomes.sort_by(|a, b| {
            a.order_key()
                .cmp(&b.order_key())
                .then_with(|| a.value_delta.total_cmp(&b.value_delta))
                .then_with(|| a.won.cmp(&b.won))
                .then_with(|| a.voluntary_entry.cmp(&b.voluntary_entry))
        });
        Self {
            user_id: user_id.into(),
            game,
            table_size,
            outcomes,
        }
    }

    pub fn user_id(&self) -> &str {
        &self.user_id
    }

    pub fn game(&self) -> Game {
        self.game
    }

    pub fn table_size(&self) -> u32 {
        self.table_size
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn wins(&self) -> usize {
        self.outcomes.iter().filter(|o| o.won).count()
    }

    /// Index range of outcomes with `from <= timestamp < until`.
    pub fn time_range(&self, from: Millis, until: Millis) -> std::ops::Range<usize> {
        let lo = self.outcomes.partition_point(|o| o.timestamp < from);
        let hi = self.outcomes.partition_point(|o| o.timestamp < until);
        lo..hi.max(lo)
    }

    /// Concatenates two timelines of the same player and table size.
    pub(crate) fn merged(self, other: PlayerTimeline) -> PlayerTimeline {
        let mut outcomes = self.outcomes;
        outcomes.extend(other.outcomes);
        PlayerTimeline::new(self.user_id, self.game, self.table_size, outcomes)
    }
}
