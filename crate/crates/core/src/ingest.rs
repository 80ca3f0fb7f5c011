//! Streaming CSV ingestion and per-player timeline assembly.
//!
//! Headers must match the canonical column lists exactly and in order; a
//! bad header is the only fatal condition. Row-level failures are counted
//! and sampled in [`IngestStats`] and never abort the read.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::marker::PhantomData;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    validate_poker_record, validate_rummy_record, FieldSource, Game, Millis, Outcome, PlayerTimeline,
    PokerHandRecord, RecordError, RummyDealRecord, POKER_COLUMNS, RUMMY_COLUMNS,
    STANDARD_TABLE_SIZES,
};

/// Maximum number of row errors retained in [`IngestStats::first_error_samples`].
pub const ERROR_SAMPLE_LIMIT: usize = 20;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("header mismatch: missing {missing:?}, unexpected {unexpected:?}{}", if *.misordered { " (columns out of order)" } else { "" })]
    HeaderMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
        misordered: bool,
    },
    #[error("csv read failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// A rejected row and its 1-based line number in the source file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    pub line: u64,
    pub error: RecordError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
    pub first_error_samples: Vec<RowError>,
}

impl IngestStats {
    fn record(&mut self, outcome: Result<(), RowError>) {
        self.rows_read += 1;
        match outcome {
            Ok(()) => self.rows_accepted += 1,
            Err(e) => {
                self.rows_rejected += 1;
                if self.first_error_samples.len() < ERROR_SAMPLE_LIMIT {
                    self.first_error_samples.push(e);
                }
            }
        }
    }

    /// Combines the stats of two files, keeping the sample cap.
    pub fn absorb(&mut self, other: IngestStats) {
        self.rows_read += other.rows_read;
        self.rows_accepted += other.rows_accepted;
        self.rows_rejected += other.rows_rejected;
        for e in other.first_error_samples {
            if self.first_error_samples.len() >= ERROR_SAMPLE_LIMIT {
                break;
            }
            self.first_error_samples.push(e);
        }
    }
}

/// A record type with a canonical CSV layout.
pub trait GameRecord: Sized {
    const GAME: Game;
    const COLUMNS: &'static [&'static str];

    fn validate(raw: &dyn FieldSource) -> Result<Self, RecordError>;
    fn to_row(&self) -> Vec<String>;
    fn user_id(&self) -> &str;
    fn game_id(&self) -> &str;
    /// Table-size classification used to partition timelines.
    fn table_size(&self) -> u32;
    fn outcome(&self) -> Outcome;
    /// Whether a player won a whole game, given all of their rows in it.
    fn game_won(rows: &[&Self], net_delta: f64) -> bool {
        let _ = rows;
        net_delta > 0.0
    }
}

impl GameRecord for PokerHandRecord {
    const GAME: Game = Game::Poker;
    const COLUMNS: &'static [&'static str] = &POKER_COLUMNS;

    fn validate(raw: &dyn FieldSource) -> Result<Self, RecordError> {
        validate_poker_record(raw)
    }
    fn to_row(&self) -> Vec<String> {
        PokerHandRecord::to_row(self)
    }
    fn user_id(&self) -> &str {
        &self.user_id
    }
    fn game_id(&self) -> &str {
        &self.game_id
    }
    fn table_size(&self) -> u32 {
        self.max_players
    }
    fn outcome(&self) -> Outcome {
        PokerHandRecord::outcome(self)
    }
}

impl GameRecord for RummyDealRecord {
    const GAME: Game = Game::Rummy;
    const COLUMNS: &'static [&'static str] = &RUMMY_COLUMNS;

    fn validate(raw: &dyn FieldSource) -> Result<Self, RecordError> {
        validate_rummy_record(raw)
    }
    fn to_row(&self) -> Vec<String> {
        RummyDealRecord::to_row(self)
    }
    fn user_id(&self) -> &str {
        &self.user_id
    }
    fn game_id(&self) -> &str {
        &self.game_id
    }
    fn table_size(&self) -> u32 {
        self.max_players
    }
    fn outcome(&self) -> Outcome {
        RummyDealRecord::outcome(self)
    }
    fn game_won(rows: &[&Self], _net_delta: f64) -> bool {
        rows.iter().any(|r| r.win_amt > 0.0)
    }
}

struct RowFields<'a> {
    columns: &'static [&'static str],
    record: &'a csv::StringRecord,
}

impl FieldSource for RowFields<'_> {
    fn field(&self, name: &str) -> Option<&str> {
        let idx = self.columns.iter().position(|c| *c == name)?;
        self.record.get(idx)
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<(), IngestError> {
    let found: Vec<String> = found
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let h = if i == 0 { h.trim_start_matches('\u{feff}') } else { h };
            h.trim().to_string()
        })
        .collect();
    if found.len() == expected.len() && found.iter().zip(expected).all(|(f, e)| f == e) {
        return Ok(());
    }
    let missing: Vec<String> = expected
        .iter()
        .filter(|e| !found.iter().any(|f| f == *e))
        .map(|e| e.to_string())
        .collect();
    let unexpected: Vec<String> = found
        .iter()
        .filter(|f| !expected.contains(&f.as_str()))
        .cloned()
        .collect();
    let misordered = missing.is_empty() && unexpected.is_empty();
    Err(IngestError::HeaderMismatch {
        missing,
        unexpected,
        misordered,
    })
}

/// Row-by-row reader over one log file.
///
/// Yields validated records in file order and skips (but counts) rejected
/// rows. Memory use is bounded by one row.
pub struct LogReader<R: Read, T: GameRecord> {
    reader: csv::Reader<R>,
    row: csv::ByteRecord,
    stats: IngestStats,
    _record: PhantomData<T>,
}

impl<R: Read, T: GameRecord> LogReader<R, T> {
    /// Reads and checks the header row.
    pub fn new(source: R) -> Result<Self, IngestError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(source);
        let mut header = csv::StringRecord::new();
        if !reader.read_record(&mut header)? {
            return Err(IngestError::HeaderMismatch {
                missing: T::COLUMNS.iter().map(|c| c.to_string()).collect(),
                unexpected: Vec::new(),
                misordered: false,
            });
        }
        check_header(&header, T::COLUMNS)?;
        Ok(Self {
            reader,
            row: csv::ByteRecord::new(),
            stats: IngestStats::default(),
            _record: PhantomData,
        })
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn into_stats(self) -> IngestStats {
        self.stats
    }

    /// Next accepted record, or `None` at end of input.
    pub fn next_record(&mut self) -> Result<Option<T>, IngestError> {
        loop {
            if !self.reader.read_byte_record(&mut self.row)? {
                return Ok(None);
            }
            let line = self.row.position().map_or(0, |p| p.line());
            match self.validate_row() {
                Ok(rec) => {
                    self.stats.record(Ok(()));
                    return Ok(Some(rec));
                }
                Err(error) => self.stats.record(Err(RowError { line, error })),
            }
        }
    }

    fn validate_row(&self) -> Result<T, RecordError> {
        if self.row.len() > T::COLUMNS.len() {
            return Err(RecordError::Malformed(format!(
                "expected {} fields, found {}",
                T::COLUMNS.len(),
                self.row.len()
            )));
        }
        let record = csv::StringRecord::from_byte_record(self.row.clone())
            .map_err(|e| RecordError::Malformed(format!("invalid UTF-8: {e}")))?;
        T::validate(&RowFields {
            columns: T::COLUMNS,
            record: &record,
        })
    }
}

impl<R: Read, T: GameRecord> Iterator for LogReader<R, T> {
    type Item = Result<T, IngestError>;
    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

/// Reads a whole log of any record type.
pub fn parse_log<T: GameRecord, R: Read>(source: R) -> Result<(Vec<T>, IngestStats), IngestError> {
    let mut reader = LogReader::<R, T>::new(source)?;
    let mut records = Vec::new();
    while let Some(rec) = reader.next_record()? {
        records.push(rec);
    }
    Ok((records, reader.into_stats()))
}

pub fn parse_poker_log<R: Read>(source: R) -> Result<(Vec<PokerHandRecord>, IngestStats), IngestError> {
    parse_log(source)
}

pub fn parse_rummy_log<R: Read>(source: R) -> Result<(Vec<RummyDealRecord>, IngestStats), IngestError> {
    parse_log(source)
}

/// Writes records in the canonical CSV layout, header included.
pub fn write_log<'a, T, W, I>(sink: W, records: I) -> Result<(), IngestError>
where
    T: GameRecord + 'a,
    W: Write,
    I: IntoIterator<Item = &'a T>,
{
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(T::COLUMNS)?;
    for rec in records {
        writer.write_record(rec.to_row())?;
    }
    writer.flush()?;
    Ok(())
}

/// A whole log of either game.
#[derive(Debug, Clone, PartialEq)]
pub enum GameLog {
    Poker(Vec<PokerHandRecord>),
    Rummy(Vec<RummyDealRecord>),
}

impl GameLog {
    pub fn empty(game: Game) -> Self {
        match game {
            Game::Poker => GameLog::Poker(Vec::new()),
            Game::Rummy => GameLog::Rummy(Vec::new()),
        }
    }

    /// Parses one CSV source of the given game.
    pub fn read<R: Read>(game: Game, source: R) -> Result<(GameLog, IngestStats), IngestError> {
        Ok(match game {
            Game::Poker => {
                let (r, s) = parse_poker_log(source)?;
                (GameLog::Poker(r), s)
            }
            Game::Rummy => {
                let (r, s) = parse_rummy_log(source)?;
                (GameLog::Rummy(r), s)
            }
        })
    }

    pub fn game(&self) -> Game {
        match self {
            GameLog::Poker(_) => Game::Poker,
            GameLog::Rummy(_) => Game::Rummy,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            GameLog::Poker(r) => r.len(),
            GameLog::Rummy(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Appends `other`; logs of different games do not mix.
    pub fn extend(&mut self, other: GameLog) -> Result<(), GameLog> {
        match (self, other) {
            (GameLog::Poker(a), GameLog::Poker(b)) => a.extend(b),
            (GameLog::Rummy(a), GameLog::Rummy(b)) => a.extend(b),
            (_, other) => return Err(other),
        }
        Ok(())
    }

    pub fn timelines(&self, granularity: Granularity) -> TimelineSet {
        match self {
            GameLog::Poker(r) => build_timelines(r, granularity),
            GameLog::Rummy(r) => build_timelines(r, granularity),
        }
    }

    /// First and last game start in the log.
    pub fn time_range(&self) -> Option<(Millis, Millis)> {
        let starts: Box<dyn Iterator<Item = Millis>> = match self {
            GameLog::Poker(r) => Box::new(r.iter().map(|x| x.game_start)),
            GameLog::Rummy(r) => Box::new(r.iter().map(|x| x.game_start)),
        };
        starts.fold(None, |acc, t| match acc {
            None => Some((t, t)),
            Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
        })
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), IngestError> {
        match self {
            GameLog::Poker(r) => write_log(sink, r),
            GameLog::Rummy(r) => write_log(sink, r),
        }
    }

    pub fn to_csv_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        buf
    }
}

/// Unit of play that becomes one [`Outcome`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    /// One outcome per row: a poker hand or a rummy deal.
    #[default]
    Record,
    /// One outcome per game_id: a poker session or a whole rummy game.
    Game,
}

/// Players keyed by user id; iteration order is sorted by id.
pub type Cohort = BTreeMap<String, PlayerTimeline>;

/// Timelines partitioned by table size.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineSet {
    game: Game,
    buckets: BTreeMap<u32, Cohort>,
}

impl TimelineSet {
    pub fn empty(game: Game) -> Self {
        Self {
            game,
            buckets: BTreeMap::new(),
        }
    }

    pub fn game(&self) -> Game {
        self.game
    }

    /// All table sizes present, standard or not.
    pub fn sizes(&self) -> Vec<u32> {
        self.buckets.keys().copied().collect()
    }

    /// Present table sizes outside 2, 3 and 6.
    pub fn other_sizes(&self) -> Vec<u32> {
        self.buckets
            .keys()
            .copied()
            .filter(|s| !STANDARD_TABLE_SIZES.contains(s))
            .collect()
    }

    pub fn cohort(&self, table_size: u32) -> Option<&Cohort> {
        self.buckets.get(&table_size)
    }

    /// Standard table size with the most players (ties go to the smaller size).
    pub fn largest_standard_bucket(&self) -> Option<u32> {
        STANDARD_TABLE_SIZES
            .iter()
            .filter_map(|s| self.buckets.get(s).map(|c| (*s, c.len())))
            .filter(|(_, n)| *n > 0)
            .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(s, _)| s)
    }

    pub fn total_outcomes(&self) -> usize {
        self.buckets
            .values()
            .flat_map(|c| c.values())
            .map(PlayerTimeline::len)
            .sum()
    }

    pub fn into_buckets(self) -> BTreeMap<u32, Cohort> {
        self.buckets
    }

    /// Union of two sets; associative and commutative.
    pub fn merge(mut self, other: TimelineSet) -> TimelineSet {
        for (size, cohort) in other.buckets {
            let bucket = self.buckets.entry(size).or_default();
            for (user, timeline) in cohort {
                let merged = match bucket.remove(&user) {
                    Some(existing) => existing.merged(timeline),
                    None => timeline,
                };
                bucket.insert(user, merged);
            }
        }
        self
    }
}

fn aggregate_game<T: GameRecord>(rows: &[&T]) -> Outcome {
    let outcomes: Vec<Outcome> = rows.iter().map(|r| r.outcome()).collect();
    let net = crate::numeric::exact_sum(outcomes.iter().map(|o| o.value_delta));
    let voluntary_entry = outcomes
        .iter()
        .map(|o| o.voluntary_entry)
        .collect::<Option<Vec<bool>>>()
        .map(|v| v.into_iter().any(|b| b));
    Outcome {
        won: T::game_won(rows, net),
        value_delta: net,
        voluntary_entry,
        timestamp: outcomes.iter().map(|o| o.timestamp).min().unwrap_or(0),
        game_id: rows[0].game_id().to_string(),
        deal_number: None,
    }
}

/// Groups validated records into per-player timelines, partitioned by table size.
///
/// Table sizes outside 2, 3 and 6 get their own buckets (see
/// [`TimelineSet::other_sizes`]); nothing is dropped.
pub fn build_timelines<T: GameRecord>(records: &[T], granularity: Granularity) -> TimelineSet {
    let mut grouped: BTreeMap<(u32, &str), Vec<&T>> = BTreeMap::new();
    for rec in records {
        grouped
            .entry((rec.table_size(), rec.user_id()))
            .or_default()
            .push(rec);
    }
    let mut buckets: BTreeMap<u32, Cohort> = BTreeMap::new();
    for ((size, user), rows) in grouped {
        let outcomes = match granularity {
            Granularity::Record => rows.iter().map(|r| r.outcome()).collect(),
            Granularity::Game => {
                let mut games: BTreeMap<&str, Vec<&T>> = BTreeMap::new();
                for r in rows {
                    games.entry(r.game_id()).or_default().push(r);
                }
                games.values().map(|g| aggregate_game(g)).collect()
            }
        };
        buckets
            .entry(size)
            .or_default()
            .insert(user.to_string(), PlayerTimeline::new(user, T::GAME, size, outcomes));
    }
    TimelineSet {
        game: T::GAME,
        buckets,
    }
}

/// Keeps players with `min_games <= games <= max_games`; players above the
/// upper bound are excluded, not truncated.
pub fn filter_min_games(cohort: &Cohort, min_games: usize, max_games: Option<usize>) -> Cohort {
    cohort
        .iter()
        .filter(|(_, t)| t.len() >= min_games && max_games.map_or(true, |max| t.len() <= max))
        .map(|(k, t)| (k.clone(), t.clone()))
        .collect()
}
