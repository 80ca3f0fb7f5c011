//! The analysis pipeline and its on-disk outputs.
//!
//! [`analyze`] runs persistence, learning-curve, normality and quantile
//! summaries on one table-size cohort and classifies the result.
//! [`write_outputs`] renders `verdict.json` plus one CSV per figure-style
//! table, each written to a temporary file and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::{filter_min_games, Cohort, GameLog, Granularity, IngestStats};
use crate::metrics::{win_probability_series, win_rate, MetricKind, OpponentView, PlayerScope, SkillSeries};
use crate::model::{format_timestamp, Game};
use crate::stattests::{
    classify, learning_curve_test, persistence_test, qq_test, quantile_summary, BinAggregate, BootstrapSettings,
    CurveModel, DateRange, ModelFit, PeriodSplit, PlayerOrdering, PlayerSummary, StatError, Thresholds, VerdictReport,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_NAME: &str = "gameskill";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no {game} records at table size {table_size} (available: {available:?})")]
    NoSuchTableSize {
        game: Game,
        table_size: u32,
        available: Vec<u32>,
    },
    #[error("log contains no records")]
    EmptyLog,
    #[error("insufficient cohort for {stage}: {found} players, {required} required")]
    InsufficientCohort {
        stage: &'static str,
        found: usize,
        required: usize,
    },
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
    #[error("{stage}: {source}")]
    Stat {
        stage: &'static str,
        #[source]
        source: StatError,
    },
}

impl AnalysisError {
    fn from_stat(stage: &'static str, e: StatError) -> Self {
        match e {
            StatError::InsufficientPlayers { found, required } | StatError::TooFewPlayers { found, required } => {
                AnalysisError::InsufficientCohort { stage, found, required }
            }
            source => AnalysisError::Stat { stage, source },
        }
    }

    pub fn is_insufficient_cohort(&self) -> bool {
        matches!(self, AnalysisError::InsufficientCohort { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Cohort to analyze; `None` picks the largest of 2, 3 and 6.
    pub table_size: Option<u32>,
    pub granularity: Granularity,
    pub min_games: usize,
    pub max_games: Option<usize>,
    pub bin_width: usize,
    pub split: PeriodSplit,
    pub persistence_metric: MetricKind,
    /// Games a player needs in each period to enter the correlation.
    pub period_min_games: usize,
    /// `None` uses the game's default learning metric.
    pub learning_metric: Option<MetricKind>,
    pub learning_aggregate: BinAggregate,
    /// Cumulative groups in the quantile summary; `None` gives 10 for poker
    /// and 4 for rummy.
    pub quantile_k: Option<usize>,
    pub quantile_ordering: PlayerOrdering,
    pub bootstrap_resamples: usize,
    pub seed: u64,
    pub thresholds: Thresholds,
    /// Players (first by user id) whose win-probability path is exported.
    pub trajectory_players: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            table_size: None,
            granularity: Granularity::Record,
            min_games: 30,
            max_games: Some(100),
            bin_width: 10,
            split: PeriodSplit::NearestMonthBoundary,
            persistence_metric: MetricKind::WinRate,
            period_min_games: 30,
            learning_metric: None,
            learning_aggregate: BinAggregate::Mean,
            quantile_k: None,
            quantile_ordering: PlayerOrdering::ExperienceAscending,
            bootstrap_resamples: 1000,
            seed: 0,
            thresholds: Thresholds::default(),
            trajectory_players: 10,
        }
    }
}

pub fn default_learning_metric(game: Game) -> MetricKind {
    match game {
        Game::Poker => MetricKind::AvgBlindLost,
        Game::Rummy => MetricKind::AvgPointsLostLosing,
    }
}

pub fn default_quantile_k(game: Game) -> usize {
    match game {
        Game::Poker => 10,
        Game::Rummy => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub table_size: u32,
    pub players_in_bucket: usize,
    pub players_analyzed: usize,
    pub excluded_below_min: usize,
    pub excluded_above_max: usize,
    pub outcomes_analyzed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub game: Game,
    pub cohort: CohortSummary,
    pub report: VerdictReport,
    pub players: Vec<PlayerSummary>,
    pub trajectories: Vec<SkillSeries>,
}

fn check_metric(metric: MetricKind, game: Game) -> Result<(), AnalysisError> {
    match metric.game() {
        Some(g) if g != game => Err(AnalysisError::InvalidConfig(format!("metric {metric} does not apply to {game}"))),
        _ => Ok(()),
    }
}

/// Runs the full battery on one table-size cohort of `log`.
pub fn analyze(log: &GameLog, config: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    if log.is_empty() {
        return Err(AnalysisError::EmptyLog);
    }
    let game = log.game();
    let learning_metric = config.learning_metric.unwrap_or_else(|| default_learning_metric(game));
    check_metric(learning_metric, game)?;
    check_metric(config.persistence_metric, game)?;
    if config.bin_width == 0 {
        return Err(AnalysisError::InvalidConfig("bin_width must be positive".into()));
    }
    if config.max_games.is_some_and(|max| max < config.min_games) {
        return Err(AnalysisError::InvalidConfig("max_games is below min_games".into()));
    }

    let timelines = log.timelines(config.granularity);
    let table_size = match config.table_size {
        Some(t) => t,
        None => timelines
            .largest_standard_bucket()
            .or_else(|| timelines.sizes().last().copied())
            .ok_or(AnalysisError::EmptyLog)?,
    };
    let Some(bucket) = timelines.cohort(table_size) else {
        return Err(AnalysisError::NoSuchTableSize {
            game,
            table_size,
            available: timelines.sizes(),
        });
    };
    let cohort: Cohort = filter_min_games(bucket, config.min_games, config.max_games);
    let summary = CohortSummary {
        table_size,
        players_in_bucket: bucket.len(),
        players_analyzed: cohort.len(),
        excluded_below_min: bucket.values().filter(|t| t.len() < config.min_games).count(),
        excluded_above_max: bucket
            .values()
            .filter(|t| config.max_games.is_some_and(|max| t.len() > max))
            .count(),
        outcomes_analyzed: cohort.values().map(|t| t.len()).sum(),
    };
    if cohort.is_empty() {
        return Err(AnalysisError::InsufficientCohort {
            stage: "cohort filter",
            found: 0,
            required: 1,
        });
    }

    let view = match log {
        GameLog::Rummy(records) => Some(OpponentView::from_records(records, config.granularity)),
        GameLog::Poker(_) => None,
    };
    let persistence = persistence_test(
        &cohort,
        config.split,
        config.persistence_metric,
        config.period_min_games,
        view.as_ref(),
        BootstrapSettings {
            resamples: config.bootstrap_resamples,
            seed: config.seed,
        },
    )
    .map_err(|e| AnalysisError::from_stat("persistence", e))?;
    let learning = learning_curve_test(
        &cohort,
        learning_metric,
        config.bin_width,
        view.as_ref(),
        config.learning_aggregate,
        &config.thresholds,
    )
    .map_err(|e| AnalysisError::from_stat("learning curve", e))?;

    let players: Vec<PlayerSummary> = cohort
        .values()
        .map(|t| PlayerSummary {
            user_id: t.user_id().to_string(),
            games_played: t.len(),
            win_rate: win_rate(t, None).unwrap_or(0.0),
        })
        .collect();
    let rates: Vec<f64> = players.iter().map(|p| p.win_rate).collect();
    let normality = qq_test(&rates, &config.thresholds).map_err(|e| AnalysisError::from_stat("normality", e))?;
    let k = config.quantile_k.unwrap_or_else(|| default_quantile_k(game));
    let quantiles = quantile_summary(&players, k, config.quantile_ordering)
        .map_err(|e| AnalysisError::from_stat("quantile summary", e))?;
    let trajectories = cohort
        .values()
        .take(config.trajectory_players)
        .filter_map(|t| win_probability_series(t).ok())
        .collect();

    let report = classify(persistence, learning, normality, quantiles, config.thresholds);
    Ok(Analysis {
        game,
        cohort: summary,
        report,
        players,
        trajectories,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl InputDigest {
    pub fn of(path: impl Into<String>, contents: &[u8]) -> Self {
        Self {
            path: path.into(),
            bytes: contents.len() as u64,
            sha256: hex::encode(Sha256::digest(contents)),
        }
    }
}

/// Everything needed to rerun a command. Holds the data's time range
/// rather than wall-clock time so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: u64,
    pub data_time_range: Option<DateRange>,
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: &impl Serialize, inputs: Vec<InputDigest>, seed: u64) -> Self {
        Self {
            tool: TOOL_NAME.to_string(),
            version: TOOL_VERSION.to_string(),
            command,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            inputs,
            seed,
            data_time_range: None,
        }
    }

    pub fn with_time_range(mut self, log: &GameLog) -> Self {
        self.data_time_range = log.time_range().map(|(a, b)| DateRange {
            start: format_timestamp(a),
            end: format_timestamp(b),
        });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDocument {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub game: Game,
    pub cohort: CohortSummary,
    pub ingest: Option<IngestStats>,
    pub report: VerdictReport,
}

impl VerdictDocument {
    pub fn new(analysis: &Analysis, manifest: RunManifest, ingest: Option<IngestStats>) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            manifest,
            game: analysis.game,
            cohort: analysis.cohort.clone(),
            ingest,
            report: analysis.report.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>, csv::Error>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn num(x: f64) -> String {
    if x.is_finite() {
        x.to_string()
    } else {
        String::new()
    }
}

/// Renders every output file in memory: `(file name, contents)`.
pub fn render_outputs(analysis: &Analysis, document: &VerdictDocument) -> Result<Vec<(&'static str, Vec<u8>)>, csv::Error> {
    let report = &analysis.report;
    let persistence = csv_bytes(&["user_id", "period_a", "period_b", "games_a", "games_b"], |w| {
        for p in &report.persistence.pairs {
            w.write_record([
                p.user_id.clone(),
                num(p.period_a),
                num(p.period_b),
                p.games_a.to_string(),
                p.games_b.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let l = &report.learning;
    let learning = csv_bytes(
        &["bin", "games_from", "games_to", "value", "power_fitted", "exponential_fitted"],
        |w| {
            for p in &l.binned.points {
                let bin = p.x as usize;
                let fitted = |fit: &ModelFit, model: CurveModel| {
                    fit.params().map_or(String::new(), |params| num(model.eval(params, p.x)))
                };
                w.write_record([
                    bin.to_string(),
                    ((bin - 1) * l.bin_width + 1).to_string(),
                    (bin * l.bin_width).to_string(),
                    num(p.y),
                    fitted(&l.power_fit, CurveModel::Power),
                    fitted(&l.exp_fit, CurveModel::Exponential),
                ])?;
            }
            Ok(())
        },
    )?;
    let qq = csv_bytes(&["rank", "percentile", "theoretical_q", "observed_q"], |w| {
        for p in &report.normality.points {
            w.write_record([num(p.rank), num(p.percentile), num(p.theoretical_q), num(p.observed_q)])?;
        }
        Ok(())
    })?;
    let quantiles = csv_bytes(&["group", "cumulative_player_count", "mean_win_rate", "std_win_rate"], |w| {
        for g in &report.quantiles.groups {
            w.write_record([
                g.group.to_string(),
                g.cumulative_player_count.to_string(),
                num(g.mean_win_rate),
                num(g.std_win_rate),
            ])?;
        }
        Ok(())
    })?;
    let trajectories = csv_bytes(&["user_id", "games", "win_probability"], |w| {
        for s in &analysis.trajectories {
            let user = match &s.scope {
                PlayerScope::Player(u) => u.clone(),
                PlayerScope::Cohort => String::new(),
            };
            for p in &s.points {
                w.write_record([user.clone(), (p.x as usize).to_string(), num(p.y)])?;
            }
        }
        Ok(())
    })?;
    Ok(vec![
        ("verdict.json", document.to_json().into_bytes()),
        ("persistence.csv", persistence),
        ("learning.csv", learning),
        ("qq.csv", qq),
        ("quantiles.csv", quantiles),
        ("trajectories.csv", trajectories),
    ])
}

/// Writes `contents` to `dir/name` through a temporary file in `dir`.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> std::io::Result<PathBuf> {
    let target = dir.join(name);
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(&target).map_err(|e| e.error)?;
    Ok(target)
}

/// Renders and writes all outputs into `dir`, creating it if needed.
/// Nothing is written unless rendering succeeds.
pub fn write_outputs(dir: &Path, analysis: &Analysis, document: &VerdictDocument) -> std::io::Result<Vec<PathBuf>> {
    let files = render_outputs(analysis, document).map_err(std::io::Error::other)?;
    std::fs::create_dir_all(dir)?;
    files
        .iter()
        .map(|(name, contents)| write_atomic(dir, name, contents))
        .collect()
}
