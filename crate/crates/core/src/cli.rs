//! Command-line front end: `ingest`, `analyze`, `simulate` and `version`.
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 insufficient cohort.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::ingest::{GameLog, Granularity, IngestError, IngestStats};
use crate::metrics::MetricKind;
use crate::model::Game;
use crate::report::{analyze, write_atomic, write_outputs, AnalysisConfig, InputDigest, RunManifest, VerdictDocument};
use crate::simgen::{simulate, SimConfig, SimError, SimMode};
use crate::stattests::{BinAggregate, CurveModel, PeriodSplit, Thresholds};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INSUFFICIENT: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "gameskill", about = "Skill-versus-chance analytics for poker and rummy logs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate log files and print ingest statistics as JSON.
    Ingest {
        #[arg(long)]
        game: Game,
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run the skill/chance battery and write verdict.json plus CSV tables.
    Analyze(AnalyzeArgs),
    /// Generate a synthetic log with planted ground truth.
    Simulate(SimulateArgs),
    /// Print the tool version.
    Version,
}

fn serde_enum<T: DeserializeOwned>(text: &str) -> Result<T, String> {
    let key = text.trim().to_ascii_lowercase().replace('-', "_");
    serde_json::from_value(serde_json::Value::String(key)).map_err(|_| format!("unrecognized value `{text}`"))
}

fn parse_split(text: &str) -> Result<PeriodSplit, String> {
    PeriodSplit::parse_month(text).ok_or_else(|| format!("expected YYYY-MM, got `{text}`"))
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    game: Game,
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// 2, 3 or 6; defaults to the largest standard bucket present.
    #[arg(long)]
    table_size: Option<u32>,
    #[arg(long, default_value_t = 30)]
    min_games: usize,
    #[arg(long, default_value_t = 100, conflicts_with = "no_max_games")]
    max_games: usize,
    /// Keep players regardless of how many games they played.
    #[arg(long)]
    no_max_games: bool,
    #[arg(long, default_value_t = 10)]
    bin_width: usize,
    /// First month of period B; defaults to the month boundary nearest the
    /// middle of the data.
    #[arg(long, value_parser = parse_split)]
    split_date: Option<PeriodSplit>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON file of decision thresholds; missing keys keep their defaults.
    #[arg(long)]
    thresholds: Option<PathBuf>,
    /// record or game.
    #[arg(long, value_parser = serde_enum::<Granularity>, default_value = "record")]
    granularity: Granularity,
    #[arg(long, default_value = "win_rate")]
    persistence_metric: MetricKind,
    #[arg(long, default_value_t = 30)]
    period_min_games: usize,
    #[arg(long)]
    learning_metric: Option<MetricKind>,
    /// mean or positive_net_share.
    #[arg(long, value_parser = serde_enum::<BinAggregate>, default_value = "mean")]
    learning_aggregate: BinAggregate,
    #[arg(long)]
    quantile_groups: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 10)]
    trajectory_players: usize,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// JSON simulator config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    game: Option<Game>,
    #[arg(long)]
    table_size: Option<u32>,
    #[arg(long)]
    players: Option<usize>,
    #[arg(long)]
    games: Option<u32>,
    #[arg(long)]
    min_games_per_player: Option<u32>,
    /// chance or skill.
    #[arg(long, value_parser = serde_enum::<SimMode>)]
    mode: Option<SimMode>,
    #[arg(long)]
    skill_sd: Option<f64>,
    /// power or exponential.
    #[arg(long, value_parser = serde_enum::<CurveModel>)]
    learning_curve: Option<CurveModel>,
    #[arg(long)]
    learning_b: Option<f64>,
    #[arg(long)]
    learning_alpha: Option<f64>,
    #[arg(long)]
    points_mu: Option<f64>,
    #[arg(long)]
    points_sd: Option<f64>,
    #[arg(long)]
    points_skill_coef: Option<f64>,
    #[arg(long)]
    vpip_start: Option<f64>,
    #[arg(long)]
    vpip_end: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn parse_input(game: Game, path: &Path, bytes: &[u8]) -> Result<(GameLog, IngestStats), Failure> {
    GameLog::read(game, bytes).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable")
}

fn cmd_ingest(game: Game, paths: &[PathBuf], out: &mut dyn Write, err: &mut dyn Write) -> Result<(), Failure> {
    #[derive(Serialize)]
    struct FileReport {
        path: String,
        stats: IngestStats,
        #[serde(skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    }
    #[derive(Serialize)]
    struct Summary {
        game: Game,
        files: Vec<FileReport>,
        total: IngestStats,
    }
    let mut summary = Summary {
        game,
        files: Vec::new(),
        total: IngestStats::default(),
    };
    let mut failed = None;
    for path in paths {
        let shown = path.display().to_string();
        let outcome = std::fs::read(path)
            .map_err(IngestError::Io)
            .and_then(|bytes| GameLog::read(game, bytes.as_slice()));
        match outcome {
            Ok((_, stats)) => {
                summary.total.absorb(stats.clone());
                summary.files.push(FileReport {
                    path: shown,
                    stats,
                    error: None,
                });
            }
            Err(e) => {
                let message = format!("{shown}: {e}");
                let _ = writeln!(err, "error: {message}");
                failed.get_or_insert(message.clone());
                summary.files.push(FileReport {
                    path: shown,
                    stats: IngestStats::default(),
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let _ = writeln!(out, "{}", to_json(&summary));
    match failed {
        Some(m) => Err(fail(EXIT_DATA, m)),
        None => Ok(()),
    }
}

fn load_thresholds(path: &Path) -> Result<Thresholds, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))
}

fn cmd_analyze(a: &AnalyzeArgs, command: Vec<String>, out: &mut dyn Write) -> Result<(), Failure> {
    let config = AnalysisConfig {
        table_size: a.table_size,
        granularity: a.granularity,
        min_games: a.min_games,
        max_games: (!a.no_max_games).then_some(a.max_games),
        bin_width: a.bin_width,
        split: a.split_date.unwrap_or(PeriodSplit::NearestMonthBoundary),
        persistence_metric: a.persistence_metric,
        period_min_games: a.period_min_games,
        learning_metric: a.learning_metric,
        learning_aggregate: a.learning_aggregate,
        quantile_k: a.quantile_groups,
        quantile_ordering: Default::default(),
        bootstrap_resamples: a.bootstrap,
        seed: a.seed,
        thresholds: match &a.thresholds {
            Some(p) => load_thresholds(p)?,
            None => Thresholds::default(),
        },
        trajectory_players: a.trajectory_players,
    };
    let mut log = GameLog::empty(a.game);
    let mut stats = IngestStats::default();
    let mut digests = Vec::new();
    for path in &a.paths {
        let bytes = read_input(path)?;
        digests.push(InputDigest::of(path.display().to_string(), &bytes));
        let (part, s) = parse_input(a.game, path, &bytes)?;
        stats.absorb(s);
        log.extend(part).map_err(|_| fail(EXIT_DATA, "mixed games"))?;
    }
    let analysis = analyze(&log, &config).map_err(|e| {
        let code = if e.is_insufficient_cohort() { EXIT_INSUFFICIENT } else { EXIT_DATA };
        fail(code, e.to_string())
    })?;
    let manifest = RunManifest::new(command, &config, digests, config.seed).with_time_range(&log);
    let document = VerdictDocument::new(&analysis, manifest, Some(stats));
    let written = write_outputs(&a.out, &analysis, &document)
        .map_err(|e| fail(EXIT_DATA, format!("{}: {e}", a.out.display())))?;
    let _ = writeln!(out, "verdict: {}", serde_enum_name(&analysis.report.verdict));
    for p in written {
        let _ = writeln!(out, "{}", p.display());
    }
    Ok(())
}

fn serde_enum_name<T: Serialize>(value: &T) -> String {
    match serde_json::to_value(value) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn sim_config(a: &SimulateArgs) -> Result<SimConfig, Failure> {
    let mut c = match &a.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?
        }
        None => SimConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = a.$flag.clone() { c.$($field).+ = v; })*
        };
    }
    set!(
        game => game,
        table_size => table_size,
        players => n_players,
        games => games_per_player,
        mode => mode,
        skill_sd => skill_sd,
        learning_curve => learning.curve,
        learning_b => learning.b,
        learning_alpha => learning.alpha,
        points_mu => points_mu,
        points_sd => points_sd,
        points_skill_coef => points_skill_coef,
        vpip_start => vpip_schedule.start,
        vpip_end => vpip_schedule.end,
        seed => seed,
    );
    if a.min_games_per_player.is_some() {
        c.min_games_per_player = a.min_games_per_player;
    }
    Ok(c)
}

fn cmd_simulate(a: &SimulateArgs, out: &mut dyn Write) -> Result<(), Failure> {
    let config = sim_config(a)?;
    let result = simulate(&config).map_err(|e| match e {
        SimError::ConfigInvalid { .. } => fail(EXIT_USAGE, e.to_string()),
        SimError::Write(_) => fail(EXIT_DATA, e.to_string()),
    })?;
    let log_bytes = result.log.to_csv_bytes();
    let truth = result.truth.to_json() + "\n";
    std::fs::create_dir_all(&a.out).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", a.out.display())))?;
    let log_name = format!("{}.csv", config.game);
    for (name, bytes) in [(log_name.as_str(), log_bytes.as_slice()), ("ground_truth.json", truth.as_bytes())] {
        let path = write_atomic(&a.out, name, bytes).map_err(|e| fail(EXIT_DATA, format!("{}: {e}", a.out.display())))?;
        let _ = writeln!(out, "{}", path.display());
    }
    Ok(())
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let command: Vec<String> = std::iter::once("gameskill".to_string())
        .chain(args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()))
        .collect();
    let result = match &cli.command {
        Command::Ingest { game, paths } => cmd_ingest(*game, paths, out, err),
        Command::Analyze(a) => cmd_analyze(a, command, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Version => {
            let _ = writeln!(out, "gameskill {}", crate::report::TOOL_VERSION);
            Ok(())
        }
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            if !matches!(cli.command, Command::Ingest { .. }) {
                let _ = writeln!(err, "error: {}", f.message);
            }
            f.code
        }
    }
}
