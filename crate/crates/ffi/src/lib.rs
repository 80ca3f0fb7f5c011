//! C ABI over the gameskill library.
//!
//! Handles are opaque and owned by the caller once returned; release them
//! with the matching `*_free` function. Every fallible call returns a
//! [`GsStatus`] and, on failure, leaves a message retrievable through
//! [`gs_last_error_message`] on the same thread. Panics never cross the
//! boundary; they surface as [`GsStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use gameskill::ingest::{GameLog, IngestError, IngestStats};
use gameskill::metrics::theoretical_quantile;
use gameskill::model::Game;
use gameskill::report::{analyze, write_atomic, Analysis, AnalysisConfig, RunManifest, VerdictDocument};
use gameskill::simgen::{simulate, SimConfig, SimError};
use gameskill::stattests::{pearson, Verdict};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    HeaderMismatch = 4,
    InsufficientCohort = 5,
    AnalysisFailed = 6,
    ConfigInvalid = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsGame {
    Poker = 0,
    Rummy = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsVerdict {
    SkillDominant = 0,
    ChanceDominant = 1,
    Inconclusive = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GsIngestStats {
    pub rows_read: u64,
    pub rows_accepted: u64,
    pub rows_rejected: u64,
}

/// A parsed log plus its ingest statistics.
pub struct GsDataset {
    log: GameLog,
    stats: IngestStats,
}

/// The result of one analysis.
pub struct GsReport {
    analysis: Analysis,
    config: AnalysisConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(GsStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn guard<F: FnOnce() -> FfiResult<()>>(f: F) -> GsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            GsStatus::Panic
        }
    }
}

fn game_of(game: GsGame) -> Game {
    match game {
        GsGame::Poker => Game::Poker,
        GsGame::Rummy => Game::Rummy,
    }
}

/// # Safety
/// `ptr` must be null or a valid NUL-terminated string.
unsafe fn opt_str<'a>(ptr: *const c_char, what: &str) -> FfiResult<Option<&'a str>> {
    if ptr.is_null() {
        return Ok(None);
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map(Some)
        .map_err(|_| Failure(GsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `ptr` must be a valid NUL-terminated string.
unsafe fn req_str<'a>(ptr: *const c_char, what: &str) -> FfiResult<&'a str> {
    opt_str(ptr, what)?.ok_or_else(|| Failure(GsStatus::NullPointer, format!("{what} is null")))
}

fn null(what: &str) -> Failure {
    Failure(GsStatus::NullPointer, format!("{what} is null"))
}

fn ingest_failure(e: IngestError) -> Failure {
    let status = match e {
        IngestError::HeaderMismatch { .. } => GsStatus::HeaderMismatch,
        IngestError::Io(_) => GsStatus::Io,
        IngestError::Csv(_) => GsStatus::InvalidArgument,
    };
    Failure(status, e.to_string())
}

fn parse_config<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> FfiResult<T> {
    match json {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(|e| Failure(GsStatus::ConfigInvalid, e.to_string())),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next gameskill call on the same thread.
#[no_mangle]
pub extern "C" fn gs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Reads a CSV log file of `game` into a new dataset.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_load(game: GsGame, path: *const c_char, out: *mut *mut GsDataset) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = req_str(path, "path")?;
        let bytes = std::fs::read(Path::new(path)).map_err(|e| Failure(GsStatus::Io, format!("{path}: {e}")))?;
        let (log, stats) = GameLog::read(game_of(game), bytes.as_slice()).map_err(ingest_failure)?;
        *out = Box::into_raw(Box::new(GsDataset { log, stats }));
        Ok(())
    })
}

/// Parses an in-memory CSV log of `game` into a new dataset.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_load_buffer(
    game: GsGame,
    data: *const u8,
    len: usize,
    out: *mut *mut GsDataset,
) -> GsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() && len > 0 {
            return Err(null("data"));
        }
        let bytes = if len == 0 { &[][..] } else { std::slice::from_raw_parts(data, len) };
        let (log, stats) = GameLog::read(game_of(game), bytes).map_err(ingest_failure)?;
        *out = Box::into_raw(Box::new(GsDataset { log, stats }));
        Ok(())
    })
}

/// # Safety
/// `dataset` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_stats(dataset: *const GsDataset, out: *mut GsIngestStats) -> GsStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = GsIngestStats {
            rows_read: d.stats.rows_read,
            rows_accepted: d.stats.rows_accepted,
            rows_rejected: d.stats.rows_rejected,
        };
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a pointer returned by a `gs_dataset_load*`
/// function that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn gs_dataset_free(dataset: *mut GsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the analysis. `config_json` may be null for defaults; otherwise
/// it is a JSON object whose missing keys keep their defaults.
///
/// # Safety
/// `dataset` and `out` must be valid; `config_json` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_analyze(
    dataset: *const GsDataset,
    config_json: *const c_char,
    out: *mut *mut GsReport,
) -> GsStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config: AnalysisConfig = parse_config(opt_str(config_json, "config_json")?)?;
        let analysis = analyze(&d.log, &config).map_err(|e| {
            let status = if e.is_insufficient_cohort() {
                GsStatus::InsufficientCohort
            } else {
                GsStatus::AnalysisFailed
            };
            Failure(status, e.to_string())
        })?;
        *out = Box::into_raw(Box::new(GsReport { analysis, config }));
        Ok(())
    })
}

/// # Safety
/// `report` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_report_verdict(report: *const GsReport, out: *mut GsVerdict) -> GsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = match r.analysis.report.verdict {
            Verdict::SkillDominant => GsVerdict::SkillDominant,
            Verdict::ChanceDominant => GsVerdict::ChanceDominant,
            Verdict::Inconclusive => GsVerdict::Inconclusive,
        };
        Ok(())
    })
}

/// Persistence correlation r of the report.
///
/// # Safety
/// `report` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_report_persistence_r(report: *const GsReport, out: *mut f64) -> GsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.analysis.report.persistence.r;
        Ok(())
    })
}

/// The report as the same JSON document the CLI writes to verdict.json.
/// Release the string with [`gs_string_free`].
///
/// # Safety
/// `report` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn gs_report_to_json(report: *const GsReport, out: *mut *mut c_char) -> GsStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let manifest = RunManifest::new(vec!["gs_analyze".into()], &r.config, Vec::new(), r.config.seed);
        let json = VerdictDocument::new(&r.analysis, manifest, None).to_json();
        let c = CString::new(json).map_err(|e| Failure(GsStatus::AnalysisFailed, e.to_string()))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must be null or an unfreed pointer from [`gs_analyze`].
#[no_mangle]
pub unsafe extern "C" fn gs_report_free(report: *mut GsReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must be null or an unfreed string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn gs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Standard normal quantile Φ⁻¹(p) for 0 < p < 1.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gs_theoretical_quantile(p: f64, out: *mut f64) -> GsStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = theoretical_quantile(p).map_err(|e| Failure(GsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Pearson correlation of two arrays of length `n`.
///
/// # Safety
/// `xs` and `ys` must each point to `n` readable doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn gs_pearson(xs: *const f64, ys: *const f64, n: usize, out: *mut f64) -> GsStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() {
            return Err(null("xs/ys"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let (x, y) = (std::slice::from_raw_parts(xs, n), std::slice::from_raw_parts(ys, n));
        *out = pearson(x, y).map_err(|e| Failure(GsStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

/// Runs the simulator and writes `<game>.csv` and `ground_truth.json` into
/// `out_dir`. `config_json` may be null for defaults.
///
/// # Safety
/// `out_dir` must be NUL-terminated; `config_json` null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gs_simulate_to_files(config_json: *const c_char, out_dir: *const c_char) -> GsStatus {
    guard(|| {
        let config: SimConfig = parse_config(opt_str(config_json, "config_json")?)?;
        let dir = Path::new(req_str(out_dir, "out_dir")?);
        let result = simulate(&config).map_err(|e| match e {
            SimError::ConfigInvalid { .. } => Failure(GsStatus::ConfigInvalid, e.to_string()),
            SimError::Write(_) => Failure(GsStatus::Io, e.to_string()),
        })?;
        let io = |e: std::io::Error| Failure(GsStatus::Io, format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        write_atomic(dir, &format!("{}.csv", config.game), &result.log.to_csv_bytes()).map_err(io)?;
        write_atomic(dir, "ground_truth.json", (result.truth.to_json() + "\n").as_bytes()).map_err(io)?;
        Ok(())
    })
}
