//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Every reference value here comes from an oracle written in this file
//! (closed forms, series expansions, brute force), never from the library
//! function under test.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::Instant;

use gameskill::ingest::{GameLog, IngestStats};
use gameskill::metrics::{percentile_position, rank_average, theoretical_quantile};
use gameskill::model::Game;
use gameskill::report::{analyze, Analysis, AnalysisConfig};
use gameskill::simgen::{simulate, SimConfig, SimMode};
use gameskill::stattests::{fit_exponential, fit_power, pearson, qq_test, CurveModel, PeriodSplit, Thresholds, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Simulates, writes CSV, re-ingests and returns the parsed log.
fn round_trip(config: &SimConfig) -> (GameLog, IngestStats) {
    let out = simulate(config).expect("simulate");
    let bytes = out.log.to_csv_bytes();
    GameLog::read(config.game, bytes.as_slice()).expect("ingest")
}

fn month_halves() -> AnalysisConfig {
    AnalysisConfig {
        split: PeriodSplit::Month { year: 2023, month: 1 },
        ..AnalysisConfig::default()
    }
}

fn two_player(mode: SimMode, seed: u64) -> SimConfig {
    SimConfig {
        game: Game::Poker,
        table_size: 2,
        n_players: 10_000,
        games_per_player: 100,
        mode,
        skill_sd: 0.8,
        seed,
        ..SimConfig::default()
    }
}

fn analyze_sim(config: &SimConfig) -> (Analysis, IngestStats) {
    let (log, stats) = round_trip(config);
    (analyze(&log, &month_halves()).expect("analyze"), stats)
}

fn c1_null_model() -> Outcome {
    let t = Instant::now();
    let (a, stats) = analyze_sim(&two_player(SimMode::Chance, 101));
    let secs = t.elapsed().as_secs_f64();
    let p = &a.report.persistence;
    let (lo, hi) = p.bootstrap_ci95;
    check(
        p.r.abs() < 0.05
            && lo <= 0.0
            && 0.0 <= hi
            && a.report.verdict != Verdict::SkillDominant
            && a.report.reclassify() != Verdict::SkillDominant
            && stats.rows_rejected == 0
            && p.n_players == 10_000
            && secs < 30.0,
        format!(
            "r = {:.4}, CI = [{lo:.4}, {hi:.4}], players = {}, verdict = {:?}, {secs:.1} s",
            p.r, p.n_players, a.report.verdict
        ),
    )
}

fn c2_skill_model() -> Outcome {
    let (a, _) = analyze_sim(&two_player(SimMode::Skill, 202));
    let p = &a.report.persistence;
    check(
        p.r > 0.5 && a.report.verdict == Verdict::SkillDominant,
        format!(
            "r = {:.4}, trend = {:?}, qq R² = {:.4}, max dev = {:.3}, verdict = {:?}",
            p.r,
            a.report.learning.trend_direction,
            a.report.normality.r_squared,
            a.report.normality.max_abs_deviation,
            a.report.verdict
        ),
    )
}

fn c3_heads_up() -> Outcome {
    let games = 200_000u32;
    let config = SimConfig {
        game: Game::Poker,
        table_size: 2,
        n_players: 2,
        games_per_player: games,
        mode: SimMode::Skill,
        planted_skills: Some(vec![0.8, 0.0]),
        learning: gameskill::simgen::LearningSpec {
            b: 0.0,
            ..Default::default()
        },
        seed: 303,
        ..SimConfig::default()
    };
    let out = simulate(&config).expect("simulate");
    let GameLog::Poker(rows) = &out.log else {
        return Err("expected poker log".into());
    };
    let wins = rows.iter().filter(|r| r.user_id == "p000000" && r.chips_won > 0.0).count();
    let rate = wins as f64 / f64::from(games);
    let expected = (0.8f64).exp() / ((0.8f64).exp() + 1.0);
    check(
        (rate - expected).abs() <= 0.01,
        format!("{games} games: win rate {rate:.4} vs closed form {expected:.4}"),
    )
}

fn c4_learning_recovery() -> Outcome {
    let xs: Vec<f64> = (1..=10).map(f64::from).collect();
    let rel = |est: f64, truth: f64| ((est - truth) / truth).abs();
    let mut worst = 0.0f64;
    let mut cases = 0;
    for &(a, b, alpha) in &[(1.5, 2.0, 0.6), (3.0, 1.2, 0.35), (40.0, -8.0, 0.9), (0.2, 0.5, 1.5)] {
        for model in [CurveModel::Power, CurveModel::Exponential] {
            let ys: Vec<f64> = xs
                .iter()
                .map(|&x| match model {
                    CurveModel::Power => a + b * x.powf(-alpha),
                    CurveModel::Exponential => a + b * (-alpha * x).exp(),
                })
                .collect();
            let pow = fit_power(&xs, &ys);
            let exp = fit_exponential(&xs, &ys);
            let (fit, other) = match model {
                CurveModel::Power => (pow.params(), exp.params()),
                CurveModel::Exponential => (exp.params(), pow.params()),
            };
            let Some(fit) = fit else {
                return Err(format!("{model:?} fit diverged for ({a}, {b}, {alpha})"));
            };
            let err = rel(fit.a, a).max(rel(fit.b, b)).max(rel(fit.alpha, alpha));
            worst = worst.max(err);
            let preferred = other.map_or(true, |o| fit.aic < o.aic);
            if err > 0.05 || !preferred {
                return Err(format!(
                    "{model:?} ({a}, {b}, {alpha}): got ({:.4}, {:.4}, {:.4}), preferred = {preferred}",
                    fit.a, fit.b, fit.alpha
                ));
            }
            cases += 1;
        }
    }
    Ok(format!("{cases} planted curves, worst relative error {worst:.2e}, AIC picks the true family"))
}

/// erf via its everywhere-positive series
/// erf(x) = 2/√π · e^(−x²) · Σ 2ⁿ x^(2n+1) / (1·3·…·(2n+1)).
fn oracle_erf(x: f64) -> f64 {
    if x < 0.0 {
        return -oracle_erf(-x);
    }
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-18 {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
    }
    2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum
}

fn oracle_quantile(p: f64) -> f64 {
    let cdf = |z: f64| 0.5 * (1.0 + oracle_erf(z / std::f64::consts::SQRT_2));
    let (mut lo, mut hi) = (-10.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn brute_ranks(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|w| *w < v).count() as f64;
            let equal = values.iter().filter(|w| *w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn c5_quantile_math() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let p = 0.001 + 0.998 * f64::from(i + 1) / 1001.0;
        let got = theoretical_quantile(p).map_err(|e| format!("{p}: {e}"))?;
        worst = worst.max((got - oracle_quantile(p)).abs());
    }
    if worst > 1e-9 {
        return Err(format!("max quantile error {worst:.2e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for case in 0..10_000 {
        let n = rng.random_range(1..60);
        let levels = rng.random_range(1..=n);
        let values: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) * 0.25).collect();
        let ranks = rank_average(&values);
        let want = brute_ranks(&values);
        if ranks != want {
            return Err(format!("rank mismatch on instance {case}: {values:?}"));
        }
        for &r in &ranks {
            let got = percentile_position(r, n as usize).map_err(|e| e.to_string())?;
            if got != (r - 0.5) / n as f64 {
                return Err(format!("percentile mismatch on instance {case}"));
            }
        }
    }
    Ok(format!("max |quantile − oracle| = {worst:.2e} on 1000 points; 10000 rank instances exact"))
}

fn c6_qq() -> Outcome {
    let n = 1000;
    let exact: Vec<f64> = (1..=n).map(|i| oracle_quantile((f64::from(i) - 0.5) / f64::from(n))).collect();
    let t = Thresholds::default();
    let normal = qq_test(&exact, &t).map_err(|e| e.to_string())?;
    let bimodal: Vec<f64> = exact.iter().map(|z| if *z < 0.0 { -3.0 + 0.3 * z } else { 3.0 + 0.3 * z }).collect();
    let split = qq_test(&bimodal, &t).map_err(|e| e.to_string())?;
    check(
        normal.r_squared >= 0.999 && normal.normal_consistent && !split.normal_consistent,
        format!(
            "normal: R² = {:.5}, consistent = {}; bimodal: R² = {:.4}, max dev = {:.3}, consistent = {}",
            normal.r_squared, normal.normal_consistent, split.r_squared, split.max_abs_deviation, split.normal_consistent
        ),
    )
}

fn c7_chance_six_player() -> Outcome {
    let config = SimConfig {
        game: Game::Rummy,
        table_size: 6,
        n_players: 12_000,
        games_per_player: 100,
        min_games_per_player: Some(30),
        mode: SimMode::Chance,
        seed: 707,
        ..SimConfig::default()
    };
    let (log, _) = round_trip(&config);
    let a = analyze(&log, &month_halves()).map_err(|e| e.to_string())?;
    let groups = &a.report.quantiles.groups;
    let means_ok = groups.iter().all(|g| (g.mean_win_rate - 1.0 / 6.0).abs() <= 0.01);
    let std_ok = groups.windows(2).all(|w| w[1].std_win_rate < w[0].std_win_rate);
    let rows: Vec<String> = groups
        .iter()
        .map(|g| format!("{}:{:.4}/{:.4}", g.cumulative_player_count, g.mean_win_rate, g.std_win_rate))
        .collect();
    check(means_ok && std_ok && groups.len() == 4, format!("groups (n:mean/std) {}", rows.join(" ")))
}

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gameskill"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn c8_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = |p: &str| dir.path().join(p).to_string_lossy().into_owned();
    let sim = |out: &str| {
        run_cli(&[
            "simulate", "--game", "poker", "--mode", "skill", "--players", "2000", "--games", "100", "--seed", "808",
            "--out", out,
        ])
    };
    sim(&path("sim1"))?;
    sim(&path("sim2"))?;
    let a = std::fs::read(path("sim1/poker.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(path("sim2/poker.csv")).map_err(|e| e.to_string())?;
    let truth_same = std::fs::read(path("sim1/ground_truth.json")).ok() == std::fs::read(path("sim2/ground_truth.json")).ok();
    let csv = path("sim1/poker.csv");
    let report = path("report");
    let analyze = || run_cli(&["analyze", "--game", "poker", &csv, "--seed", "9", "--out", &report]);
    analyze()?;
    let first = std::fs::read(path("report/verdict.json")).map_err(|e| e.to_string())?;
    analyze()?;
    let second = std::fs::read(path("report/verdict.json")).map_err(|e| e.to_string())?;
    let ingest: serde_json::Value =
        serde_json::from_str(&run_cli(&["ingest", "--game", "poker", &csv])?).map_err(|e| e.to_string())?;
    let rejected = ingest["total"]["rows_rejected"].as_u64();
    let accepted = ingest["total"]["rows_accepted"].as_u64();
    check(
        a == b && truth_same && first == second && rejected == Some(0) && accepted == Some(200_000),
        format!(
            "log identical = {}, truth identical = {truth_same}, verdict.json identical = {} ({} bytes), rows accepted = {accepted:?}, rejected = {rejected:?}",
            a == b,
            first == second,
            first.len()
        ),
    )
}

fn c9_pearson() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut worst_affine = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(3..200);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let scale = rng.random_range(0.01..100.0);
        let shift = rng.random_range(-1000.0..1000.0);
        let ax: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = pearson(&x, &y).map_err(|e| e.to_string())?;
        let ra = pearson(&ax, &y).map_err(|e| e.to_string())?;
        worst_affine = worst_affine.max((r - ra).abs());
        let self_r = pearson(&x, &x).map_err(|e| e.to_string())?;
        let neg_r = pearson(&x, &neg).map_err(|e| e.to_string())?;
        if self_r != 1.0 || neg_r != -1.0 {
            return Err(format!("case {case}: pearson(x,x) = {self_r}, pearson(x,-x) = {neg_r}"));
        }
    }
    check(
        worst_affine <= 1e-12,
        format!("1000 vectors: max affine drift {worst_affine:.2e}, self = 1 and negation = -1 exactly"),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 null-model soundness", c1_null_model),
        ("2 skill-model detection", c2_skill_model),
        ("3 heads-up oracle", c3_heads_up),
        ("4 learning-curve recovery", c4_learning_recovery),
        ("5 quantile math", c5_quantile_math),
        ("6 QQ self-consistency", c6_qq),
        ("7 chance 6P structure", c7_chance_six_player),
        ("8 pipeline determinism", c8_determinism),
        ("9 pearson properties", c9_pearson),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
