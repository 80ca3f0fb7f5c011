use std::path::Path;
use std::process::{Command, Output};

fn gameskill(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gameskill")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> String {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec!["simulate", "--out", out_dir, "--seed", "21"];
    for (flag, default) in [("--players", "1000"), ("--games", "100")] {
        if !extra.contains(&flag) {
            args.extend([flag, default]);
        }
    }
    args.extend_from_slice(extra);
    let out = gameskill(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn verdict(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(dir.join("verdict.json")).unwrap()).unwrap()
}

#[test]
fn version_prints_and_exits_zero() {
    let out = gameskill(&["version"]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), format!("gameskill {}", env!("CARGO_PKG_VERSION")));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&gameskill(&[])), 2);
    assert_eq!(code(&gameskill(&["analyze", "--game", "poker"])), 2);
    assert_eq!(code(&gameskill(&["simulate", "--out", "x", "--mode", "luck"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let out = gameskill(&["simulate", "--out", dir.path().to_str().unwrap(), "--table-size", "5"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("table_size"));
}

#[test]
fn ingest_reports_stats_and_fails_on_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let printed = simulate(dir.path(), &["--game", "rummy", "--players", "50", "--games", "10"]);
    let csv = dir.path().join("rummy.csv");
    assert!(printed.contains("rummy.csv") && printed.contains("ground_truth.json"));

    let out = gameskill(&["ingest", "--game", "rummy", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["total"]["rows_accepted"], 500);
    assert_eq!(stats["total"]["rows_rejected"], 0);

    let missing = dir.path().join("missing.csv");
    let out = gameskill(&["ingest", "--game", "rummy", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "user,game\nu1,g1\n").unwrap();
    let out = gameskill(&["ingest", "--game", "poker", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["total"]["rows_accepted"], 0);
}

#[test]
fn analyze_separates_skill_from_chance() {
    let dir = tempfile::tempdir().unwrap();
    for (mode, expect_skill) in [("skill", true), ("chance", false)] {
        let sim = dir.path().join(mode);
        simulate(&sim, &["--mode", mode]);
        let report = dir.path().join(format!("{mode}-report"));
        let out = gameskill(&[
            "analyze",
            "--game",
            "poker",
            sim.join("poker.csv").to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
            "--bootstrap",
            "300",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let v = verdict(&report);
        assert_eq!(v["report"]["verdict"] == "skill_dominant", expect_skill, "{mode}");
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["manifest"]["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
        assert_eq!(v["manifest"]["data_time_range"]["start"], "2022-12-01T00:00:00.000Z");
        for name in ["persistence.csv", "learning.csv", "qq.csv", "quantiles.csv", "trajectories.csv"] {
            let mut r = csv::Reader::from_path(report.join(name)).unwrap();
            assert!(!r.headers().unwrap().is_empty(), "{name}");
            assert!(r.records().count() > 0, "{name}");
        }
    }
}

#[test]
fn analyze_flags_reach_the_report() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--game", "rummy", "--mode", "skill"]);
    let thresholds = dir.path().join("t.json");
    std::fs::write(&thresholds, r#"{"r_min": 0.95}"#).unwrap();
    let report = dir.path().join("report");
    let out = gameskill(&[
        "analyze",
        "--game",
        "rummy",
        dir.path().join("rummy.csv").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--split-date",
        "2023-01",
        "--bin-width",
        "20",
        "--thresholds",
        thresholds.to_str().unwrap(),
        "--bootstrap",
        "100",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = verdict(&report);
    assert_eq!(v["report"]["thresholds_used"]["r_min"], 0.95);
    assert_eq!(v["report"]["thresholds_used"]["trend_alpha"], 0.01);
    assert_eq!(v["report"]["learning"]["bin_width"], 20);
    assert_eq!(v["report"]["learning"]["metric"], "avg_points_lost_losing");
    assert_eq!(v["report"]["persistence"]["boundary"], "2023-01-01T00:00:00.000Z");
    assert_eq!(v["report"]["quantiles"]["k"], 4);
    // r is far below 0.95, so the stricter threshold rules out skill.
    assert_ne!(v["report"]["verdict"], "skill_dominant");
}

#[test]
fn insufficient_cohort_exits_four_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--players", "40", "--games", "20"]);
    let report = dir.path().join("report");
    let out = gameskill(&[
        "analyze",
        "--game",
        "poker",
        dir.path().join("poker.csv").to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 4);
    assert!(String::from_utf8_lossy(&out.stderr).contains("insufficient"));
    assert!(!report.join("verdict.json").exists());
}

#[test]
fn skill_without_spread_matches_chance_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    simulate(&a, &["--mode", "chance", "--players", "200", "--games", "20"]);
    simulate(
        &b,
        &["--mode", "skill", "--skill-sd", "0", "--learning-b", "0", "--vpip-end", "0.5", "--players", "200", "--games", "20"],
    );
    assert_eq!(std::fs::read(a.join("poker.csv")).unwrap(), std::fs::read(b.join("poker.csv")).unwrap());
}
