use std::fs;
use std::path::Path;
use std::process::Command;

use gestural::diagnostics::{read_tokens_csv, write_tokens_csv, AnalysisSettings};
use gestural::harness::{analyze_file, run_scenario, simulate_to_dir, ScenarioConfig};
use gestural::Preset;

fn small_config() -> ScenarioConfig {
    ScenarioConfig {
        n_speakers: 2,
        tokens_per_condition: 30,
        n_perm: 300,
        ..ScenarioConfig::default()
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gestural"))
}

#[test]
fn token_csv_round_trips() {
    let run = run_scenario(&small_config()).unwrap();
    let mut bytes = Vec::new();
    write_tokens_csv(&run.tokens, &mut bytes).unwrap();
    let back = read_tokens_csv(bytes.as_slice()).unwrap();
    assert_eq!(back, run.tokens);
}

#[test]
fn analyze_reproduces_simulate_report() {
    let cfg = small_config();
    let dir = tempfile::tempdir().unwrap();
    let run = simulate_to_dir(&cfg, dir.path()).unwrap();
    for f in ["tokens.csv", "summary.csv", "report.json", "scatter.svg", "lag_boxplot.svg", "tb_boxplot.svg"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    // One file per speaker and condition.
    assert_eq!(dir.path().join("trajectories").read_dir().unwrap().count(), 6);

    let settings: AnalysisSettings = cfg.analysis_settings();
    let out = dir.path().join("reanalysis");
    let again = analyze_file(&dir.path().join("tokens.csv"), &settings, &out).unwrap();
    assert_eq!(again.summary, run.report.analysis.summary);
    assert_eq!(again.lag_contrast, run.report.analysis.lag_contrast);
    assert_eq!(
        fs::read(dir.path().join("summary.csv")).unwrap(),
        fs::read(out.join("summary.csv")).unwrap()
    );
}

#[test]
fn intervals_fall_in_plausible_ranges() {
    let run = run_scenario(&small_config()).unwrap();
    for t in run.tokens.iter().filter(|t| !t.excluded) {
        let d = t.g1_duration_ms.unwrap();
        assert!((80.0..=400.0).contains(&d), "duration {d}");
        if t.condition != Preset::Sequence {
            let lag = t.lag_ms.unwrap();
            assert!((-20.0..=150.0).contains(&lag), "lag {lag}");
        }
    }
}

fn write_config(dir: &Path, cfg: &ScenarioConfig) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string(cfg).unwrap()).unwrap();
    path
}

#[test]
fn cli_simulate_then_parse_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("run");
    let status = bin().args(["simulate", "--config"]).arg(&config).arg("--out").arg(&out).status().unwrap();
    assert!(status.success());

    let traj = fs::read_dir(out.join("trajectories")).unwrap().next().unwrap().unwrap().path();
    let parsed = bin()
        .args(["parse", "--input"])
        .arg(&traj)
        .args(["--channel", "LA", "--window-ms", "0:1195", "--direction", "dec"])
        .output()
        .unwrap();
    assert!(parsed.status.success(), "{}", String::from_utf8_lossy(&parsed.stderr));
    let text = String::from_utf8(parsed.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("channel,onset_ms,target_ms,release_ms,offset_ms,pv_to,pv_away"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "LA");
    let onset: f64 = row[1].parse().unwrap();
    let offset: f64 = row[4].parse().unwrap();
    assert!(onset < offset);

    let again = dir.path().join("again");
    let status = bin()
        .args(["analyze", "--n-perm", "300", "--tokens"])
        .arg(out.join("tokens.csv"))
        .arg("--out")
        .arg(&again)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(fs::read(out.join("summary.csv")).unwrap(), fs::read(again.join("summary.csv")).unwrap());
}

#[test]
fn cli_plan_prints_phases() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("graph.json");
    let g = gestural::coupling::c_center_graph(1.0, 1.0);
    fs::write(&graph, serde_json::to_string(&g).unwrap()).unwrap();
    for method in ["ls", "osc"] {
        let out = bin().args(["plan", "--method", method, "--graph"]).arg(&graph).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        assert!(text.starts_with("node,psi_rad,onset_ms"));
        let c2: f64 = text
            .lines()
            .find(|l| l.starts_with("C2,"))
            .and_then(|l| l.split(',').nth(1))
            .unwrap()
            .parse()
            .unwrap();
        assert!((c2 - std::f64::consts::FRAC_PI_3).abs() < 1e-3, "{method}: {c2}");
    }
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bin()
        .args(["simulate", "--config"])
        .arg(dir.path().join("nope.json"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(missing.code(), Some(2));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"n_speakers": 2, "colour": "red"}"#).unwrap();
    let unknown = bin().args(["simulate", "--config"]).arg(&bad).arg("--out").arg(dir.path()).status().unwrap();
    assert_eq!(unknown.code(), Some(2));

    let no_tokens = bin()
        .args(["analyze", "--tokens"])
        .arg(dir.path().join("none.csv"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(no_tokens.code(), Some(3));
}
