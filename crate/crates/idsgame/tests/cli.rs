use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use idsgame::simulate::{replay, GameTrace};
use idsgame_core::Status;

fn idsgame(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idsgame"))
        .args(args)
        .env("IDSGAME_OUT", out)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn scenario_inspect_prints_defense_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = idsgame(&["scenario-inspect", "--scenario", "1"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for row in ["[9,1,7,8,1]", "[9,7,1,8,1]", "[5,9,8,1,1]"] {
        assert!(text.contains(row), "{text}");
    }
}

#[test]
fn scenario_inspect_reads_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("line.json");
    fs::write(
        &path,
        r#"{"topology":{"node_count":3,"edges":[[0,1],[1,2]],"start_id":0,"data_id":2},"m":2,"w":4,"defense_rows":[[0,0,0],[1,2,3],[4,4,1]]}"#,
    )
    .unwrap();
    let o = idsgame(&["scenario-inspect", "--scenario", path.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("[4,4,1]"));
}

#[test]
fn eval_table_sums_to_games() {
    let dir = tempfile::tempdir().unwrap();
    let o = idsgame(&["eval", "--scenario", "3", "--games", "100", "--seed", "2"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let count = |label: &str| -> u32 {
        let line = text.lines().find(|l| l.starts_with(label)).unwrap();
        line[label.len()..].split_whitespace().next().unwrap().parse().unwrap()
    };
    assert_eq!(count("attacker wins") + count("defender wins") + count("draws"), 100);
    assert_eq!(count("total"), 100);
}

#[test]
fn simulate_writes_a_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = idsgame(&["simulate", "--scenario", "3", "--seed", "4"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    let trace: GameTrace = serde_json::from_str(&fs::read_to_string(dir.path().join("trace-seed-4.json")).unwrap()).unwrap();
    assert!(trace.outcome.is_terminal());
    assert_eq!(text.lines().filter(|l| l.starts_with("round")).count(), trace.rounds.len());
    assert!(text.contains(&format!("outcome: {:?}", trace.outcome)));
    let end = replay(&trace).unwrap();
    assert_eq!(end, trace.final_state);
}

#[test]
fn recon_only_attacker_draws_at_round_cap() {
    let dir = tempfile::tempdir().unwrap();
    let trace_path = dir.path().join("t.json");
    let o = idsgame(
        &["simulate", "--scenario", "1", "--attacker", "recon-only", "--max-rounds", "25", "--trace", trace_path.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success());
    let trace: GameTrace = serde_json::from_str(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(trace.outcome, Status::Draw);
    assert_eq!(trace.rounds.len(), 25);
}

#[test]
fn missing_inputs_fail_with_messages() {
    let dir = tempfile::tempdir().unwrap();
    let o = idsgame(&["simulate", "--attacker", "/nonexistent/attacker.json"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing checkpoint"));

    let o = idsgame(&["eval", "--attacker", "defend-minimal"], dir.path());
    assert!(!o.status.success());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"iterations": 0}"#).unwrap();
    let o = idsgame(&["train", "--config", bad.to_str().unwrap()], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("`iterations`"));

    let o = idsgame(&["plot", "/nonexistent.csv"], dir.path());
    assert!(!o.status.success());
}

#[test]
fn train_then_plot_and_evaluate_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"hidden": [8], "eval_games": 5, "hyperparams": {"batch_size": 30}, "wallclock": false}"#,
    )
    .unwrap();
    let run = dir.path().join("run");
    let o = idsgame(
        &["train", "--config", cfg.to_str().unwrap(), "--scenario", "3", "--algo", "ppo", "--iterations", "2", "--seeds", "1,2", "--out", run.to_str().unwrap()],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = run.join("seed-1").join("curve.csv");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 3);

    let svg = dir.path().join("p.svg");
    let o = idsgame(&["plot", csv.to_str().unwrap(), run.to_str().unwrap(), "--out", svg.to_str().unwrap()], dir.path());
    assert!(o.status.success());
    let text = fs::read_to_string(&svg).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 2);

    let cp = run.join("seed-1").join("iter-2").join("attacker.json");
    let o = idsgame(&["eval", "--scenario", "3", "--attacker", cp.to_str().unwrap(), "--games", "20"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = idsgame(&["eval", "--scenario", "3", "--defender", cp.to_str().unwrap()], dir.path());
    assert!(!o.status.success());

    let o = idsgame(&["selfplay", "--static-role", "defender"], dir.path());
    assert!(!o.status.success());
}
