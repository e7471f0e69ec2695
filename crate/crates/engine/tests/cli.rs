use std::path::Path;
use std::process::{Command, Output};

fn brain(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_brain"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .env_remove("BRAIN_PORT")
        .env_remove("BRAIN_DATA_DIR")
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "brain {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_then_replay_verifies_the_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let o = brain(
        &[
            "simulate",
            "--ticks",
            "70",
            "--inject",
            "60:0:5:5",
            "--approve-all",
            "--data-dir",
            "run",
        ],
        dir.path(),
    );
    let text = stdout(&o);
    assert!(text.contains("ticks=70"), "{text}");
    let o = brain(&["replay", "--data-dir", "run"], dir.path());
    assert!(stdout(&o).contains("matches replay"));
}

#[test]
fn percolate_prints_layers_and_saves_network() {
    let dir = tempfile::tempdir().unwrap();
    let o = brain(
        &["percolate", "--nodes", "300", "--coupling", "0", "--save", "net.json"],
        dir.path(),
    );
    let text = stdout(&o);
    assert!(text.starts_with("layer,nodes,S\nsupply,300,"));
    assert!(text.contains("giant_fraction="));
    let o = brain(&["percolate", "--network", "net.json"], dir.path());
    assert_eq!(stdout(&o), text);
}

#[test]
fn sweep_prints_both_branches() {
    let dir = tempfile::tempdir().unwrap();
    let o = brain(&["sweep", "--points", "6", "--delimiter", ";"], dir.path());
    let text = stdout(&o);
    assert!(text.starts_with("branch;param;S_1;S_2"));
    assert_eq!(text.lines().filter(|l| l.starts_with("down;")).count(), 6);
    assert_eq!(text.lines().filter(|l| l.starts_with("up;")).count(), 6);
}

#[test]
fn stream_gen_is_reproducible_and_evaluable() {
    let dir = tempfile::tempdir().unwrap();
    let a = stdout(&brain(
        &["stream", "gen", "--scale", "200000", "--seed", "3"],
        dir.path(),
    ));
    let b = stdout(&brain(
        &["stream", "gen", "--scale", "200000", "--seed", "3"],
        dir.path(),
    ));
    assert_eq!(a, b);
    assert!(a.starts_with("# seed=3\n# spec_hash="));
    brain(
        &[
            "stream", "gen", "--scale", "200000", "--kind", "gradual", "--out", "s.csv",
        ],
        dir.path(),
    );
    let curve = stdout(&brain(&["eval", "curve", "s.csv", "--window", "500"], dir.path()));
    assert!(curve.starts_with("window,start,end,accuracy,macro_recall,tpsr\n"));
    assert_eq!(curve.lines().count(), 1 + 2250_usize.div_ceil(500));
}

#[test]
fn eval_tasks_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        r#"{"input":"a","output":"x","gold":"x"}"#,
        r#"{"input":"b","output":"y","gold":"x"}"#,
        r#"{"input":"c","output":null,"gold":"x"}"#,
        r#"{"input":"d","output":"x","gold":"x"}"#,
    ];
    std::fs::write(dir.path().join("tasks.jsonl"), lines.join("\n")).unwrap();
    let o = brain(&["eval", "tasks", "tasks.jsonl"], dir.path());
    assert_eq!(stdout(&o).trim(), "tasks=4 tpcr=0.750000 tpsr=0.500000");
}
