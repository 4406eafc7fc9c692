//! End-to-end checks of the `fsheat` binary: exit codes, output files,
//! determinism of CSV bodies and the table semantics.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn fsheat(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fsheat"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn run_with(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    fsheat(&args, cfg.parent().unwrap())
}

const LINEAR_CFG: &str = "experiment=linear-qv\nalpha=1.5\nn=256\nreplications=120\nseed=4\n";

#[test]
fn run_writes_csv_and_summary_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "lin.cfg", LINEAR_CFG);
    let out = dir.path().join("out");
    let res = run_with(&cfg, &out, &[]);
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("PASS ensemble-mean-within-3pct"), "{stdout}");

    let csv = std::fs::read_to_string(out.join("linear-qv.csv")).unwrap();
    assert!(csv.starts_with("alpha,n,m,replications,source,"), "{csv}");
    assert_eq!(csv.lines().count(), 2);

    let json = std::fs::read_to_string(out.join("linear-qv.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&json).unwrap();
    let mut keys: Vec<&str> = summary.as_object().unwrap().keys().map(|s| s.as_str()).collect();
    keys.sort_unstable();
    assert_eq!(keys, ["config", "experiment", "passed", "run_id", "wall_seconds"]);
    assert_eq!(summary["experiment"], "linear-qv");
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config"]["t2"], "1", "defaults are echoed");
    let id = summary["run_id"].as_str().unwrap();
    assert_eq!(id.len(), 12);
    assert!(id.chars().all(|c| c.is_ascii_hexdigit()));
}

#[test]
fn reruns_and_worker_counts_leave_the_csv_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "lin.cfg", LINEAR_CFG);
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    assert_eq!(run_with(&cfg, &a, &["--workers", "1"]).status.code(), Some(0));
    assert_eq!(run_with(&cfg, &b, &["--workers", "3"]).status.code(), Some(0));
    assert_eq!(run_with(&cfg, &c, &[]).status.code(), Some(0));
    let body = std::fs::read(a.join("linear-qv.csv")).unwrap();
    assert_eq!(body, std::fs::read(b.join("linear-qv.csv")).unwrap());
    assert_eq!(body, std::fs::read(c.join("linear-qv.csv")).unwrap());
}

#[test]
fn seed_and_reps_overrides_reach_the_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "lin.cfg", LINEAR_CFG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_with(&cfg, &a, &[]);
    run_with(&cfg, &b, &["--seed", "9", "--reps", "10"]);
    let base = std::fs::read_to_string(a.join("linear-qv.csv")).unwrap();
    let tweaked = std::fs::read_to_string(b.join("linear-qv.csv")).unwrap();
    assert_ne!(base, tweaked);
    assert!(tweaked.lines().nth(1).unwrap().starts_with("1.5,256,1,10,"), "{tweaked}");
}

#[test]
fn failed_contract_exits_one_with_the_named_assertion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "small.cfg",
        "experiment=linear-qv\nn=8\nreplications=2\nseed=1\n",
    );
    let res = run_with(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(1), "{res:?}");
    let stdout = String::from_utf8(res.stdout).unwrap();
    assert!(stdout.contains("FAIL ensemble-mean-within-3pct"), "{stdout}");
}

#[test]
fn invalid_drift_exits_two_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "experiment=estimate-mu\nmu=-1\n");
    let res = run_with(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2), "{res:?}");
    let stderr = String::from_utf8(res.stderr).unwrap();
    assert!(stderr.contains("mu"), "{stderr}");
}

#[test]
fn unknown_or_missing_keys_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_cfg(dir.path(), "unk.cfg", "experiment=linear-qv\nbogus_knob=3\n");
    let res = run_with(&unknown, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("bogus_knob"));

    let missing = write_cfg(dir.path(), "empty.cfg", "alpha=1.5\n");
    let res = run_with(&missing, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("experiment"));
}

#[test]
fn table_runs_every_cell_and_stays_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "tab.cfg",
        "experiment=linear-qv\nn=128\nreplications=60\nseed=2\ngrid.alpha=1.25;1.5;1.75\n",
    );
    let out = dir.path().join("out");
    let res = fsheat(
        &["table", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let csv = std::fs::read_to_string(out.join("linear-qv-table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("cell,alpha,"), "{csv}");
    for (i, alpha) in [(0, "1.25"), (1, "1.5"), (2, "1.75")] {
        let row = csv.lines().nth(i + 1).unwrap();
        assert!(row.starts_with(&format!("{i},{alpha},")), "{row}");
        assert!(row.ends_with(",true,"), "{row}");
    }

    let out2 = dir.path().join("out2");
    fsheat(
        &["table", "--config", cfg.to_str().unwrap(), "--out-dir", out2.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(
        std::fs::read(out.join("linear-qv-table.csv")).unwrap(),
        std::fs::read(out2.join("linear-qv-table.csv")).unwrap()
    );
}

#[test]
fn table_records_cell_errors_in_row_and_reports_the_worst_exit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "tab.cfg",
        "experiment=linear-qv\nn=64\nreplications=40\ngrid.alpha=1.5;2.5\n",
    );
    let out = dir.path().join("out");
    let res = fsheat(
        &["table", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(2), "{res:?}");
    let csv = std::fs::read_to_string(out.join("linear-qv-table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let bad_row = csv.lines().nth(2).unwrap();
    assert!(bad_row.starts_with("1,2.5,"), "{bad_row}");
    assert!(bad_row.contains(",false,"), "{bad_row}");
    assert!(bad_row.contains("alpha"), "{bad_row}");

    let json = std::fs::read_to_string(out.join("linear-qv-table.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(summary["passed"], false);
}

#[test]
fn empty_grid_writes_a_header_only_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tab.cfg", "experiment=rate\n");
    let out = dir.path().join("out");
    let res = fsheat(
        &["table", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(0), "{res:?}");
    let csv = std::fs::read_to_string(out.join("rate-table.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    assert_eq!(csv, "cell,alpha,n,m,replications,source,statistic_mean,target_mean,l1_error,slope,passed,error\n");
}

#[test]
fn oversized_grids_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let alphas: Vec<String> = (0..65).map(|i| format!("1.{:03}", 100 + i)).collect();
    let cfg = write_cfg(
        dir.path(),
        "tab.cfg",
        &format!("experiment=linear-qv\ngrid.alpha={}\n", alphas.join(";")),
    );
    let res = fsheat(
        &["table", "--config", cfg.to_str().unwrap(), "--out-dir", "out"],
        dir.path(),
    );
    assert_eq!(res.status.code(), Some(2), "{res:?}");
    assert!(String::from_utf8(res.stderr).unwrap().contains("64"), "cap named");
}

#[test]
fn malformed_config_lines_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.cfg", "experiment=linear-qv\njust a line\n");
    let res = run_with(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("line 2"));

    let dup = write_cfg(dir.path(), "dup.cfg", "experiment=linear-qv\nn=8\nn=16\n");
    let res = run_with(&dup, &dir.path().join("out"), &[]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8(res.stderr).unwrap().contains("duplicate"));
}
