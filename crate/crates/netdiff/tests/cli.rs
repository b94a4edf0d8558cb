mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{assert_schema, fixture};

fn netdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netdiff"))
        .args(args)
        .env("NETDIFF_THREADS", "2")
        .output()
        .unwrap()
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).unwrap()
}

fn read_json(path: &Path) -> serde_json::Value {
    json(&std::fs::read(path).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generated_graphs_feed_graph_stats() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g.csv");
    let out = netdiff(&[
        "gen-graph",
        "--model",
        "ba",
        "--n",
        "300",
        "--m",
        "2",
        "--seed",
        "4",
        "--out",
        p(&edges),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = netdiff(&["graph-stats", "--edges", p(&edges), "--n", "300"]);
    assert_eq!(out.status.code(), Some(0));
    let stats = json(&out.stdout);
    assert_schema("graph_stats.schema.json", &stats);
    assert_eq!(stats["n"], 300);

    let a = netdiff(&["gen-graph", "--n", "50", "--lambda", "2", "--seed", "9"]);
    let b = netdiff(&["gen-graph", "--n", "50", "--lambda", "2", "--seed", "9"]);
    assert!(a.status.success() && a.stdout == b.stdout);
    assert!(String::from_utf8_lossy(&a.stdout).starts_with("target,source\n"));
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("panel");
    let out = netdiff(&[
        "simulate",
        "--n",
        "400",
        "--delta",
        "1",
        "--seed",
        "2",
        "--truth-sims",
        "5000",
        "--out",
        p(&d),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let sidecar = read_json(&d.join("panel.json"));
    assert_schema("panel.schema.json", &sidecar);
    assert_eq!(sidecar["degree_stats"]["n"], 400);

    let (e, o, c) = (
        d.join("edges.csv"),
        d.join("outcomes.csv"),
        d.join("covariates.csv"),
    );
    let files = ["--edges", p(&e), "--outcomes", p(&o), "--covariates", p(&c)];
    let run = |extra: &[&str]| netdiff(&[&["estimate"], &files[..], extra].concat());
    let out = run(&["--draws", "500"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = json(&out.stdout);
    assert_schema("report.schema.json", &report);
    assert_eq!(report["variant"], "irr");
    assert_eq!(report["n"], 400);
    assert!(String::from_utf8_lossy(&out.stderr).contains("95% CI"));
    assert_eq!(run(&["--draws", "500"]).stdout, out.stdout);

    let plain = json(&run(&["--draws", "500", "--variant", "plain", "--alpha", "0.1"]).stdout);
    assert_schema("report.schema.json", &plain);
    assert_eq!(plain["variant"], "plain");

    let r = dir.path().join("r.json");
    let out = run(&[
        "--fit",
        "lasso",
        "--lambda",
        "0.01",
        "--draws",
        "300",
        "--out",
        p(&r),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_schema("report.schema.json", &read_json(&r));
}

#[test]
fn monte_carlo_runs_write_reports_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = netdiff(&[
        "mc",
        "--config",
        p(&fixture("mc_small.toml")),
        "--out",
        p(dir.path()),
        "--reps",
        "12",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = read_json(&dir.path().join("cell-000.json"));
    assert_schema("mc_report.schema.json", &report);
    assert_eq!(report["reps"], 12);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("cell,graph,n,delta,reps"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("er-small,ER(lambda=1),200,1,12,"));
    assert!(dir.path().join("checkpoints/cell-000.json").exists());

    // A rerun resumes from the checkpoint and reproduces the report.
    let again = netdiff(&[
        "mc",
        "--config",
        p(&fixture("mc_small.toml")),
        "--out",
        p(dir.path()),
        "--reps",
        "12",
    ]);
    assert!(again.status.success());
    assert_eq!(read_json(&dir.path().join("cell-000.json")), report);
}

#[test]
fn exit_codes_separate_bad_input_from_failures() {
    assert_eq!(netdiff(&[]).status.code(), Some(2));
    assert_eq!(
        netdiff(&["estimate", "--edges", "e.csv"]).status.code(),
        Some(2)
    );
    assert_eq!(netdiff(&["gen-graph", "--n", "ten"]).status.code(), Some(2));
    assert_eq!(netdiff(&["--help"]).status.code(), Some(0));
    assert_eq!(
        netdiff(&["graph-stats", "--edges", "/nonexistent/e.csv"])
            .status
            .code(),
        Some(2)
    );
    let m = fixture("manifest.toml");
    let out = netdiff(&["estimate", "--manifest", p(&m), "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    let mut bad = fixture("manifest.toml");
    bad.set_file_name("outcomes_missing.csv");
    let out = netdiff(&[
        "estimate",
        "--edges",
        p(&fixture("edges.csv")),
        "--outcomes",
        p(&bad),
        "--covariates",
        p(&fixture("covariates.csv")),
        "--missing",
        "error",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing field"));

    // Five nodes cannot support a probit fit: a runtime failure, not bad input.
    let out = netdiff(&["estimate", "--manifest", p(&m)]);
    assert_eq!(
        out.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
