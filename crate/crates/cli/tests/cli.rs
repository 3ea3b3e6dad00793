use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cat0-vip"))
        .args(args)
        .env_remove("CAT0VIP_TOL_SCALE")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_builtin_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bc");
    let o = cli(&["run", "ball-constant", "--out", out.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    for f in ["summary.json", "trace.csv", "report.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["certified"], true);
    assert_eq!(summary["x"]["coords"], serde_json::json!([1.0, 0.0]));
    let csv = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(csv.starts_with("n,d_x_Tx,d_x_PTx,d_to_p,residual_sample,step_displacement"));
}

#[test]
fn summary_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let read = |name: &str| {
        let out = dir.path().join(name);
        let o = cli(&["run", "system-contractions", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out.join("summary.json")).unwrap()
    };
    assert_eq!(read("a"), read("b"));
}

#[test]
fn malformed_json_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"name\": \"x\",\n  \"problem\": [\n}").unwrap();
    let o = cli(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:4:"), "{err}");
}

#[test]
fn invalid_scenario_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let show = cli(&["show", "interior-contraction"]);
    let mut v: serde_json::Value = serde_json::from_slice(&show.stdout).unwrap();
    v["problem"]["x0"]["coords"] = serde_json::json!([5.0, 0.0]);
    let path = dir.path().join("outside.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = cli(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn one_iteration_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let show = cli(&["show", "interior-contraction"]);
    let mut v: serde_json::Value = serde_json::from_slice(&show.stdout).unwrap();
    v["problem"]["max_iter"] = serde_json::json!(1);
    let path = dir.path().join("short.json");
    std::fs::write(&path, v.to_string()).unwrap();
    let o = cli(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn scenario_file_round_trips_through_show() {
    let dir = tempfile::tempdir().unwrap();
    let show = cli(&["show", "halfspace-truncated"]);
    let path = dir.path().join("h.json");
    std::fs::write(&path, &show.stdout).unwrap();
    let out = dir.path().join("o");
    let o = cli(&[
        "run",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(Path::new(&out.join("report.txt")).exists());
}

#[test]
fn list_variants() {
    let text = stdout(&cli(&["list"]));
    assert!(text.lines().count() >= 8);
    let json: serde_json::Value = serde_json::from_slice(&cli(&["list", "--json"]).stdout).unwrap();
    assert!(json.as_array().unwrap().len() >= 8);
    let none = cli(&["list", "--json", "--filter", "no-such-scenario"]);
    assert_eq!(none.status.code(), Some(0));
    assert_eq!(stdout(&none).trim(), "[]");
}

#[test]
fn verify_single_suite() {
    let o = cli(&["verify", "--suite", "convex"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("convex"));
    assert!(!text.contains("geometry"));
}

#[test]
fn verify_fails_under_corrupted_tolerance() {
    let o = Command::new(env!("CARGO_BIN_EXE_cat0-vip"))
        .args(["verify", "--suite", "diagnostics"])
        .env("CAT0VIP_TOL_SCALE", "-1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAILED"));
}
