use std::path::Path;
use std::process::{Command, Output};

fn awd(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_awd"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&ok(out)).unwrap()
}

#[test]
fn distance_of_a_tree_to_itself_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    ok(&awd(&["gen", "walk", "--N", "3", "--sigma", "0.5,1,2", "-o", "a.json"], dir.path()));
    let d = json(&awd(&["dist", "--p", "2", "--method", "lp", "a.json", "a.json"], dir.path()));
    assert!(d["value"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn methods_agree_on_walks_and_coupling_is_written() {
    let dir = tempfile::tempdir().unwrap();
    ok(&awd(&["gen", "walk", "--N", "2", "--sigma", "0.5,1.5", "-o", "a.json"], dir.path()));
    ok(&awd(&["gen", "walk", "--N", "2", "-o", "b.json"], dir.path()));
    let value = |method: &str| {
        json(&awd(&["dist", "--p", "2", "--method", method, "--coupling", "pi.csv", "a.json", "b.json"], dir.path()))["value"]
            .as_f64()
            .unwrap()
    };
    for method in ["lp", "dp", "sync"] {
        assert!((value(method) - 0.5).abs() < 1e-9, "{method}");
    }
    let csv = std::fs::read_to_string(dir.path().join("pi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn scaling_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let rep = json(&awd(&["verify", "scaling", "--N", "4"], dir.path()));
    assert!(rep["max_abs_err"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn gbm_check_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    ok(&awd(
        &["verify", "gbm", "--format", "csv", "-o", "gbm.csv", "--plot", "gbm.svg"],
        dir.path(),
    ));
    let csv = std::fs::read_to_string(dir.path().join("gbm.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("N,sync_cost,lattice_closed_form,limit,rel_err"));
    let errs: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(errs.len(), 3);
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    let svg = std::fs::read_to_string(dir.path().join("gbm.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
}

#[test]
fn sweeps_are_identical_across_runs_and_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |workers: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_awd"))
            .args(["verify", "whi", "--instances", "12", "--seed", "7"])
            .env("AWD_WORKERS", workers)
            .current_dir(dir.path())
            .output()
            .unwrap();
        ok(&out)
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("4"));
    assert!(one.contains("\"violations\": 0"));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"horizon\": 1}").unwrap();
    assert_eq!(awd(&["seminorm", "bad.json"], dir.path()).status.code(), Some(2));
    assert_eq!(awd(&["seminorm", "missing.json"], dir.path()).status.code(), Some(2));
    ok(&awd(&["gen", "gbm", "--N", "2", "--sigma", "0.2", "-o", "g.json"], dir.path()));
    let out = awd(&["hedge", "avar", "--claim", "put:1", "g.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown claim"));
    assert_eq!(
        awd(&["hedge", "utility", "--utility", "exp:-1", "g.json"], dir.path()).status.code(),
        Some(2)
    );
}

#[test]
fn generated_trees_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    ok(&awd(&["gen", "diffusion", "--N", "3", "--mu", "0.3", "-o", "d.json"], dir.path()));
    let text = std::fs::read_to_string(dir.path().join("d.json")).unwrap();
    let tree = awd_core::scenario::ScenarioTree::from_json(&text).unwrap();
    assert_eq!(tree.to_json().unwrap() + "\n", text);
    let csv = ok(&awd(&["gen", "diffusion", "--N", "3", "--mu", "0.3", "--format", "csv"], dir.path()));
    assert_eq!(csv.lines().next(), Some("x0,x1,x2,x3,prob"));
    assert_eq!(csv.lines().count(), 1 + tree.leaves().len());
}

#[test]
fn counterexample_files_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let files = json(&awd(&["gen", "counterexamples", "--dir", "cex"], dir.path()));
    assert_eq!(files["pairs"].as_array().unwrap().len(), 4);
    assert!(dir.path().join("cex/remark51_p.json").exists());
    let rep = json(&awd(&["verify", "counterexamples", "--n", "20"], dir.path()));
    let r51 = &rep["remark51"];
    assert!((r51["utility_gap"].as_f64().unwrap() - 0.45).abs() < 1e-6);
    assert_eq!(r51["claimed_gap_reached"], false);
}

#[test]
fn hedge_and_projection_reports() {
    let dir = tempfile::tempdir().unwrap();
    ok(&awd(&["gen", "walk", "--N", "2", "-o", "a.json"], dir.path()));
    ok(&awd(&["gen", "walk", "--N", "2", "--sigma", "0.8", "-o", "b.json"], dir.path()));
    let h = json(&awd(&["hedge", "avar", "--claim", "call:0", "--alpha", "0.2", "a.json"], dir.path()));
    assert_eq!(h["constants"]["b1"], 6.0);
    std::fs::write(dir.path().join("h.json"), h["strategy"].to_string()).unwrap();
    let p = json(&awd(&["project", "--strategy", "h.json", "a.json", "b.json"], dir.path()));
    assert!(p["conditional_gain_defect"].as_f64().unwrap() < 1e-9);
    let k = h["strategy"]["bound"].as_f64().unwrap();
    assert!(p["projected"]["positions"]
        .as_array()
        .unwrap()
        .iter()
        .all(|x| x.as_f64().unwrap().abs() <= k + 1e-12));
}

#[test]
fn failed_assertion_exits_with_three_after_reporting() {
    let dir = tempfile::tempdir().unwrap();
    // Coarser lattice last, so the error grows.
    let out = awd(&["verify", "gbm", "--N", "50,25"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["errors_decreasing"], false);
}
