use std::path::Path;
use std::process::{Command, Output};

fn brsep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brsep")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fit_all_on_separated_toy() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "toy.csv", "y,x2\n1,0\n2,0\n0,1\n0,1\n");
    let out = brsep(&["fit", "--input", &f, "--family", "poisson", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let sub = &v["fits"][2];
    assert_eq!(sub["method"], "ML/sub");
    assert_eq!(sub["n_used"], 2);
    assert!((sub["parameters"][0]["estimate"].as_f64().unwrap() - 1.5f64.ln()).abs() < 1e-8);
    assert_eq!(v["fits"][0]["parameters"][1]["infinite"], true);

    let table = brsep(&["fit", "--input", &f, "--family", "poisson"]);
    let text = String::from_utf8(table.stdout).unwrap();
    assert!(text.contains("0.405 (0.577)"), "{text}");
}

#[test]
fn omission_without_separation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ns.csv", "y,x2\n1,0\n2,1\n0,1\n3,0.5\n");
    let out = brsep(&["fit", "--input", &f, "--family", "poisson", "--method", "ml-sst"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no separation detected"));
}

#[test]
fn bad_input_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let neg = write(dir.path(), "neg.csv", "y,x\n1,0\n-2,1\n3,2\n");
    assert_eq!(brsep(&["fit", "--input", &neg, "--family", "tobit"]).status.code(), Some(2));
    let missing = brsep(&["fit", "--input", &neg, "--family", "tobit", "--response", "z"]);
    assert_eq!(missing.status.code(), Some(2));
    let collinear = write(dir.path(), "col.csv", "y,a,b\n1,1,2\n2,2,4\n0,3,6\n4,4,8\n");
    assert_eq!(brsep(&["fit", "--input", &collinear, "--family", "poisson", "--method", "ml"]).status.code(), Some(4));
}

#[test]
fn iteration_cap_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "d.csv", "y,x\n1,0.1\n3,0.7\n0,0.2\n5,1.1\n2,0.4\n");
    let out = brsep(&["fit", "--input", &f, "--family", "poisson", "--method", "br", "--max-iter", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn detect_reports_direction() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "toy.csv", "y,x2\n1,0\n2,0\n0,1\n0,1\n");
    let out = brsep(&["detect", "--input", &f, "--family", "tobit"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("separated: yes") && text.contains("offending columns: x2"), "{text}");
}

#[test]
fn illustrate_is_repeatable() {
    for family in ["poisson", "tobit"] {
        let a = brsep(&["illustrate", "--family", family, "--seed", "5"]);
        let b = brsep(&["illustrate", "--family", family, "--seed", "5"]);
        assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout);
        let v: serde_json::Value =
            serde_json::from_slice(&brsep(&["illustrate", "--family", family, "--seed", "5", "--format", "json"]).stdout)
                .unwrap();
        let ll = |k: usize| v["fits"][k]["loglik"].as_f64().unwrap();
        assert!((ll(0) - ll(2)).abs() < 1e-4);
    }
}

#[test]
fn simulate_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("rec.csv");
    let out = brsep(&[
        "simulate", "--family", "poisson", "--reps", "20", "--grid-n", "25", "--grid-pi", "0.25", "--threads", "2",
        "--records", rec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let metrics = String::from_utf8(out.stdout).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("[1/1]"));
    assert_eq!(std::fs::read_to_string(rec).unwrap().lines().count(), 21);
}
