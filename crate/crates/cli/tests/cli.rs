//! End-to-end runs of the binary.

use isoci::ci::pivotal_ci;
use isoci::isotonic::block_fit;
use isoci::models::grenander_fit;
use isoci::{DesignGrid, Lattice, Sample};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isoci")).current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn field(line: &str, k: usize) -> f64 {
    line.split(',').nth(k).unwrap().parse().unwrap()
}

/// A 4 x 3 lattice written in shuffled row order.
fn lattice_csv() -> (String, Sample) {
    let l = Lattice::regular(&[4, 3]).unwrap();
    let y: Vec<f64> = (0..l.len()).map(|i| ((i * 7) % 5) as f64 + i as f64 * 0.3).collect();
    let mut text = String::from("x1,x2,y\n");
    for i in (0..l.len()).rev() {
        let p = l.point(i);
        text.push_str(&format!("{},{},{}\n", p[0], p[1], y[i]));
    }
    (text, Sample::new(DesignGrid::Lattice(l), y).unwrap())
}

#[test]
fn regression_intervals_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (text, sample) = lattice_csv();
    write(dir.path(), "d.csv", &text);
    let out = stdout(&run(dir.path(), &["ci", "--data", "d.csv", "--sigma", "0.7", "--x0", "0.5,0.6666666666666666"]));
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x1,x2,estimate,lower,upper,half_width,critical_value,sigma_hat,block_count,method,warning"
    );
    let row = lines.next().unwrap();
    let x0 = [0.5, 2.0 / 3.0];
    let ci = pivotal_ci(&block_fit(&sample, &x0).unwrap(), 0.7, 1.80, 0.95);
    assert_eq!(field(row, 2), ci.center);
    assert_eq!(field(row, 3), ci.lower);
    assert_eq!(field(row, 4), ci.upper);
    assert!(row.ends_with(",pivotal,"));

    let all = stdout(&run(dir.path(), &["ci", "--data", "d.csv", "--variance", "local-block"]));
    assert_eq!(all.lines().count(), 1 + 12);
}

#[test]
fn critical_value_simulation_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate-critical-values", "--grid", "60", "--f0", "3*x", "--B", "1000", "--seed", "9"];
    let a = stdout(&run(dir.path(), &args));
    let b = stdout(&run(dir.path(), &[&args[..], &["--threads", "2"]].concat()));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap(), "d,delta,c,provenance,stderr,seed,B");
    let c05 = field(lines.next().unwrap(), 2);
    let c10 = field(lines.next().unwrap(), 2);
    assert!(c05 > c10 && c10 > 0.0);

    let o = run(dir.path(), &["simulate-critical-values", "--grid", "10x10", "--dim", "3", "--f0", "x1"]);
    assert_eq!(o.status.code(), Some(2));
}

const CONFIG: &str = r#"{
  "truth": "exp(2*x)",
  "grid": {"lattice": {"shape": [30]}},
  "replications": 200,
  "methods": ["pivotal", "oracle"],
  "seed": 17
}"#;

#[test]
fn coverage_outputs_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONFIG);
    let o = run(
        dir.path(),
        &["coverage", "--config", "c.json", "--out", "a.csv", "--summary", "s.csv", "--meta", "m.json", "--threads", "1"],
    );
    stdout(&o);
    stdout(&run(dir.path(), &["coverage", "--config", "c.json", "--out", "b.csv", "--threads", "3"]));
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 2 * 30);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert_eq!(meta["schema"], "isoci-coverage-v1");
    assert_eq!(meta["seed"], 17);
    assert_eq!(meta["config"]["replications"], 200);
    let summary = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(summary.starts_with("method,region,points,mean,median,sd,min,max\n"));
}

#[test]
fn experiment_variants_run() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "c.json", CONFIG);
    let cmp = stdout(&run(dir.path(), &["compare-estimators", "--config", "c.json", "--B", "20"]));
    assert!(cmp.contains("max_min_only"));
    let bw = stdout(&run(dir.path(), &["compare-bw", "--config", "c.json", "--B", "20"]));
    assert!(bw.contains("bw_lrt"));
    let len = stdout(&run(dir.path(), &["length-study", "--config", "c.json", "--B", "20", "--n", "50,200"]));
    assert_eq!(len.lines().next().unwrap(), "n,coverage,q1_length,median_length,q3_length,oracle_length,failures");
    assert_eq!(len.lines().count(), 3);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "bad.json", "{\n  \"truth\": \"x\",\n  \"replications\": 10,\n  \"colour\": 1\n}");
    let o = run(dir.path(), &["coverage", "--config", "bad.json"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("colour") && err.contains("line 4"), "{err}");

    write(dir.path(), "neg.json", r#"{"truth": "x", "grid": {"lattice": {"shape": [5]}}, "replications": 0}"#);
    let o = run(dir.path(), &["coverage", "--config", "neg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("replications"));

    let o = run(dir.path(), &["ci", "--data", "missing.csv"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["coverage"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn model_commands() {
    let dir = tempfile::tempdir().unwrap();
    let obs = [0.1, 0.3, 0.35, 0.8, 1.2, 1.9, 2.5];
    let text: String = std::iter::once("t\n".to_string()).chain(obs.iter().map(|v| format!("{v}\n"))).collect();
    write(dir.path(), "g.csv", &text);
    let out = stdout(&run(dir.path(), &["grenander-ci", "--data", "g.csv", "--x0", "0.5,1.0"]));
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(field(rows[0], 1), grenander_fit(&obs, 0.5).unwrap().value);
    assert!(field(rows[1], 2) >= 0.0);

    write(dir.path(), "cs.csv", "time,indicator\n0.1,0\n0.2,0\n0.4,1\n0.5,0\n0.7,1\n0.9,1\n");
    let out = stdout(&run(dir.path(), &["current-status-ci", "--data", "cs.csv"]));
    assert_eq!(out.lines().count(), 1 + 6);
    for row in out.lines().skip(1) {
        assert!(field(row, 2) >= 0.0 && field(row, 3) <= 1.0);
    }

    write(dir.path(), "p.csv", "subject,time,count\n1,0.2,1\n1,0.6,3\n2,0.4,0\n2,0.9,4\n3,0.5,2\n");
    let out = stdout(&run(dir.path(), &["panel-count-ci", "--data", "p.csv", "--x0", "0.5"]));
    assert_eq!(out.lines().count(), 2);

    write(dir.path(), "glm.csv", "x,y\n0.9,3\n0.1,0\n0.5,1\n0.3,1\n0.7,2\n");
    let out = stdout(&run(dir.path(), &["glm-ci", "--data", "glm.csv", "--family", "poisson", "--x0", "0.5"]));
    assert!(out.lines().nth(1).unwrap().contains(",glm,"));
    let o = run(dir.path(), &["glm-ci", "--data", "glm.csv", "--family", "bernoulli"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn likelihood_ratio_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("x,y\n");
    for i in 1..=40 {
        let x = i as f64 / 40.0;
        text.push_str(&format!("{x},{}\n", 2.0 * x + if i % 2 == 0 { 0.3 } else { -0.3 }));
    }
    write(dir.path(), "d.csv", &text);
    let out = stdout(&run(dir.path(), &["bw-ci", "--data", "d.csv", "--x0", "0.5", "--sigma", "0.3"]));
    let row = out.lines().nth(1).unwrap();
    let (est, lo, hi) = (field(row, 1), field(row, 2), field(row, 3));
    assert!(lo < est && est < hi, "{row}");
    assert_eq!(field(row, 5), 2.26916);
    let wider = stdout(&run(dir.path(), &["bw-ci", "--data", "d.csv", "--x0", "0.5", "--sigma", "0.3", "--ddelta", "4"]));
    let w = wider.lines().nth(1).unwrap();
    assert!(field(w, 2) <= lo && field(w, 3) >= hi);
}
