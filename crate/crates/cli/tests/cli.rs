use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gini-drm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Deterministic exponential-like sample with some zeros.
fn values(group: usize, n: usize) -> Vec<f64> {
    let rate = if group == 0 { 0.5 } else { 1.0 };
    (0..n)
        .map(|i| {
            if i % 5 == 0 {
                0.0
            } else {
                let u = (i as f64 + 0.5) / n as f64;
                let jitter = ((i * 7919 + group * 104729) % 97) as f64 / 970.0;
                -((1.0 - u).ln()) / rate + jitter
            }
        })
        .collect()
}

struct Files {
    _dir: TempDir,
    long: PathBuf,
    g0: PathBuf,
    g1: PathBuf,
}

fn files() -> Files {
    let dir = TempDir::new().unwrap();
    let long = dir.path().join("data.csv");
    let mut text = String::from("group,value\n");
    for g in 0..2 {
        for v in values(g, 60) {
            text.push_str(&format!("{g},{v}\n"));
        }
    }
    std::fs::write(&long, text).unwrap();
    let single = |g: usize| -> PathBuf {
        let p = dir.path().join(format!("g{g}.txt"));
        let body: String = values(g, 60).iter().map(|v| format!("{v}\n")).collect();
        std::fs::write(&p, format!("value\n{body}")).unwrap();
        p
    };
    let g0 = single(0);
    let g1 = single(1);
    Files { _dir: dir, long, g0, g1 }
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn estimate_reports_all_three_estimators() {
    let f = files();
    let j = json(&run(&["estimate", "--input", path(&f.long), "--basis", "log", "--format", "json"]));
    assert_eq!(j["schema_version"], 1);
    assert_eq!(j["command"], "estimate");
    let methods: Vec<&str> = j["estimates"].as_array().unwrap().iter().map(|e| e["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["DRM", "EMP", "JEL"]);
    for e in j["estimates"].as_array().unwrap() {
        for k in ["g0", "g1", "diff"] {
            let v = e[k].as_f64().unwrap();
            assert!(v.is_finite());
        }
        let diff = e["g0"].as_f64().unwrap() - e["g1"].as_f64().unwrap();
        assert!((diff - e["diff"].as_f64().unwrap()).abs() < 1e-12);
    }
    assert_eq!(j["fit"]["basis"], "log");
    assert!(j["fit"]["converged"].as_bool().unwrap());
    assert_eq!(j["fit"]["nu_hat"][0].as_f64().unwrap(), 0.2);
}

#[test]
fn single_column_files_match_long_input() {
    let f = files();
    let a = run(&["estimate", "--input", path(&f.long)]);
    let b = run(&["estimate", "--group0", path(&f.g0), "--group1", path(&f.g1)]);
    assert_eq!(json(&a)["estimates"], json(&b)["estimates"]);
}

#[test]
fn seeded_bootstrap_output_is_byte_identical() {
    let f = files();
    let args = [
        "ci", "--input", path(&f.long), "--methods", "NA-DRM,BT-DRM", "--level", "0.95", "--B", "199", "--seed", "7",
    ];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let j = json(&a);
    assert_eq!(j["seed"], 7);
    assert_eq!(j["B"], 199);
    let iv = j["intervals"].as_array().unwrap();
    assert_eq!(iv.len(), 6);
    for i in iv {
        assert!(i["lower"].as_f64().unwrap() <= i["upper"].as_f64().unwrap());
    }
    let other = run(&[
        "ci", "--input", path(&f.long), "--methods", "NA-DRM,BT-DRM", "--B", "199", "--seed", "8",
    ]);
    assert_ne!(a.stdout, other.stdout);
}

#[test]
fn simulate_tsv_mirrors_point_table() {
    let o = run(&["simulate", "--preset", "chisq-100-00", "--R", "20", "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# seed=1 R=20");
    let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
    assert_eq!(
        &header[5..],
        [
            "estimator",
            "G0_Bias_x1000",
            "G0_MSE_x1000",
            "G1_Bias_x1000",
            "G1_MSE_x1000",
            "DIFF_Bias_x1000",
            "DIFF_MSE_x1000"
        ]
    );
    let est: Vec<&str> = lines.map(|l| l.split('\t').nth(5).unwrap()).collect();
    assert_eq!(est, ["EMP", "JEL", "DRM"]);
    let again = run(&["simulate", "--preset", "chisq-100-00", "--R", "20", "--seed", "1", "--serial"]);
    assert_eq!(o.stdout, again.stdout);
}

#[test]
fn simulate_studies_in_json() {
    let ci = json(&run(&[
        "simulate", "--preset", "exp-100-33", "--study", "ci", "--methods", "NA-DRM,JEL", "--targets", "g0", "--R", "10",
        "--format", "json",
    ]));
    assert_eq!(ci["seed"], 0);
    assert_eq!(ci["summary"]["intervals"].as_array().unwrap().len(), 2);
    let t = json(&run(&[
        "simulate", "--family", "exp", "--nu", "0.3,0.3", "--n", "50,60", "--study", "test", "--R", "10", "--seed", "3",
        "--format", "json",
    ]));
    assert_eq!(t["summary"]["config"]["n"], serde_json::json!([50, 60]));
    assert_eq!(t["summary"]["tests"].as_array().unwrap().len(), 6);
}

#[test]
fn simulate_reads_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cell.conf");
    std::fs::write(&cfg, "preset = exp-100-00\nR = 5\nseed = 4\n").unwrap();
    let j = json(&run(&["simulate", "--config", path(&cfg), "--R", "6", "--format", "json"]));
    assert_eq!(j["summary"]["config"]["replications"], 6);
    assert_eq!(j["summary"]["config"]["seed"], 4);
    assert_eq!(j["summary"]["config"]["family"], "exp");
}

#[test]
fn fit_test_and_gof_commands() {
    let f = files();
    let fit = json(&run(&["fit", "--input", path(&f.long), "--basis", "identity"]));
    assert_eq!(fit["fit"]["theta_hat"].as_array().unwrap().len(), 2);
    let t = json(&run(&["test", "--input", path(&f.long), "--methods", "NA-DRM,JEL"]));
    assert_eq!(t["tests"][1]["method"], "JEL");
    let p = t["tests"][0]["p_value"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&p));
    let g = json(&run(&["gof", "--input", path(&f.long), "--B", "49", "--seed", "2"]));
    assert_eq!(g["seed"], 2);
    assert_eq!(g["test"]["method"], "GOF");
    let tsv = stdout(&run(&["fit", "--input", path(&f.long), "--format", "tsv"]));
    assert!(tsv.starts_with("parameter\tvalue\ntheta0\t"));
}

#[test]
fn usage_errors_exit_two() {
    let f = files();
    for args in [
        vec!["estimate", "--input", path(&f.long), "--group0", path(&f.g0), "--group1", path(&f.g1)],
        vec!["estimate", "--group0", path(&f.g0)],
        vec!["fit"],
        vec!["fit", "--input", path(&f.long), "--unknown"],
        vec!["ci", "--input", path(&f.long), "--methods", "XYZ"],
        vec!["fit", "--input", path(&f.long), "--basis", "cubic"],
        vec!["simulate", "--R", "10"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn computation_errors_exit_one_with_message() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = run(&["fit", "--input", path(&missing)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("cannot open"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "group,value\n0,1.0\n0,abc\n").unwrap();
    let o = run(&["fit", "--input", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not a number"));

    let few = dir.path().join("few.csv");
    std::fs::write(&few, "group,value\n0,1\n0,2\n1,0\n1,3\n").unwrap();
    assert_eq!(run(&["fit", "--input", path(&few)]).status.code(), Some(1));

    let o = run(&["simulate", "--preset", "chisq-100-00", "--R", "0"]);
    assert_eq!(o.status.code(), Some(1));
}
