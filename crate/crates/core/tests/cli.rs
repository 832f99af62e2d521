use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_philaex"));
    c.env_remove("PHILAEX_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out-dir").arg(dir).args(args).output().unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(p: PathBuf) -> String {
    fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Small generated corpus plus a trained forest.
fn setup(kind: &str) -> TempDir {
    let d = TempDir::new().unwrap();
    let p = d.path();
    ok(&run(p, &["generate", "--malicious", "150", "--benign", "150", "--features", "30", "--markers", "6"]));
    ok(&run(p, &["train", "--data", p.join("data.csv").to_str().unwrap(), "--model-kind", kind, "--trees", "20"]));
    d
}

fn path(d: &TempDir, name: &str) -> String {
    d.path().join(name).to_str().unwrap().to_owned()
}

#[test]
fn train_writes_model_and_metrics() {
    let d = setup("forest");
    let m: serde_json::Value = serde_json::from_str(&read(d.path().join("metrics.json"))).unwrap();
    for k in ["tpr", "fpr", "accuracy"] {
        assert!(m[k].as_f64().is_some(), "{m}");
    }
    assert!(m["accuracy"].as_f64().unwrap() > 0.8);
    assert!(d.path().join("model.json").exists());
}

#[test]
fn separable_token_lists_train_perfectly() {
    let d = TempDir::new().unwrap();
    let rows: String = (0..40)
        .map(|i| if i % 2 == 0 { format!("1 evil common{}\n", i % 3) } else { format!("0 good common{}\n", i % 3) })
        .collect();
    fs::write(d.path().join("toy.txt"), rows).unwrap();
    ok(&run(d.path(), &["train", "--data", &path(&d, "toy.txt"), "--model-kind", "logistic", "--epochs", "300", "--lr", "1"]));
    let m: serde_json::Value = serde_json::from_str(&read(d.path().join("metrics.json"))).unwrap();
    assert_eq!(m["tpr"].as_f64(), Some(1.0));
    assert_eq!(m["fpr"].as_f64(), Some(0.0));
}

#[test]
fn explain_is_byte_identical_and_timed() {
    let d = setup("forest");
    let args = ["explain", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--limit", "8", "--seed", "3", "--timing"];
    let first = run(d.path(), &args);
    ok(&first);
    let a = read(d.path().join("reports.jsonl"));
    ok(&run(d.path(), &args));
    assert_eq!(a, read(d.path().join("reports.jsonl")));
    assert_eq!(a.lines().count(), 8);
    let r: serde_json::Value = serde_json::from_str(a.lines().next().unwrap()).unwrap();
    for k in ["sample_id", "original_score", "selected", "intercept", "core", "positive"] {
        assert!(r.get(k).is_some(), "{k} missing");
    }
    assert!(String::from_utf8_lossy(&first.stderr).contains("median explanation time"));
}

#[test]
fn thread_count_does_not_change_output() {
    let d = setup("forest");
    let base = ["explain", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--limit", "12"];
    ok(&bin().arg("--out-dir").arg(d.path()).arg("--jobs").arg("1").args(base).output().unwrap());
    let one = read(d.path().join("reports.jsonl"));
    ok(&bin().arg("--out-dir").arg(d.path()).arg("--jobs").arg("4").args(base).output().unwrap());
    assert_eq!(one, read(d.path().join("reports.jsonl")));
}

#[test]
fn dimension_mismatch_names_the_sample() {
    let d = setup("logistic");
    fs::write(d.path().join("small.csv"), "label,a,b\n1,1,0\n0,0,1\n").unwrap();
    let out = run(d.path(), &["explain", "--model", &path(&d, "model.json"), "--data", &path(&d, "small.csv"), "--split", "all"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sample 0") && err.contains("dimension mismatch"), "{err}");
}

#[test]
fn attack_count_zero_and_missing_model() {
    let d = setup("forest");
    let out = run(d.path(), &["attack", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--count", "0"]);
    ok(&out);
    assert_eq!(read(d.path().join("attacks.jsonl")), "");
    let out = run(d.path(), &["attack", "--model", &path(&d, "absent.json"), "--data", &path(&d, "data.csv")]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.json"));
}

#[test]
fn attack_then_good_explanation_sweep() {
    let d = setup("forest");
    ok(&run(d.path(), &["attack", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--count", "5"]));
    let attacks = read(d.path().join("attacks.jsonl"));
    assert_eq!(attacks.lines().count(), 5);
    for line in attacks.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["final_score"].as_f64().unwrap() > 0.5);
    }
    ok(&run(
        d.path(),
        &["evaluate", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--mode", "good-explanation", "--attacks", &path(&d, "attacks.jsonl")],
    ));
    let csv = read(d.path().join("curves.csv"));
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("parameter,metric,method,mode"));
    for m in ["philaex", "random", "lime"] {
        assert_eq!(csv.lines().filter(|l| l.contains(&format!(",{m},"))).count(), 10, "{csv}");
    }
    let json: serde_json::Value = serde_json::from_str(&read(d.path().join("curves.json"))).unwrap();
    assert_eq!(json["curves"].as_array().unwrap().len(), 3);
    assert!(json["good_explanation"][0]["at_least_one_rate"].is_number());
}

#[test]
fn evaluate_usage_errors() {
    let d = setup("forest");
    let m = path(&d, "model.json");
    let data = path(&d, "data.csv");
    let cases: [&[&str]; 3] = [
        &["evaluate", "--model", &m, "--data", &data, "--mode", "deduction", "--methods", "philaex,shap"],
        &["evaluate", "--model", &m, "--data", &data, "--mode", "deduction", "--ks", "5,1"],
        &["evaluate", "--model", &m, "--data", &data, "--mode", "good-explanation"],
    ];
    for args in cases {
        assert_eq!(run(d.path(), args).status.code(), Some(2), "{args:?}");
    }
    assert_eq!(bin().args(["explain", "--bogus"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn deduction_curve_covers_requested_ks() {
    let d = setup("logistic");
    ok(&run(
        d.path(),
        &["evaluate", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--mode", "deduction", "--methods", "philaex,random", "--ks", "1,2,40"],
    ));
    let csv = read(d.path().join("curves.csv"));
    let params: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(params, ["1", "2", "40", "1", "2", "40"]);
}

#[test]
fn replay_reproduces_outputs() {
    let d = setup("forest");
    ok(&run(d.path(), &["explain", "--model", &path(&d, "model.json"), "--data", &path(&d, "data.csv"), "--limit", "4", "--seed", "9"]));
    let original = read(d.path().join("reports.jsonl"));
    let echo = d.path().join("run_config.json");
    let other = TempDir::new().unwrap();
    ok(&run(other.path(), &["replay", "--config", echo.to_str().unwrap()]));
    assert_eq!(original, read(other.path().join("reports.jsonl")));
    assert_eq!(read(echo), read(other.path().join("run_config.json")));
}

#[test]
fn out_dir_comes_from_the_environment() {
    let d = TempDir::new().unwrap();
    let out = bin()
        .env("PHILAEX_OUT_DIR", d.path())
        .args(["generate", "--malicious", "5", "--benign", "5", "--features", "4", "--markers", "1"])
        .output()
        .unwrap();
    ok(&out);
    assert!(d.path().join("data.csv").exists());
    assert!(d.path().join("run_config.json").exists());
}

#[test]
fn external_scorer_over_stdio() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("data.csv"), "label,a,b,c\n1,1,0,1\n0,0,1,0\n").unwrap();
    let script = d.path().join("scorer.sh");
    fs::write(&script, "#!/bin/sh\nexec sed -u 's/^{\"id\":\\([0-9]*\\).*/{\"id\":\\1,\"score\":0.7}/'\n").unwrap();
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&script, fs::Permissions::from_mode(0o755)).unwrap();
    }
    ok(&run(d.path(), &["explain", "--external-cmd", script.to_str().unwrap(), "--data", &path(&d, "data.csv")]));
    let reports = read(d.path().join("reports.jsonl"));
    assert_eq!(reports.lines().count(), 2);
    let r: serde_json::Value = serde_json::from_str(reports.lines().next().unwrap()).unwrap();
    assert_eq!(r["original_score"].as_f64(), Some(0.7));
    // a constant scorer leaves nothing to attribute
    assert_eq!(r["selected"].as_array().unwrap().len(), 0);
}
