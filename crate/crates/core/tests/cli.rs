use std::path::Path;
use std::process::{Command, Output};

fn mia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mia-audit"))
        .args(args)
        .env_remove("MIA_AUDIT_BINS")
        .env_remove("MIA_AUDIT_METRIC")
        .output()
        .expect("binary runs")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn synth(dir: &Path, name: &str, seed: &str) -> String {
    let out = path(dir, name);
    let o = mia(&[
        "synth",
        "--n-member",
        "200",
        "--n-nonmember",
        "200",
        "--seed",
        seed,
        "--k",
        "4",
        "--out",
        &out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(mia(&["--help"]).status.code(), Some(0));
    assert_eq!(mia(&["--version"]).status.code(), Some(0));
    let help = mia(&["score", "--help"]);
    assert!(String::from_utf8_lossy(&help.stdout).contains("--pseudo-count"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(mia(&["attack", "--bogus"]).status.code(), Some(1));
    assert_eq!(mia(&["frobnicate"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let shadow = synth(dir.path(), "s.csv", "1");
    let o = mia(&[
        "score", "--shadow", &shadow, "--target", &shadow, "--metric", "corr",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let o = mia(&[
        "score",
        "--shadow",
        &shadow,
        "--target",
        &shadow,
        "--p-train",
        "1.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = path(dir.path(), "missing.csv");
    assert_eq!(
        mia(&["thresholds", "--shadow", &missing]).status.code(),
        Some(2)
    );

    let bad = path(dir.path(), "bad.csv");
    std::fs::write(&bad, "membership,label,p_0,p_1\nm,0,0.6,0.4\nn,1,0.7,0.7\n").unwrap();
    let o = mia(&["thresholds", "--shadow", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains('3'));

    let junk = path(dir.path(), "junk.csv");
    std::fs::write(&junk, "membership,label,p_0,p_1\nm,zero,0.6,0.4\n").unwrap();
    assert_eq!(
        mia(&["thresholds", "--shadow", &junk]).status.code(),
        Some(2)
    );

    let shadow = synth(dir.path(), "s.csv", "1");
    let o = mia(&["thresholds", "--shadow", &shadow, "--k", "7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let shadow = synth(d, "shadow.csv", "1");
    let target = synth(d, "target.jsonl", "2");
    assert!(std::fs::read_to_string(&target).unwrap().starts_with('{'));

    let o = mia(&[
        "attack",
        "--shadow",
        &shadow,
        "--target",
        &target,
        "--json",
        &path(d, "attack.json"),
    ]);
    assert!(o.status.success());
    let table = String::from_utf8(o.stdout).unwrap();
    assert!(table.contains("mentr") && table.contains("corr"));

    let o = mia(&[
        "score",
        "--shadow",
        &shadow,
        "--target",
        &target,
        "--out",
        &path(d, "scores.csv"),
        "--model-out",
        &path(d, "model.json"),
    ]);
    assert!(o.status.success());
    let scores = std::fs::read_to_string(d.join("scores.csv")).unwrap();
    assert!(scores.starts_with("id,label,mentr,risk_score\n"));
    assert_eq!(scores.lines().count(), 401);

    let o = mia(&[
        "calibrate",
        "--scores",
        &path(d, "scores.csv"),
        "--target",
        &target,
        "--plot",
        &path(d, "cal.dat"),
    ]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("rmse"));
    assert!(d.join("cal.dat").exists());

    let o = mia(&[
        "report",
        "--scores",
        &path(d, "scores.csv"),
        "--target",
        &target,
        "--out-dir",
        &path(d, "rep"),
    ]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("prior leakage distance"));
    for f in [
        "risk_cdf.csv",
        "risk_cdf.dat",
        "precision_recall.csv",
        "class_risk.csv",
    ] {
        assert!(d.join("rep").join(f).exists(), "{f}");
    }

    let small = path(d, "small.csv");
    let o = mia(&[
        "synth",
        "--n-member",
        "5",
        "--n-nonmember",
        "5",
        "--k",
        "4",
        "--out",
        &small,
    ]);
    assert!(o.status.success());
    let o = mia(&[
        "calibrate",
        "--scores",
        &path(d, "scores.csv"),
        "--target",
        &small,
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_selects_an_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let shadow = synth(d, "shadow.csv", "1");
    let mut args = vec!["sweep".to_string(), "--shadow".into(), shadow];
    for (epoch, seed) in [("1", "11"), ("5", "12"), ("9", "13")] {
        let t = synth(d, &format!("e{epoch}.csv"), seed);
        args.push("--snapshot".into());
        args.push(format!("{epoch}:{t}"));
    }
    args.extend([
        "--reference-acc".into(),
        "0.5".into(),
        "--csv".into(),
        path(d, "sweep.csv"),
    ]);
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = mia(&refs);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(d.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    assert_eq!(mia(&["sweep", "--snapshot", "x:y"]).status.code(), Some(1));
}

#[test]
fn environment_overrides_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let shadow = synth(dir.path(), "s.csv", "1");
    let model = |extra: &[&str], bins: Option<&str>| {
        let out = path(dir.path(), "m.json");
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_mia-audit"));
        cmd.args([
            "score",
            "--shadow",
            &shadow,
            "--target",
            &shadow,
            "--model-out",
            &out,
        ])
        .args(extra)
        .env_remove("MIA_AUDIT_BINS");
        if let Some(b) = bins {
            cmd.env("MIA_AUDIT_BINS", b);
        }
        assert!(cmd.output().unwrap().status.success());
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
        v["edges"].as_array().unwrap().len()
    };
    assert_eq!(model(&[], None), 20);
    assert_eq!(model(&[], Some("7")), 7);
    assert_eq!(model(&["--bins", "9"], Some("7")), 9);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = mia(&[
        "synth",
        "--n-member",
        "50",
        "--n-nonmember",
        "50",
        "--seed",
        "4",
    ]);
    let b = mia(&[
        "synth",
        "--n-member",
        "50",
        "--n-nonmember",
        "50",
        "--seed",
        "4",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = mia(&[
        "synth",
        "--n-member",
        "50",
        "--n-nonmember",
        "50",
        "--seed",
        "5",
    ]);
    assert_ne!(a.stdout, c.stdout);
}
