use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn dlbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dlbound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const EXAMPLE: &[&str] = &[
    "bound",
    "--m",
    "16",
    "--d",
    "32",
    "--p",
    "0.5",
    "--q",
    "1",
    "--lambda",
    "1",
    "--n",
    "1000000",
    "--confidence",
    "0",
];

#[test]
fn bound_example_values() {
    let v = json(&dlbound(EXAMPLE));
    let beta = v["beta"].as_f64().unwrap();
    let eta = v["eta"].as_f64().unwrap();
    assert!((beta - 136.85331580851377).abs() / 136.85 < 1e-6, "{beta}");
    assert!((eta - 0.0987).abs() < 5e-5, "{eta}");
    for key in [
        "L_X",
        "C_X",
        "L_worst",
        "L",
        "log_covering",
        "epsilon_net",
        "tau",
        "gamma",
        "hoeffding_tail",
    ] {
        assert!(v[key].is_number(), "missing {key}");
    }
}

#[test]
fn bound_output_is_stable() {
    assert_eq!(dlbound(EXAMPLE).stdout, dlbound(EXAMPLE).stdout);
}

#[test]
fn numeric_flags_accept_decimal_integers() {
    let mut args = EXAMPLE.to_vec();
    args[2] = "16.0";
    args[12] = "1e6";
    assert_eq!(dlbound(&args).stdout, dlbound(EXAMPLE).stdout);
    args[2] = "16.5";
    let out = dlbound(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--m"));
}

#[test]
fn nonpositive_p_names_the_flag() {
    let mut args = EXAMPLE.to_vec();
    args[6] = "0";
    let out = dlbound(&args);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("--p"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn explicit_lipschitz_must_exceed_worst_case() {
    let mut args = EXAMPLE.to_vec();
    args.extend(["--L", "0.25"]);
    let out = dlbound(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--L"));
    args.pop();
    args.push("2");
    let v = json(&dlbound(&args));
    assert_eq!(v["L"].as_f64(), Some(2.0));
}

#[test]
fn unknown_and_missing_flags_exit_one_with_one_line() {
    for args in [
        vec!["bound", "--bogus", "1"],
        vec!["bound", "--m", "3"],
        vec!["frobnicate"],
    ] {
        let out = dlbound(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert_eq!(stderr(&out).trim().lines().count(), 1, "{}", stderr(&out));
    }
}

#[test]
fn small_n_warns() {
    let out = dlbound(&[
        "bound",
        "--m",
        "2",
        "--d",
        "2",
        "--p",
        "1",
        "--q",
        "1",
        "--lambda",
        "1",
        "--n",
        "2",
        "--confidence",
        "0",
    ]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
}

#[test]
fn samplesize_round_trips_through_bound() {
    let out = dlbound(&[
        "samplesize",
        "--target-eta",
        "0.1",
        "--m",
        "16",
        "--d",
        "32",
        "--p",
        "0.5",
        "--q",
        "1",
        "--lambda",
        "1",
        "--confidence",
        "0",
    ]);
    let v = json(&out);
    let n = v["n"].as_u64().unwrap();
    assert_eq!(n, 971648);
    assert!(v["eta_n"].as_f64().unwrap() <= 0.1);
    assert!(v["eta_n_minus_1"].as_f64().unwrap() > 0.1);
    let n_text = n.to_string();
    let prev_text = (n - 1).to_string();
    let at = |n: &str| {
        let mut args = EXAMPLE.to_vec();
        args[12] = n;
        json(&dlbound(&args))["eta"].as_f64().unwrap()
    };
    assert!(at(&n_text) <= 0.1);
    assert!(at(&prev_text) > 0.1);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn code_soft_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let dict = write(dir.path(), "dict.csv", "1,0\n0,1\n");
    let sig = write(dir.path(), "x.csv", "0.8\n0.1\n");
    let v = json(&dlbound(&[
        "code", "--signal", &sig, "--dict", &dict, "--p", "1", "--q", "1", "--lambda", "2",
    ]));
    let a: Vec<f64> = v["coeffs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    assert!((a[0] - 0.3).abs() < 1e-9 && a[1] == 0.0, "{a:?}");
    assert!((v["objective"].as_f64().unwrap() - 0.28).abs() < 1e-9);
}

#[test]
fn code_rejects_bad_files() {
    let dir = tempfile::tempdir().unwrap();
    let dict = write(dir.path(), "dict.csv", "1,0\n0,2\n");
    let sig = write(dir.path(), "x.csv", "0.8\n0.1\n");
    let out = dlbound(&[
        "code", "--signal", &sig, "--dict", &dict, "--p", "1", "--q", "1", "--lambda", "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let garbled = write(dir.path(), "bad.csv", "1,zero\n");
    let out = dlbound(&[
        "code", "--signal", &sig, "--dict", &garbled, "--p", "1", "--q", "1", "--lambda", "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let missing = dir.path().join("missing.csv");
    let out = dlbound(&[
        "code",
        "--signal",
        &sig,
        "--dict",
        missing.to_str().unwrap(),
        "--p",
        "1",
        "--q",
        "1",
        "--lambda",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn learn_writes_dictionary_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut rows = vec![String::new(); 3];
    for i in 0..20 {
        let t = i as f64 * 0.7;
        let v = [t.cos() * 0.6, t.sin() * 0.6, 0.3 * (i % 3) as f64 / 2.0];
        for (r, x) in rows.iter_mut().zip(v) {
            if !r.is_empty() {
                r.push(',');
            }
            r.push_str(&x.to_string());
        }
    }
    let data = write(dir.path(), "data.csv", &(rows.join("\n") + "\n"));
    let out_dir = dir.path().join("out");
    let args = [
        "learn",
        "--data",
        &data,
        "--d",
        "4",
        "--p",
        "1",
        "--q",
        "1",
        "--lambda",
        "5",
        "--iters",
        "8",
        "--seed",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ];
    let v = json(&dlbound(&args));
    assert!(v["iterations"].as_u64().unwrap() >= 1);
    let dict = std::fs::read_to_string(out_dir.join("dictionary.csv")).unwrap();
    assert_eq!(dict.lines().count(), 3);
    assert_eq!(dict.lines().next().unwrap().split(',').count(), 4);
    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next(), Some("iteration,objective"));
    let values: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] <= w[0] + 1e-8));

    let again = dir.path().join("again");
    let mut args2 = args.to_vec();
    let last = args2.len() - 1;
    args2[last] = again.to_str().unwrap();
    json(&dlbound(&args2));
    assert_eq!(
        std::fs::read(again.join("dictionary.csv")).unwrap(),
        dict.as_bytes()
    );
}

#[test]
fn experiment_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "exp.json",
        r#"{"dist": {"kind": "uniform-sphere", "m": 3, "seed": 4},
            "pen": {"p": 1, "q": 1, "lambda": 2}, "d": 4,
            "n_grid": [16, 32], "trials": 2, "holdout_n": 200, "random_dicts": 2}"#,
    );
    let out_dir = dir.path().join("exp");
    let out = dlbound(&[
        "experiment",
        "--config",
        &config,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    let v = json(&out);
    assert_eq!(v["rows"].as_u64(), Some(4));
    assert!(stderr(&out).contains("warning"));
    let csv = std::fs::read_to_string(out_dir.join("gap_curve.csv")).unwrap();
    assert_eq!(
        csv.lines().next(),
        Some("n,trial,train_F,holdout_F,gap,eta")
    );
    assert_eq!(csv.lines().count(), 5);
    let sidecar: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("gap_curve.csv.json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["seeds"]["master"].as_u64(), Some(4));

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"dist": {"kind": "uniform-sphere", "m": 3}, "pen": {"p": -1, "q": 1, "lambda": 2}, "d": 4, "n_grid": [16], "trials": 1}"#,
    );
    let out = dlbound(&[
        "experiment",
        "--config",
        &bad,
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn check_passes() {
    let out = dlbound(&["--threads", "1", "check"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(!text.contains("FAIL"));
}
