use std::path::Path;
use std::process::{Command, Output};

fn glucoshield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glucoshield"))
        .args(args)
        .env_remove("GLUCO_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_writes_episode_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("ep");
    let o = glucoshield(&[
        "simulate",
        "--patient",
        "adolescent#003",
        "--type",
        "t2d_pump",
        "--seed",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    let line = stdout(&o);
    assert!(line.contains("adolescent#003") && line.contains("TIR"), "{line}");

    let csv = std::fs::read_to_string(out.join("episode.csv")).unwrap();
    let steps = csv.lines().count() - 1;
    assert!(steps > 0 && steps <= 288);
    let jsonl = std::fs::read_to_string(out.join("shield.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), steps);
    for l in jsonl.lines().take(5) {
        serde_json::from_str::<serde_json::Value>(l).unwrap();
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["tir_pct"].as_f64().unwrap() >= 0.0);
}

#[test]
fn simulate_rejects_unknown_patient() {
    let o = glucoshield(&["simulate", "--patient", "adult#042"]);
    assert!(!o.status.success());
    let o = glucoshield(&["simulate", "--shield", "magic"]);
    assert!(!o.status.success());
}

#[test]
fn verify_theorem_passes() {
    let text = stdout(&glucoshield(&["verify-theorem", "--trials", "2000", "--seed", "3"]));
    assert!(text.contains("within bound"), "{text}");
    assert!(text.contains("adversarial"));
}

#[test]
fn benchmark_from_small_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bench.toml");
    std::fs::write(
        &cfg,
        "types = [\"t1d\"]\ncohorts = [\"child\"]\neval_indices = [2]\nseeds = [1]\n\
         shields = [\"none\", \"rule_based\"]\nhorizon_days = 1\n",
    )
    .unwrap();
    let out = tmp.path().join("res");
    stdout(&glucoshield(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]));
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    assert!(out.join("patient_table.sha256").is_file());
}

#[test]
fn benchmark_with_missing_config_fails() {
    let o = glucoshield(&["benchmark", "--config", "/nonexistent/bench.toml"]);
    assert!(!o.status.success());
}

fn write_coeffs(path: &Path) {
    let mut s = String::from("patient_id,sample,w0,w1,w2\n");
    for (i, base) in [("a", [1.0, 0.0, 0.0]), ("b", [0.0, 1.0, 0.0]), ("c", [0.0, 0.0, 1.0])] {
        for k in 0..4 {
            let j = 0.05 * k as f64;
            s += &format!("{i},{k},{},{},{}\n", base[0] + j, base[1] + j, base[2] + j);
        }
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn analyze_coeffs_reports_consistency() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("coef.csv");
    write_coeffs(&path);
    let text = stdout(&glucoshield(&["analyze-coeffs", "--input", path.to_str().unwrap()]));
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["n_samples"], 12);
    assert_eq!(v["accuracy"].as_f64().unwrap(), 1.0);
    assert!(v["within_mean"].as_f64().unwrap() > v["between_mean"].as_f64().unwrap());
}
