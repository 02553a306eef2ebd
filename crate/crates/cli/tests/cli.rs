//! End-to-end checks of the command-line pipeline on the bundled sample
//! session and on hand-built fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qrh"))
}

fn sample_csv() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/sample_l1.csv")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qrh-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, input: &Path, extra: &str) -> PathBuf {
    let out = dir.join("out");
    let text = format!(
        r#"{{
  "input_csv": "{}",
  "betas": [0.8, 4.0, 20.0],
  "q_max": 5,
  "n_buckets": 3,
  "min_events_per_segment": 20,
  "tol": 1e-6,
  "max_iter": 4000,
  "seed": 9,
  "horizon": 5000.0,
  "burn_in": 100.0,
  "initial_queue": 2,
  "out_dir": "{}"{}
}}"#,
        input.display(),
        out.display(),
        extra
    );
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn preprocess_is_deterministic_and_counts_match() {
    let dir = scratch("preprocess");
    let config = write_config(&dir, &sample_csv(), "");
    let out = dir.join("out");

    let status = bin()
        .args(["preprocess", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());

    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    // Line-count oracle: data rows in the input.
    let n_lines = std::fs::read_to_string(sample_csv())
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(summary["n_records"].as_u64().unwrap() as usize, n_lines);
    // Event-file line counts agree with the summary.
    let ev_lines = std::fs::read_to_string(out.join("events3.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(
        summary["segment_events"].as_u64().unwrap() as usize,
        ev_lines
    );

    // Rerun into a second directory: byte-identical outputs.
    let out2 = dir.join("out2");
    let status = bin()
        .args(["preprocess", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out2)
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["summary.json", "segments.csv", "events3.csv", "events8.csv", "grid.json"] {
        let a = std::fs::read(out.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between reruns");
    }
}

/// Hand-built session: eleven 5-lot limit/cancel cycles on the bid, so
/// AES = 5, the queue alternates between 2 and 3 AES units, and the
/// queue-reactive rates are exactly 1.0 by the count/time table.
#[test]
fn qr_fit_matches_hand_computed_table() {
    let dir = scratch("qrfit");
    let mut csv = String::from("ts,bid_px,bid_sz,ask_px,ask_sz,trade_sz,trade_side\n");
    csv.push_str("0.000000,100,10,101,50,0,none\n");
    for k in 1..=22 {
        let sz = if k % 2 == 1 { 15 } else { 10 };
        csv.push_str(&format!("{k}.000000,100,{sz},101,50,0,none\n"));
    }
    let input = dir.join("tiny.csv");
    std::fs::write(&input, csv).unwrap();
    let config = write_config(&dir, &input, "");

    let status = bin()
        .args(["fit", "--model", "qr", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());

    let model: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/model-qr.json")).unwrap(),
    )
    .unwrap();
    let mu = &model["params"]["mu"];
    // 11 limit orders over 11 seconds in state 2; 11 cancels over 11
    // seconds in state 3; everything else zero.
    assert_eq!(mu[0][2].as_f64().unwrap(), 1.0);
    assert_eq!(mu[1][3].as_f64().unwrap(), 1.0);
    assert_eq!(mu[0][3].as_f64().unwrap(), 0.0);
    assert_eq!(mu[1][2].as_f64().unwrap(), 0.0);
    assert_eq!(mu[2][2].as_f64().unwrap(), 0.0);
    assert_eq!(model["aes"].as_f64().unwrap(), 5.0);
}

#[test]
fn model_documents_roundtrip_bit_exact() {
    let dir = scratch("roundtrip");
    let config = write_config(&dir, &sample_csv(), "");
    let out = dir.join("out");
    for model in ["qr", "qrh2-mle"] {
        let status = bin()
            .args(["fit", "--model", model, "--config"])
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success(), "fit {model} failed");
    }
    for name in ["model-qr.json", "model-qrh2-mle.json"] {
        // Every float survives a parse/serialize cycle exactly; the
        // typed bit-exact round trip is covered in the core crate.
        let raw = std::fs::read_to_string(out.join(name)).unwrap();
        let value: serde_json::Value = serde_json::from_str(&raw).unwrap();
        let re = serde_json::to_string(&value).unwrap();
        let value2: serde_json::Value = serde_json::from_str(&re).unwrap();
        assert_eq!(value, value2, "{name} drifts through JSON round-trip");
    }
}

#[test]
fn simulate_is_seed_deterministic() {
    let dir = scratch("simulate");
    let config = write_config(&dir, &sample_csv(), "");
    let out = dir.join("out");
    let status = bin()
        .args(["fit", "--model", "qrh1", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());

    let run = |outdir: &Path, seed: &str| {
        let status = bin()
            .args(["simulate", "--seed", seed, "--config"])
            .arg(&config)
            .arg("--model")
            .arg(out.join("model-qrh1.json"))
            .arg("--out")
            .arg(outdir)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(outdir.join("sim-events.csv")).unwrap()
    };
    let a = run(&dir.join("s1"), "42");
    let b = run(&dir.join("s2"), "42");
    let c = run(&dir.join("s3"), "43");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn compare_orders_nested_models() {
    let dir = scratch("compare");
    let config = write_config(&dir, &sample_csv(), "");
    let out = dir.join("out");
    for model in ["qr", "hawkes", "qrh1"] {
        let status = bin()
            .args(["fit", "--model", model, "--config"])
            .arg(&config)
            .status()
            .unwrap();
        assert!(status.success(), "fit {model}");
    }
    let status = bin()
        .args(["compare", "--config"])
        .arg(&config)
        .arg(out.join("model-qr.json"))
        .arg(out.join("model-hawkes.json"))
        .arg(out.join("model-qrh1.json"))
        .status()
        .unwrap();
    assert!(status.success());
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.join("comparison.json")).unwrap(),
    )
    .unwrap();
    let models = report["models"].as_array().unwrap();
    let l = |name: &str| -> f64 {
        models
            .iter()
            .find(|m| m["name"] == name)
            .unwrap()["log_likelihood"]
            .as_f64()
            .unwrap()
    };
    let k = |name: &str| -> u64 {
        models
            .iter()
            .find(|m| m["name"] == name)
            .unwrap()["n_params"]
            .as_u64()
            .unwrap()
    };
    // Nesting: the full model dominates both restrictions.
    assert!(l("qrh1") >= l("qr") - 1e-6);
    assert!(l("qrh1") >= l("hawkes") - 1e-6);
    // AIC arithmetic against the stored values.
    for m in models {
        let aic = m["aic"].as_f64().unwrap();
        let expect = 2.0 * m["n_params"].as_f64().unwrap() - 2.0 * m["log_likelihood"].as_f64().unwrap();
        assert!((aic - expect).abs() < 1e-9);
    }
    // Degrees of freedom come from parameter-count differences.
    let rows = report["lr_tests"].as_array().unwrap();
    let qr_vs_qrh1 = rows
        .iter()
        .find(|r| r["null"] == "qr" && r["alternative"] == "qrh1")
        .unwrap();
    assert_eq!(
        qr_vs_qrh1["df"].as_u64().unwrap(),
        k("qrh1") - k("qr")
    );
}

#[test]
fn exit_codes_follow_contract() {
    let dir = scratch("exitcodes");
    // Missing input file: exit 1.
    let config = dir.join("bad.json");
    std::fs::write(
        &config,
        r#"{"input_csv": "/nonexistent/file.csv", "out_dir": "/tmp/x"}"#,
    )
    .unwrap();
    let status = bin()
        .args(["preprocess", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Unknown subcommand / bad flags: exit 1.
    let status = bin().args(["frobnicate"]).status().unwrap();
    assert_eq!(status.code(), Some(1));

    // Zero-iteration fit cannot converge: exit 2 with the model saved.
    let config = write_config(&dir, &sample_csv(), "");
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("\"max_iter\": 4000", "\"max_iter\": 0");
    std::fs::write(&config, text).unwrap();
    let status = bin()
        .args(["fit", "--model", "qrh1", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(dir.join("out/model-qrh1.json").exists());
}
