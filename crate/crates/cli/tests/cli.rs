use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_candleforge"));
    c.env("RUST_LOG", "warn");
    c
}

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/btcusdt_1h_synthetic_400d.csv")
}

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/paper.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Output hashes from a manifest, without the run-specific directories.
fn output_hashes(manifest: &serde_json::Value) -> Vec<String> {
    manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["sha256"].as_str().unwrap().to_string())
        .collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--config", "--symbol", "--interval", "--days", "--lookback", "--horizon", "--model", "--seed", "--epochs", "--lr",
        "--out", "--from-csv",
    ] {
        assert!(text.contains(flag), "missing {flag} in help");
    }
    for sub in ["fetch", "featurize", "train", "eval", "grid", "verify"] {
        assert!(text.contains(sub), "missing {sub}");
    }
    let o = run(&["eval", "--help"]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("--checkpoint"));
}

#[test]
fn usage_errors_exit_nonzero_with_message() {
    let o = run(&["train", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = run(&["featurize", "--from-csv", s(&missing), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("missing candle file") && err.contains("stage: featurize"), "{err}");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[train]\nepoch = 3\n").unwrap();
    let o = run(&["grid", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stage: config"));

    let o = run(&["train", "--from-csv", s(&fixture()), "--out", s(dir.path()), "--lr=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));

    // several kinds configured but no --model
    let o = run(&["train", "--from-csv", s(&fixture()), "--out", s(dir.path()), "--lookback", "12"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--model"));
}

#[test]
fn pipeline_errors_name_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let short = dir.path().join("short.csv");
    let text = std::fs::read_to_string(fixture()).unwrap();
    std::fs::write(&short, text.lines().take(20).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    let o = run(&["featurize", "--from-csv", s(&short), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("kind: pipeline") && err.contains("MACD"), "{err}");
}

#[test]
fn fetch_from_csv_then_featurize() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let o = run(&["fetch", "--from-csv", s(&fixture()), "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let candles = data.join("btcusdt_1h.csv");
    let text = std::fs::read_to_string(&candles).unwrap();
    // five dropped hours are filled
    assert_eq!(text.lines().count(), 9600 + 1);
    assert!(data.join("manifest.json").exists());

    let out = dir.path().join("features");
    let o = run(&["featurize", "--from-csv", s(&candles), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("featurize.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], 9566);
    assert_eq!(summary["sequences"].as_array().unwrap().len(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "featurize");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);
}

#[test]
fn fetch_replays_from_base_url_env() {
    use std::io::{BufRead, BufReader, Write};
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let start: i64 = line
                .split(['?', '&', ' '])
                .find_map(|kv| kv.strip_prefix("startTime="))
                .unwrap()
                .parse()
                .unwrap();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            // three candles from the requested start, then nothing
            let first = start + (3_600_000 - start.rem_euclid(3_600_000)) % 3_600_000;
            let rows: Vec<String> = (0..3)
                .map(|i| {
                    let t = first + i * 3_600_000;
                    format!("[{t},\"1.0\",\"2.0\",\"0.5\",\"1.5\",\"10\",{},\"0\",1,\"0\",\"0\",\"0\"]", t + 3_599_999)
                })
                .collect();
            let body = format!("[{}]", rows.join(","));
            let _ = write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .env("CANDLEFORGE_BASE_URL", format!("http://{addr}"))
        .env("CANDLEFORGE_API_KEY", "k-secret-value")
        .args(["fetch", "--days", "1", "--out", s(dir.path())])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("btcusdt_1h.csv")).unwrap();
    assert_eq!(text.lines().count(), 4);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    assert!(!manifest.contains("k-secret-value"));
}

#[test]
fn train_is_deterministic_and_eval_reads_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for run_name in ["a", "b"] {
        let out = dir.path().join(run_name);
        let o = run(&[
            "train", "--from-csv", s(&fixture()), "--model", "lstm", "--lookback", "24", "--horizon", "2", "--epochs", "1",
            "--seed", "3", "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        hashes.push(output_hashes(&manifest));
        assert!(!std::fs::read(out.join("lstm_L24_history.csv")).unwrap().is_empty());
    }
    assert_eq!(hashes[0], hashes[1]);
    let a = std::fs::read(dir.path().join("a/lstm_L24.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/lstm_L24.json")).unwrap();
    assert_eq!(a, b);

    let ck = dir.path().join("a/lstm_L24.json");
    let out = dir.path().join("eval");
    let o = run(&["eval", "--from-csv", s(&fixture()), "--checkpoint", s(&ck), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("eval_lstm_L24.json")).unwrap()).unwrap();
    assert!(report["test"]["mae"].as_f64().unwrap() > 0.0);

    let o = run(&["eval", "--from-csv", s(&fixture()), "--checkpoint", s(&out.join("none.json"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn grid_from_reference_config_writes_sixteen_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let o = run(&[
        "grid", "--config", s(&reference_config()), "--from-csv", s(&fixture()), "--epochs", "1", "--out", s(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 16);
    assert_eq!(report["seed"], 42);
    assert_eq!(std::fs::read_dir(out.join("checkpoints")).unwrap().count(), 16);
    for f in ["table1_mae.csv", "table2_threshold_accuracy.csv", "mae_bars.svg", "loss_lstm.svg", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["train"]["epochs"], 1);
    assert_eq!(manifest["config"]["train"]["learning_rate"], 1e-5);
}

#[test]
fn grid_outputs_repeat_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifests = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = run(&[
            "grid", "--from-csv", s(&fixture()), "--lookback", "12", "--epochs", "1", "--seed", "5", "--out", s(&out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let m: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        manifests.push(m);
    }
    assert_eq!(output_hashes(&manifests[0]).len(), 16);
    assert_eq!(output_hashes(&manifests[0]), output_hashes(&manifests[1]));
}

#[test]
fn verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["verify", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    assert!(dir.path().join("verify.json").exists());
}
