use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use argmine::client::mock::{MockResponse, MockServer};
use serde_json::{json, Value};

fn argmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argmine"))
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("spawn argmine")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

// Sentences carry a marker the mock uses to answer with the gold label.
fn write_claim_csv(path: &Path, n: usize) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["topic", "text", "y"]).unwrap();
    for i in 0..n {
        let claim = i % 2 == 0;
        let text = if claim {
            format!("Row {i} [c] argues that school uniforms should be banned.")
        } else {
            format!("Row {i} [n] was written on a rainy Tuesday.")
        };
        w.write_record(["school uniforms", &text, if claim { "1" } else { "0" }])
            .unwrap();
    }
    w.flush().unwrap();
}

fn gold_mock() -> MockServer {
    MockServer::start(|req| {
        let p = req.prompt().unwrap_or_default();
        let label = if p.contains("[c]") { "Claim" } else { "Non-claim" };
        MockResponse::completion(&format!("<|ANSWER|> {label} <|ANSWER|>"))
    })
}

fn setup(dir: &Path, url: &str) -> std::path::PathBuf {
    write_claim_csv(&dir.join("claims.csv"), 60);
    let manifest = json!({
        "dataset_id": "ibm_claim",
        "format": "csv",
        "column_map": {"topic": "topic", "sentence": "text", "label": "y"},
        "label_map": {"1": "Claim", "0": "Non-claim"},
    });
    fs::write(dir.join("claims.columns.json"), manifest.to_string()).unwrap();
    let cfg = json!({
        "run_dir": "run",
        "sources": [{"dataset": "ibm_claim", "path": "claims.csv", "manifest": "claims.columns.json"}],
        "tasks": ["CD"],
        "seed": 13,
        "sizes": {"train": 20, "val": 6, "test": 10},
        "cap_sizes": true,
        "mode": "zero",
        "endpoint": {"base_url": url, "model": "mock-model", "api_key_env": null, "backoff_ms": 1},
    });
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    p
}

#[test]
fn pipeline_end_to_end_and_rerun_is_a_no_op() {
    let dir = tempfile::tempdir().unwrap();
    let server = gold_mock();
    let cfg = setup(dir.path(), &server.url());
    let cfg = cfg.to_str().unwrap();

    let table = ok(&argmine(&["--config", cfg, "pipeline"]));
    assert!(table.contains("mock-model"), "{table}");
    let run = dir.path().join("run");
    let report: Value =
        serde_json::from_str(&fs::read_to_string(run.join("reports/zero/report.json")).unwrap()).unwrap();
    assert_eq!(report["CD"]["f1"], json!(1.0), "{report}");
    assert_eq!(report["CD"]["n"], json!(10));
    let sent = server.request_count();
    assert_eq!(sent, 10);

    let manifest = fs::read(run.join("manifest.json")).unwrap();
    let report_bytes = fs::read(run.join("reports/zero/report.json")).unwrap();
    ok(&argmine(&["--config", cfg, "pipeline"]));
    assert_eq!(fs::read(run.join("manifest.json")).unwrap(), manifest);
    assert_eq!(fs::read(run.join("reports/zero/report.json")).unwrap(), report_bytes);
    assert_eq!(server.request_count(), sent, "re-run should not query the endpoint");

    // training data for the same run
    let out = ok(&argmine(&["--config", cfg, "train-recipe", "--task", "CD"]));
    assert!(out.contains("wrote"), "{out}");
    let recipe: Value = serde_json::from_str(&fs::read_to_string(run.join("recipes/CD.json")).unwrap()).unwrap();
    assert_eq!(recipe["multi_task"], json!(false));
    let train = fs::read_to_string(run.join("train/CD.jsonl")).unwrap();
    assert_eq!(train.lines().count(), 20);
    let first: Value = serde_json::from_str(train.lines().next().unwrap()).unwrap();
    assert!(first["completion"].as_str().unwrap().starts_with("<|ANSWER|> "));
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let server = gold_mock();
    let cfg = setup(dir.path(), &server.url());
    let cfg = cfg.to_str().unwrap();
    ok(&argmine(&["--config", cfg, "ingest"]));
    ok(&argmine(&["--config", cfg, "extract", "--task", "CD"]));
    ok(&argmine(&["--config", cfg, "split", "--task", "CD"]));
    ok(&argmine(&["--config", cfg, "sample", "--task", "CD", "--cap"]));
    ok(&argmine(&["--config", cfg, "render", "--task", "CD"]));
    ok(&argmine(&["--config", cfg, "infer", "--task", "CD"]));
    let table = ok(&argmine(&["--config", cfg, "score", "--task", "CD"]));
    assert!(table.contains("100.00"), "{table}");
}

#[test]
fn emit_config_prints_the_preset() {
    let out = ok(&argmine(&["emit-config", "--preset", "della ii"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["name"], json!("DELLA II"));
    assert_eq!(v["method"], json!("DELLA"));
    assert_eq!(v["hard"]["rho"], json!(0.9));
    assert_eq!(v["medium"]["eps"], json!(0.15));
    assert_eq!(v["easy"]["w"], json!(0.03));

    let bad = argmine(&["emit-config", "--preset", "TIES I"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).starts_with("error:"));
}

#[test]
fn score_dir_reads_gold_and_prediction_files() {
    let dir = tempfile::tempdir().unwrap();
    let gold = [("a", "For"), ("b", "Against"), ("c", "For"), ("d", "Against")];
    let mut g = String::new();
    let mut p = String::new();
    for (i, (id, label)) in gold.iter().enumerate() {
        g += &json!({"task": "SD", "dataset": "iam", "id": id, "inputs": {"topic": "t", "sentence": "s"}, "gold": [label]})
            .to_string();
        g += "\n";
        // one wrong answer, one unparsable
        let raw = match i {
            0 => "<|ANSWER|> Against <|ANSWER|>".to_string(),
            1 => "no idea".to_string(),
            _ => format!("<|ANSWER|> {label} <|ANSWER|>"),
        };
        p += &serde_json::to_string(&argmine::parser::parse(id, argmine::TaskId::Sd, &raw)).unwrap();
        p += "\n";
    }
    fs::write(dir.path().join("SD.gold.jsonl"), g).unwrap();
    fs::write(dir.path().join("SD.predictions.jsonl"), p).unwrap();
    let out = ok(&argmine(&[
        "score",
        "--dir",
        dir.path().to_str().unwrap(),
        "--model",
        "m",
    ]));
    // 2 correct of 4
    assert!(out.contains("50.00"), "{out}");
}

#[test]
fn missing_seed_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path(), "http://127.0.0.1:9");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&cfg).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("seed");
    fs::write(&cfg, v.to_string()).unwrap();
    let out = argmine(&["--config", cfg.to_str().unwrap(), "pipeline"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}
