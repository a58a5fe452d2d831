use std::collections::BTreeMap;
use std::time::Duration;

use argmine::client::mock::{MockResponse, MockServer};
use argmine::client::{failures_path, run_batch, Client, EndpointConfig, GenerationRecord};
use argmine::corpus::TaskInstance;
use argmine::jsonl::read_jsonl;
use argmine::prompt::{PromptMode, PromptTemplate};
use argmine::{DatasetId, TaskId};

fn instances(n: usize) -> Vec<TaskInstance> {
    (0..n)
        .map(|i| TaskInstance {
            task: TaskId::Sd,
            dataset: DatasetId::Iam,
            id: format!("sd-{i:03}"),
            inputs: BTreeMap::from([
                ("topic".to_string(), "homework".to_string()),
                ("sentence".to_string(), format!("sentence number {i}")),
            ]),
            gold: vec![if i % 2 == 0 { "For" } else { "Against" }.to_string()],
        })
        .collect()
}

fn config(url: String, parallel: usize) -> EndpointConfig {
    let mut c = EndpointConfig::new(url, "mock");
    c.api_key_env = None;
    c.backoff_ms = 1;
    c.retries = 0;
    c.max_parallel = parallel;
    c
}

#[test]
fn in_flight_requests_never_exceed_the_limit() {
    let server =
        MockServer::start(|_| MockResponse::completion("<|ANSWER|> For <|ANSWER|>").delayed(Duration::from_millis(20)));
    let client = Client::new(config(server.url(), 8)).unwrap();
    let insts = instances(100);
    let tpl = PromptTemplate::builtin(TaskId::Sd);
    let out = run_batch(&client, &insts, &tpl, PromptMode::Zero, None, None).unwrap();
    assert_eq!(out.records.len(), 100);
    assert_eq!(server.request_count(), 100);
    let peak = server.max_in_flight();
    assert!(peak <= 8 && peak > 1, "peak {peak}");
    // input order is preserved regardless of completion order
    let ids: Vec<_> = out.records.iter().map(|r| r.id.clone()).collect();
    let want: Vec<_> = insts.iter().map(|i| i.id.clone()).collect();
    assert_eq!(ids, want);
}

#[test]
fn interrupted_batch_resumes_without_repeating_requests() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("gen.jsonl");
    let insts = instances(100);
    let tpl = PromptTemplate::builtin(TaskId::Sd);

    // the first endpoint only answers the first 40 sentences
    let flaky = MockServer::start(|req| {
        let p = req.prompt().unwrap_or_default();
        let n: usize = p
            .split("sentence number ")
            .nth(1)
            .and_then(|s| s.split_whitespace().next())
            .and_then(|s| s.parse().ok())
            .unwrap_or(999);
        if n < 40 {
            MockResponse::completion("<|ANSWER|> For <|ANSWER|>")
        } else {
            MockResponse::status(400)
        }
    });
    let client = Client::new(config(flaky.url(), 4)).unwrap();
    let first = run_batch(&client, &insts, &tpl, PromptMode::Zero, None, Some(&out_path)).unwrap();
    assert_eq!(first.failures.len(), 60);
    assert!(failures_path(&out_path).exists());

    let good = MockServer::start(|_| MockResponse::completion("<|ANSWER|> Against <|ANSWER|>"));
    let client = Client::new(config(good.url(), 4)).unwrap();
    let second = run_batch(&client, &insts, &tpl, PromptMode::Zero, None, Some(&out_path)).unwrap();
    assert_eq!(good.request_count(), 60);
    assert_eq!(second.requested, 60);
    assert!(second.failures.is_empty());

    let on_disk: Vec<GenerationRecord> = read_jsonl(&out_path).unwrap();
    assert_eq!(on_disk.len(), 100);
    for (i, r) in on_disk.iter().enumerate() {
        assert_eq!(r.id, insts[i].id);
        let want = if i < 40 { "For" } else { "Against" };
        assert_eq!(
            r.raw_text.as_deref(),
            Some(format!("<|ANSWER|> {want} <|ANSWER|>").as_str())
        );
    }
}

#[test]
fn extra_samples_are_recorded() {
    let server = MockServer::start(|_| MockResponse::completion("<|ANSWER|> For <|ANSWER|>"));
    let mut cfg = config(server.url(), 2);
    cfg.samples = 3;
    let client = Client::new(cfg).unwrap();
    let out = run_batch(
        &client,
        &instances(5),
        &PromptTemplate::builtin(TaskId::Sd),
        PromptMode::Zero,
        None,
        None,
    )
    .unwrap();
    assert_eq!(server.request_count(), 15);
    assert!(out.records.iter().all(|r| r.samples.len() == 2));
}
