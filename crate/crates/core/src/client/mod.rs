//! Chat-completions client with bounded parallelism, retries and resumable output.

pub mod mock;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::corpus::TaskInstance;
use crate::jsonl;
use crate::labels::TaskId;
use crate::prompt::{FewShotBundle, PromptMode, PromptTemplate};
use crate::{Error, Result};

fn default_max_tokens() -> u32 {
    64
}
fn default_timeout() -> f64 {
    60.0
}
fn default_parallel() -> usize {
    4
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    500
}
fn default_key_env() -> Option<String> {
    Some("OPENAI_API_KEY".into())
}
fn default_samples() -> usize {
    1
}
fn default_sample_temperature() -> f64 {
    0.7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_parallel")]
    pub max_parallel: usize,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
    /// Environment variable holding a bearer token, if any.
    #[serde(default = "default_key_env")]
    pub api_key_env: Option<String>,
    /// Completions per instance. Extra ones are drawn at `sample_temperature`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_sample_temperature")]
    pub sample_temperature: f64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model: model.into(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            timeout_secs: default_timeout(),
            max_parallel: default_parallel(),
            retries: default_retries(),
            backoff_ms: default_backoff(),
            api_key_env: default_key_env(),
            samples: default_samples(),
            sample_temperature: default_sample_temperature(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.base_url.starts_with("http://") || self.base_url.starts_with("https://")) {
            return bad(format!("base_url {:?} is not an http(s) URL", self.base_url));
        }
        if self.max_parallel < 1 {
            return bad("max_parallel must be at least 1".into());
        }
        if [self.temperature, self.sample_temperature]
            .iter()
            .any(|t| t.is_nan() || *t < 0.0)
        {
            return bad("temperature must be non-negative".into());
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return bad("timeout must be positive".into());
        }
        if self.samples < 1 {
            return bad("samples must be at least 1".into());
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub id: String,
    pub task: TaskId,
    pub prompt_sha256: String,
    /// Present iff the request eventually succeeded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
    pub attempts: u32,
    pub model: String,
}

impl GenerationRecord {
    pub fn is_ok(&self) -> bool {
        self.raw_text.is_some()
    }
}

/// Why a request failed for good.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RequestError {
    /// Retries exhausted on timeouts, connection errors, 429 or 5xx.
    Transient(String),
    /// Any other HTTP status.
    Rejected(u16, String),
    /// Body was not a chat-completions JSON document.
    Protocol(String),
}

impl std::fmt::Display for RequestError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RequestError::Transient(m) => write!(f, "transient failure: {m}"),
            RequestError::Rejected(code, m) => write!(f, "HTTP {code}: {m}"),
            RequestError::Protocol(m) => write!(f, "protocol error: {m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub result: std::result::Result<String, RequestError>,
    pub attempts: u32,
}

pub fn prompt_sha256(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub struct Client {
    cfg: EndpointConfig,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl Client {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        cfg.validate()?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let api_key = cfg
            .api_key_env
            .as_deref()
            .and_then(|k| std::env::var(k).ok())
            .filter(|k| !k.is_empty());
        Ok(Client { cfg, agent, api_key })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.cfg
    }

    fn attempt(&self, prompt: &str, temperature: f64) -> std::result::Result<String, (bool, RequestError)> {
        let body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "max_tokens": self.cfg.max_tokens,
        });
        let mut req = self
            .agent
            .post(self.cfg.endpoint())
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let payload = serde_json::to_vec(&body).expect("request body serializes");
        let mut resp = req
            .send(&payload[..])
            .map_err(|e| (true, RequestError::Transient(e.to_string())))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, RequestError::Transient(e.to_string())))?;
        if status == 429 || status >= 500 {
            return Err((true, RequestError::Transient(format!("HTTP {status}"))));
        }
        if !(200..300).contains(&status) {
            return Err((false, RequestError::Rejected(status, text.chars().take(200).collect())));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| (false, RequestError::Protocol(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| (false, RequestError::Protocol("no choices[0].message.content".into())))
    }

    /// First choice text, verbatim. Transient failures retry with exponential backoff.
    pub fn complete(&self, prompt: &str) -> Completion {
        self.complete_at(prompt, self.cfg.temperature)
    }

    pub fn complete_at(&self, prompt: &str, temperature: f64) -> Completion {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(prompt, temperature) {
                Ok(text) => {
                    return Completion {
                        result: Ok(text),
                        attempts,
                    }
                }
                Err((retry, err)) => {
                    if !retry || attempts > self.cfg.retries {
                        return Completion {
                            result: Err(err),
                            attempts,
                        };
                    }
                    let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    log::debug!("attempt {attempts} failed ({err}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait.min(30_000)));
                }
            }
        }
    }

    fn generate(&self, inst: &TaskInstance, prompt: &str) -> GenerationRecord {
        let start = Instant::now();
        let first = self.complete(prompt);
        let mut attempts = first.attempts;
        let mut samples = Vec::new();
        let mut result = first.result;
        if result.is_ok() {
            for _ in 1..self.cfg.samples {
                let c = self.complete_at(prompt, self.cfg.sample_temperature);
                attempts += c.attempts;
                match c.result {
                    Ok(t) => samples.push(t),
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
        }
        let (raw_text, error) = match result {
            Ok(t) => (Some(t), None),
            Err(e) => {
                samples.clear();
                (None, Some(e.to_string()))
            }
        };
        GenerationRecord {
            id: inst.id.clone(),
            task: inst.task,
            prompt_sha256: prompt_sha256(prompt),
            raw_text,
            samples,
            error,
            latency_ms: start.elapsed().as_millis() as u64,
            attempts,
            model: self.cfg.model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEntry {
    pub id: String,
    pub error: String,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchOutcome {
    /// One per input instance, in input order.
    pub records: Vec<GenerationRecord>,
    /// Requests actually sent this run (instances, not HTTP attempts).
    pub requested: usize,
    pub failures: Vec<FailureEntry>,
}

pub fn failures_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".failures.json");
    out.with_file_name(name)
}

/// Latest record per id from an append log.
fn load_previous(out: &Path) -> Result<HashMap<String, GenerationRecord>> {
    if !out.exists() {
        return Ok(HashMap::new());
    }
    let recs: Vec<GenerationRecord> = jsonl::read_jsonl(out)?;
    Ok(recs.into_iter().map(|r| (r.id.clone(), r)).collect())
}

/// Renders and sends every instance, skipping ids that already have a successful
/// record in `out`. Records are appended as they arrive; on completion `out` is
/// rewritten in input order and failures are listed next to it.
pub fn run_batch(
    client: &Client,
    instances: &[TaskInstance],
    template: &PromptTemplate,
    mode: PromptMode,
    bundle: Option<&FewShotBundle>,
    out: Option<&Path>,
) -> Result<BatchOutcome> {
    if let Some(first) = instances.first() {
        if let Some(other) = instances.iter().find(|i| i.task != first.task) {
            return Err(Error::Config(format!(
                "batch mixes tasks {} and {}",
                first.task, other.task
            )));
        }
    }
    let mut seen = std::collections::HashSet::new();
    if let Some(dup) = instances.iter().find(|i| !seen.insert(i.id.as_str())) {
        return Err(Error::Config(format!("duplicate instance id {}", dup.id)));
    }
    let prompts = instances
        .iter()
        .map(|i| template.render(i, mode, bundle))
        .collect::<Result<Vec<_>>>()?;

    let previous = match out {
        Some(p) => load_previous(p)?,
        None => HashMap::new(),
    };
    let mut slots: Vec<Option<GenerationRecord>> = instances
        .iter()
        .map(|i| previous.get(&i.id).filter(|r| r.is_ok()).cloned())
        .collect();
    let pending: Vec<usize> = (0..instances.len()).filter(|&k| slots[k].is_none()).collect();
    log::info!(
        "{} instances, {} already done, {} to request",
        instances.len(),
        instances.len() - pending.len(),
        pending.len()
    );

    if let Some(dir) = out.and_then(Path::parent).filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let next = AtomicUsize::new(0);
    let workers = client.cfg.max_parallel.min(pending.len());
    let mut write_err = None;
    std::thread::scope(|s| {
        let (tx, rx) = mpsc::channel::<(usize, GenerationRecord)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, pending, prompts) = (&next, &pending, &prompts);
            s.spawn(move || loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(&idx) = pending.get(k) else { break };
                let rec = client.generate(&instances[idx], &prompts[idx]);
                if tx.send((idx, rec)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // Single writer: this thread owns the output file.
        for (idx, rec) in rx {
            if let (Some(p), None) = (out, &write_err) {
                if let Err(e) = jsonl::append_jsonl(p, &rec) {
                    write_err = Some(e);
                }
            }
            slots[idx] = Some(rec);
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }

    let records: Vec<GenerationRecord> = slots.into_iter().map(|r| r.expect("every slot filled")).collect();
    let failures: Vec<FailureEntry> = records
        .iter()
        .filter(|r| !r.is_ok())
        .map(|r| FailureEntry {
            id: r.id.clone(),
            error: r.error.clone().unwrap_or_default(),
            attempts: r.attempts,
        })
        .collect();
    if let Some(p) = out {
        let tmp = p.with_extension("jsonl.tmp");
        jsonl::write_jsonl(&tmp, &records)?;
        std::fs::rename(&tmp, p).map_err(|e| Error::io(p, e))?;
        let fp = failures_path(p);
        std::fs::write(&fp, serde_json::to_string_pretty(&failures)?).map_err(|e| Error::io(&fp, e))?;
    }
    if !failures.is_empty() {
        log::warn!("{} of {} instances failed", failures.len(), records.len());
    }
    Ok(BatchOutcome {
        records,
        requested: pending.len(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::mock::{MockResponse, MockServer};
    use super::*;
    use std::sync::atomic::AtomicU32;
    use std::sync::Arc;

    fn cfg(url: &str) -> EndpointConfig {
        let mut c = EndpointConfig::new(url, "test-model");
        c.backoff_ms = 1;
        c.timeout_secs = 5.0;
        c.api_key_env = None;
        c
    }

    #[test]
    fn config_validation() {
        let mut c = cfg("http://x");
        c.validate().unwrap();
        c.max_parallel = 0;
        assert!(c.validate().is_err());
        let c = cfg("ftp://x");
        assert!(c.validate().is_err());
    }

    #[test]
    fn echo() {
        let server = MockServer::start(|_| MockResponse::completion("<|ANSWER|> For <|ANSWER|>"));
        let client = Client::new(cfg(&server.url())).unwrap();
        let c = client.complete("hello");
        assert_eq!(c.result.unwrap(), "<|ANSWER|> For <|ANSWER|>");
        assert_eq!(c.attempts, 1);
        let req = &server.requests()[0];
        assert_eq!(req.path, "/chat/completions");
        let body: Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["messages"][0]["content"], "hello");
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn retries_then_success() {
        let n = Arc::new(AtomicU32::new(0));
        let n2 = n.clone();
        let server = MockServer::start(move |_| {
            if n2.fetch_add(1, Ordering::SeqCst) < 2 {
                MockResponse::status(503)
            } else {
                MockResponse::completion("ok")
            }
        });
        let mut c = cfg(&server.url());
        c.retries = 2;
        let client = Client::new(c).unwrap();
        let out = client.complete("p");
        assert_eq!(out.result.unwrap(), "ok");
        assert_eq!(out.attempts, 3);
    }

    #[test]
    fn non_json_is_protocol_error() {
        let server = MockServer::start(|_| MockResponse::raw(200, "not json"));
        let client = Client::new(cfg(&server.url())).unwrap();
        let out = client.complete("p");
        assert!(matches!(out.result, Err(RequestError::Protocol(_))));
        assert_eq!(out.attempts, 1);
    }

    #[test]
    fn timeout_without_retries_is_terminal() {
        let server = MockServer::start(|_| MockResponse::completion("late").delayed(Duration::from_millis(800)));
        let mut c = cfg(&server.url());
        c.retries = 0;
        c.timeout_secs = 0.2;
        let client = Client::new(c).unwrap();
        let out = client.complete("p");
        assert!(matches!(out.result, Err(RequestError::Transient(_))));
        assert_eq!(out.attempts, 1);
    }
}
