//! Remote sampling of graph scripts from an OpenAI-compatible chat endpoint,
//! with an on-disk response cache.

mod prompt;
mod transport;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use graphmdl::sample_io::{parse_completions, ScriptDialect, SampleSet};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use prompt::{build_prompt, FewShot, PromptSpec};
pub use transport::{ChatTransport, HttpReply, HttpTransport};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("config error: {0}")]
    Config(String),
    #[error("sample {index}: network error after {attempts} attempts: {message}")]
    Network { index: usize, attempts: u32, message: String },
    #[error("sample {index}: endpoint rejected credentials (HTTP {status})")]
    Auth { index: usize, status: u16 },
    #[error("sample {index}: HTTP {status}: {message}")]
    Http { index: usize, status: u16, message: String },
    #[error("sample {index}: malformed response: {message}")]
    Response { index: usize, message: String },
    #[error("cache {path}: {source}")]
    Cache {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("all {} completions failed to parse:\n{}", .diagnostics.len(), .diagnostics.join("\n"))]
    Parse { diagnostics: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    pub t_samples: usize,
    pub max_tokens: Option<u32>,
    pub cache_dir: PathBuf,
    /// Name of the environment variable that holds the API key.
    pub api_key_env: Option<String>,
    pub concurrency: usize,
    pub max_retries: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
    /// Passed through verbatim into the request body (e.g. `top_p`).
    pub extra: Map<String, Value>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: String::new(),
            temperature: 0.9,
            t_samples: 10,
            max_tokens: None,
            cache_dir: PathBuf::from(".graphmdl-cache"),
            api_key_env: Some("OPENAI_API_KEY".into()),
            concurrency: 4,
            max_retries: 5,
            backoff_ms: 500,
            timeout_secs: 120,
            extra: Map::new(),
        }
    }
}

impl SamplerConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SamplerError> {
        let cfg: SamplerConfig = toml::from_str(text).map_err(|e| SamplerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(SamplerError::Config(format!("temperature must be >= 0, got {}", self.temperature)));
        }
        if self.t_samples == 0 {
            return Err(SamplerError::Config("t_samples must be >= 1".into()));
        }
        if self.concurrency == 0 {
            return Err(SamplerError::Config("concurrency must be >= 1".into()));
        }
        if self.model.is_empty() {
            return Err(SamplerError::Config("model is required".into()));
        }
        Ok(())
    }

    pub fn api_key(&self) -> Option<String> {
        self.api_key_env.as_deref().and_then(|name| std::env::var(name).ok()).filter(|k| !k.is_empty())
    }

    /// Transport for `endpoint`, with the key read from `api_key_env`.
    pub fn http_transport(&self) -> Result<HttpTransport, SamplerError> {
        HttpTransport::new(&self.endpoint, self.api_key(), Duration::from_secs(self.timeout_secs))
            .map_err(SamplerError::Config)
    }
}

pub fn prompt_hash(prompt: &str, model: &str, temperature: f64) -> String {
    hex::encode(Sha256::digest(format!("{prompt}|{model}|{temperature}").as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RetryEvent {
    pub index: usize,
    pub attempt: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SampleReport {
    pub network_calls: usize,
    pub cache_hits: usize,
    pub retries: Vec<RetryEvent>,
}

#[derive(Debug, Clone)]
pub struct SampleOutcome {
    pub samples: SampleSet,
    /// Raw completion texts in sample order.
    pub completions: Vec<String>,
    pub report: SampleReport,
}

fn request_body(prompt: &str, cfg: &SamplerConfig) -> Value {
    let mut body = json!({
        "model": cfg.model,
        "messages": [{ "role": "user", "content": prompt }],
        "temperature": cfg.temperature,
    });
    let obj = body.as_object_mut().expect("object literal");
    if let Some(m) = cfg.max_tokens {
        obj.insert("max_tokens".into(), m.into());
    }
    for (k, v) in &cfg.extra {
        obj.insert(k.clone(), v.clone());
    }
    body
}

fn completion_text(index: usize, raw: &str) -> Result<String, SamplerError> {
    let v: Value =
        serde_json::from_str(raw).map_err(|e| SamplerError::Response { index, message: e.to_string() })?;
    v.pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(String::from)
        .ok_or_else(|| SamplerError::Response { index, message: "no choices[0].message.content".into() })
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), SamplerError> {
    let cache_err = |source| SamplerError::Cache { path: path.to_path_buf(), source };
    let dir = path.parent().expect("cache file has a parent");
    fs::create_dir_all(dir).map_err(cache_err)?;
    let tmp = dir.join(format!(".{}.tmp-{}", path.file_name().unwrap().to_string_lossy(), std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(cache_err)?;
    f.write_all(bytes).map_err(cache_err)?;
    f.sync_all().map_err(cache_err)?;
    fs::rename(&tmp, path).map_err(cache_err)
}

struct Fetcher<'a> {
    cfg: &'a SamplerConfig,
    transport: &'a dyn ChatTransport,
    body: Value,
    dir: PathBuf,
    calls: AtomicUsize,
    hits: AtomicUsize,
    retries: Mutex<Vec<RetryEvent>>,
}

impl Fetcher<'_> {
    fn fetch(&self, index: usize) -> Result<String, SamplerError> {
        let path = self.dir.join(format!("{index}.json"));
        if let Ok(raw) = fs::read_to_string(&path) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            log::debug!("sample {index}: cache hit {}", path.display());
            return completion_text(index, &raw);
        }
        let mut attempt = 0u32;
        loop {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let reason = match self.transport.post(&self.body) {
                Ok(reply) if (200..300).contains(&reply.status) => {
                    let text = completion_text(index, &reply.body)?;
                    write_atomic(&path, reply.body.as_bytes())?;
                    return Ok(text);
                }
                Ok(reply) if reply.status == 401 || reply.status == 403 => {
                    return Err(SamplerError::Auth { index, status: reply.status });
                }
                Ok(reply) if reply.status == 429 || reply.status >= 500 => format!("HTTP {}", reply.status),
                Ok(reply) => {
                    return Err(SamplerError::Http { index, status: reply.status, message: reply.body });
                }
                Err(e) => e,
            };
            attempt += 1;
            if attempt > self.cfg.max_retries {
                return Err(SamplerError::Network { index, attempts: attempt, message: reason });
            }
            let wait = self.cfg.backoff_ms.saturating_mul(1 << (attempt - 1).min(16));
            log::warn!("sample {index}: {reason}; retry {attempt}/{} in {wait} ms", self.cfg.max_retries);
            self.retries.lock().unwrap().push(RetryEvent { index, attempt, reason });
            std::thread::sleep(Duration::from_millis(wait));
        }
    }
}

/// Draws `cfg.t_samples` completions (cache first, then the endpoint) and
/// parses them with `dialect`. Unparseable completions become rejects; the
/// call fails only if every completion is rejected.
pub fn sample_graphs(
    spec: &PromptSpec,
    cfg: &SamplerConfig,
    dialect: &ScriptDialect,
    transport: &dyn ChatTransport,
) -> Result<SampleOutcome, SamplerError> {
    cfg.validate()?;
    let prompt = build_prompt(spec)?;
    let hash = prompt_hash(&prompt, &cfg.model, cfg.temperature);
    let fetcher = Fetcher {
        cfg,
        transport,
        body: request_body(&prompt, cfg),
        dir: cfg.cache_dir.join(&hash),
        calls: AtomicUsize::new(0),
        hits: AtomicUsize::new(0),
        retries: Mutex::new(Vec::new()),
    };

    let next = AtomicUsize::new(0);
    let results: Mutex<BTreeMap<usize, Result<String, SamplerError>>> = Mutex::new(BTreeMap::new());
    std::thread::scope(|s| {
        for _ in 0..cfg.concurrency.min(cfg.t_samples) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfg.t_samples {
                    break;
                }
                let r = fetcher.fetch(i);
                let fatal = r.is_err();
                results.lock().unwrap().insert(i, r);
                if fatal {
                    // Stop handing out new work; in-flight requests finish.
                    next.store(cfg.t_samples, Ordering::Relaxed);
                }
            });
        }
    });

    let mut completions = Vec::with_capacity(cfg.t_samples);
    for (_, r) in results.into_inner().unwrap() {
        completions.push(r?);
    }
    let mut samples = parse_completions(&completions, dialect);
    if samples.samples.is_empty() {
        let diagnostics = samples.rejects.iter().map(|r| format!("sample {}: {}", r.index, r.reason)).collect();
        return Err(SamplerError::Parse { diagnostics });
    }
    samples.source.temperature = Some(cfg.temperature);
    samples.source.model = Some(cfg.model.clone());
    samples.source.prompt_hash = Some(hash);

    let mut retries = fetcher.retries.into_inner().unwrap();
    retries.sort_by_key(|r| (r.index, r.attempt));
    let report = SampleReport {
        network_calls: fetcher.calls.into_inner(),
        cache_hits: fetcher.hits.into_inner(),
        retries,
    };
    Ok(SampleOutcome { samples, completions, report })
}
