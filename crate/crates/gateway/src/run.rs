//! Batch generation over a corpus with caching, retries and bounded
//! concurrency.

use std::collections::HashMap;
use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use lexaudit_core::dataset::Corpus;
use lexaudit_core::predictions::{sort_records, PredictionRecord};
use rand::Rng;
use serde::Serialize;
use tokio::sync::mpsc;

use crate::cache::{cache_key, load_cache, writer, AuditEntry, CacheEntry, LogEvent};
use crate::client::{request_body, ChatClient, FetchError};
use crate::parse::parse_prediction;
use crate::prompt::{build_prompt, strict_prompt, DEFAULT_TEMPLATE};
use crate::{GatewayError, ModelConfig};

/// Called with (completed, total) after each record.
pub type ProgressFn = Arc<dyn Fn(usize, usize) + Send + Sync>;

#[derive(Clone)]
pub struct GenerationOptions {
    /// Holds `cache.jsonl` and `audit.jsonl`.
    pub cache_dir: PathBuf,
    pub template: String,
    /// Restrict variants to these labels; baselines are always generated.
    pub labels: Option<Vec<String>>,
    pub backoff_base: Duration,
    pub backoff_cap: Duration,
    pub request_timeout: Duration,
    pub progress: Option<ProgressFn>,
}

impl GenerationOptions {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            cache_dir: cache_dir.into(),
            template: DEFAULT_TEMPLATE.to_string(),
            labels: None,
            backoff_base: Duration::from_millis(500),
            backoff_cap: Duration::from_secs(30),
            request_timeout: Duration::from_secs(120),
            progress: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub records: usize,
    pub with_prediction: usize,
    pub parse_failures: usize,
    pub request_failures: usize,
    /// Prompts answered from the cache.
    pub cache_hits: usize,
    /// HTTP requests sent, retries included.
    pub requests_sent: usize,
    pub reasked: usize,
}

#[derive(Debug, Clone)]
pub struct GenerationOutput {
    /// Sorted by model, document, label and value.
    pub records: Vec<PredictionRecord>,
    pub stats: RunStats,
}

struct WorkItem {
    doc_id: String,
    label_id: Option<String>,
    variant_value: Option<String>,
    prompt: String,
}

fn work_items(
    corpus: &Corpus,
    template: &str,
    labels: Option<&[String]>,
) -> Result<Vec<WorkItem>, GatewayError> {
    if let Some(filter) = labels {
        for l in filter {
            if corpus.label(l).is_none() {
                return Err(GatewayError::Config(format!("unknown label '{l}'")));
            }
        }
    }
    let mut items = Vec::with_capacity(corpus.documents().len() + corpus.variants().len());
    for doc in corpus.documents() {
        items.push(WorkItem {
            doc_id: doc.doc_id.clone(),
            label_id: None,
            variant_value: None,
            prompt: build_prompt(&doc.facts, template)?,
        });
    }
    for v in corpus.variants() {
        if labels.is_some_and(|f| !f.contains(&v.label_id)) {
            continue;
        }
        items.push(WorkItem {
            doc_id: v.doc_id.clone(),
            label_id: Some(v.label_id.clone()),
            variant_value: Some(v.variant_value.clone()),
            prompt: build_prompt(&v.facts, template)?,
        });
    }
    Ok(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Parsed,
    ParseFailed,
    RequestFailed,
}

struct Shared<'a> {
    config: &'a ModelConfig,
    options: &'a GenerationOptions,
    client: ChatClient,
    cache: HashMap<String, String>,
    log: mpsc::UnboundedSender<LogEvent>,
    requests: AtomicUsize,
    cache_hits: AtomicUsize,
    reasked: AtomicUsize,
}

impl Shared<'_> {
    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.options.backoff_base.as_secs_f64() * 2f64.powi(attempt as i32);
        let capped = base.min(self.options.backoff_cap.as_secs_f64());
        let factor = rand::rng().random_range(0.5..=1.0);
        Duration::from_secs_f64(capped * factor)
    }

    fn audit(&self, item: &WorkItem, prompt_attempt: u32, request_try: u32, body: &serde_json::Value, result: &Result<String, FetchError>) {
        let (status, response, error) = match result {
            Ok(text) => (Some(200), Some(text.clone()), None),
            Err(e) => (e.status(), None, Some(e.message().to_string())),
        };
        let _ = self.log.send(LogEvent::Audit(Box::new(AuditEntry {
            model_name: self.config.model_name.clone(),
            doc_id: item.doc_id.clone(),
            label_id: item.label_id.clone(),
            variant_value: item.variant_value.clone(),
            prompt_attempt,
            request_try,
            request: body.clone(),
            status,
            response,
            error,
        })));
    }

    /// Raw answer to `prompt`, from the cache or the endpoint.
    async fn answer(&self, item: &WorkItem, prompt: &str, prompt_attempt: u32) -> Result<String, FetchError> {
        let key = cache_key(&self.config.model_name, self.config.temperature, prompt);
        if let Some(raw) = self.cache.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(raw.clone());
        }
        let body = request_body(self.config, prompt);
        let mut request_try = 0;
        loop {
            request_try += 1;
            self.requests.fetch_add(1, Ordering::Relaxed);
            let result = self.client.send(&body).await;
            self.audit(item, prompt_attempt, request_try, &body, &result);
            match result {
                Ok(raw) => {
                    let _ = self.log.send(LogEvent::Cache(CacheEntry {
                        key,
                        model_name: self.config.model_name.clone(),
                        raw_response: raw.clone(),
                    }));
                    return Ok(raw);
                }
                Err(FetchError::Retryable { .. }) if request_try <= self.config.max_retries => {
                    tokio::time::sleep(self.backoff(request_try - 1)).await;
                }
                Err(e) => return Err(e),
            }
        }
    }

    async fn process(&self, item: WorkItem) -> Result<(PredictionRecord, Outcome), GatewayError> {
        let record = |months: Option<f64>, raw: String, attempts: u32| PredictionRecord {
            model_name: self.config.model_name.clone(),
            doc_id: item.doc_id.clone(),
            label_id: item.label_id.clone(),
            variant_value: item.variant_value.clone(),
            predicted_months: months,
            raw_response: raw,
            attempt_count: attempts,
        };
        let prompts = [item.prompt.clone(), strict_prompt(&item.prompt)];
        let mut last_raw = String::new();
        for (i, prompt) in prompts.iter().enumerate() {
            let attempt = i as u32 + 1;
            if attempt == 2 {
                self.reasked.fetch_add(1, Ordering::Relaxed);
            }
            match self.answer(&item, prompt, attempt).await {
                Ok(raw) => match parse_prediction(&raw) {
                    Ok(months) => return Ok((record(Some(months), raw, attempt), Outcome::Parsed)),
                    Err(_) => last_raw = raw,
                },
                Err(FetchError::Auth { status, message }) => {
                    return Err(GatewayError::Auth { status, message })
                }
                Err(e) => {
                    let raw = format!("request failed: {}", e.message());
                    return Ok((record(None, raw, attempt), Outcome::RequestFailed));
                }
            }
        }
        Ok((record(None, last_raw, 2), Outcome::ParseFailed))
    }
}

/// Generate predictions using the API key from `config.api_key_env`.
pub async fn run_generation(
    corpus: &Corpus,
    config: &ModelConfig,
    options: &GenerationOptions,
) -> Result<GenerationOutput, GatewayError> {
    config.validate()?;
    let key = config.api_key()?;
    run_generation_with_key(corpus, config, &key, options).await
}

pub async fn run_generation_with_key(
    corpus: &Corpus,
    config: &ModelConfig,
    api_key: &str,
    options: &GenerationOptions,
) -> Result<GenerationOutput, GatewayError> {
    config.validate()?;
    let items = work_items(corpus, &options.template, options.labels.as_deref())?;
    let total = items.len();
    fs::create_dir_all(&options.cache_dir).map_err(|source| GatewayError::Io {
        path: options.cache_dir.clone(),
        source,
    })?;
    let cache = load_cache(&options.cache_dir)?;
    let (tx, rx) = mpsc::unbounded_channel();
    let writer_task = tokio::spawn(writer(options.cache_dir.clone(), rx));

    let shared = Shared {
        config,
        options,
        client: ChatClient::new(&config.api_url, api_key, options.request_timeout)?,
        cache,
        log: tx,
        requests: AtomicUsize::new(0),
        cache_hits: AtomicUsize::new(0),
        reasked: AtomicUsize::new(0),
    };

    let first_batch = config.max_concurrency.min(total);
    let outcome: Result<(Vec<PredictionRecord>, RunStats), GatewayError> = async {
        let mut stream = stream::iter(items)
            .map(|item| shared.process(item))
            .buffer_unordered(config.max_concurrency);
        let mut records = Vec::with_capacity(total);
        let mut stats = RunStats::default();
        let mut early_failures = 0;
        let mut last_error = String::new();
        while let Some(result) = stream.next().await {
            let (record, outcome) = result?;
            match outcome {
                Outcome::Parsed => stats.with_prediction += 1,
                Outcome::ParseFailed => stats.parse_failures += 1,
                Outcome::RequestFailed => {
                    stats.request_failures += 1;
                    last_error = record.raw_response.clone();
                }
            }
            if records.len() < first_batch && outcome == Outcome::RequestFailed {
                early_failures += 1;
            }
            records.push(record);
            if let Some(progress) = &options.progress {
                progress(records.len(), total);
            }
            if records.len() == first_batch && first_batch > 0 && early_failures == first_batch {
                return Err(GatewayError::Unreachable {
                    url: config.api_url.clone(),
                    message: last_error,
                });
            }
        }
        stats.records = records.len();
        Ok((records, stats))
    }
    .await;

    let requests = shared.requests.load(Ordering::Relaxed);
    let cache_hits = shared.cache_hits.load(Ordering::Relaxed);
    let reasked = shared.reasked.load(Ordering::Relaxed);
    drop(shared);
    let written = writer_task
        .await
        .map_err(|e| GatewayError::Config(format!("log writer panicked: {e}")))?;
    let (mut records, mut stats) = outcome?;
    written?;

    stats.requests_sent = requests;
    stats.cache_hits = cache_hits;
    stats.reasked = reasked;
    sort_records(&mut records);
    Ok(GenerationOutput { records, stats })
}
