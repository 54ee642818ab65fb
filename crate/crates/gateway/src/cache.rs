//! Append-only response cache and request audit log, both JSON lines.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use tokio::io::AsyncWriteExt;
use tokio::sync::mpsc;

use crate::GatewayError;

pub const CACHE_FILE: &str = "cache.jsonl";
pub const AUDIT_FILE: &str = "audit.jsonl";

/// Hex SHA-256 over model name, temperature and prompt text.
pub fn cache_key(model_name: &str, temperature: f64, prompt: &str) -> String {
    let mut h = Sha256::new();
    h.update(model_name.as_bytes());
    h.update([0]);
    h.update(serde_json::to_string(&temperature).expect("finite").as_bytes());
    h.update([0]);
    h.update(prompt.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub model_name: String,
    pub raw_response: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditEntry {
    pub model_name: String,
    pub doc_id: String,
    pub label_id: Option<String>,
    pub variant_value: Option<String>,
    /// 1 for the first prompt, 2 for the strict re-ask.
    pub prompt_attempt: u32,
    /// Transport try within that prompt attempt, from 1.
    pub request_try: u32,
    pub request: Value,
    pub status: Option<u16>,
    pub response: Option<String>,
    pub error: Option<String>,
}

/// Responses loaded from `cache.jsonl`. Lines that do not parse (for
/// example a write cut short by a crash) are skipped.
pub fn load_cache(dir: &Path) -> Result<HashMap<String, String>, GatewayError> {
    let path = dir.join(CACHE_FILE);
    let file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(HashMap::new()),
        Err(source) => return Err(GatewayError::Io { path, source }),
    };
    let mut out = HashMap::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| GatewayError::Io {
            path: path.clone(),
            source,
        })?;
        if let Ok(entry) = serde_json::from_str::<CacheEntry>(&line) {
            out.insert(entry.key, entry.raw_response);
        }
    }
    Ok(out)
}

pub(crate) enum LogEvent {
    Cache(CacheEntry),
    Audit(Box<AuditEntry>),
}

async fn open_append(path: &Path) -> Result<tokio::fs::File, GatewayError> {
    tokio::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .await
        .map_err(|source| GatewayError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Sole writer of both files; lines are flushed as they arrive.
pub(crate) async fn writer(
    dir: PathBuf,
    mut rx: mpsc::UnboundedReceiver<LogEvent>,
) -> Result<(), GatewayError> {
    let cache_path = dir.join(CACHE_FILE);
    let audit_path = dir.join(AUDIT_FILE);
    let mut cache = open_append(&cache_path).await?;
    let mut audit = open_append(&audit_path).await?;
    while let Some(event) = rx.recv().await {
        let (file, path, line) = match event {
            LogEvent::Cache(e) => (&mut cache, &cache_path, serde_json::to_vec(&e)),
            LogEvent::Audit(e) => (&mut audit, &audit_path, serde_json::to_vec(&e)),
        };
        let mut line = line.expect("log entries serialize");
        line.push(b'\n');
        let io = |source| GatewayError::Io {
            path: path.clone(),
            source,
        };
        file.write_all(&line).await.map_err(io)?;
        file.flush().await.map_err(io)?;
    }
    Ok(())
}
