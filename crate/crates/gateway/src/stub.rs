//! Local chat-completions server for tests and offline demos.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

pub const STUB_PATH: &str = "/v1/chat/completions";

/// What the stub saw in one request.
#[derive(Debug, Clone)]
pub struct StubRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: Option<f64>,
    pub provider_order: Vec<String>,
    pub authorization: Option<String>,
}

#[derive(Debug, Clone)]
pub struct StubReply {
    pub status: u16,
    pub content: String,
    pub delay: Duration,
}

impl StubReply {
    pub fn months(months: u32) -> Self {
        Self::text(format!("{{\"sentence_months\": {months}}}"))
    }

    pub fn text(content: impl Into<String>) -> Self {
        Self {
            status: 200,
            content: content.into(),
            delay: Duration::ZERO,
        }
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            content: format!("stub status {status}"),
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

pub type Responder = Arc<dyn Fn(&StubRequest) -> StubReply + Send + Sync>;

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    high_water: AtomicUsize,
}

#[derive(Clone)]
struct AppState {
    responder: Responder,
    counters: Arc<Counters>,
}

async fn handle(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(body): Json<Value>,
) -> (StatusCode, Json<Value>) {
    let c = &state.counters;
    c.requests.fetch_add(1, Ordering::SeqCst);
    let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    c.high_water.fetch_max(now, Ordering::SeqCst);

    let request = StubRequest {
        model: body["model"].as_str().unwrap_or_default().to_string(),
        prompt: body
            .pointer("/messages/0/content")
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string(),
        temperature: body["temperature"].as_f64(),
        provider_order: body
            .pointer("/provider/order")
            .and_then(Value::as_array)
            .map(|a| a.iter().filter_map(|v| v.as_str().map(str::to_string)).collect())
            .unwrap_or_default(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    };
    let reply = (state.responder)(&request);
    // always yield once so overlapping requests are observable
    tokio::time::sleep(reply.delay.max(Duration::from_millis(1))).await;
    c.in_flight.fetch_sub(1, Ordering::SeqCst);

    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    let payload = if status.is_success() {
        json!({
            "id": "stub",
            "object": "chat.completion",
            "model": request.model,
            "choices": [{
                "index": 0,
                "message": {"role": "assistant", "content": reply.content},
                "finish_reason": "stop"
            }]
        })
    } else {
        json!({"error": {"message": reply.content}})
    };
    (status, Json(payload))
}

/// Running stub; shut down on drop.
pub struct StubServer {
    /// Full chat-completions URL.
    pub url: String,
    counters: Arc<Counters>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl StubServer {
    pub async fn start(responder: Responder) -> std::io::Result<Self> {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
        let addr = listener.local_addr()?;
        let counters = Arc::new(Counters::default());
        let app = Router::new().route(STUB_PATH, post(handle)).with_state(AppState {
            responder,
            counters: counters.clone(),
        });
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            url: format!("http://{addr}{STUB_PATH}"),
            counters,
            shutdown: Some(tx),
        })
    }

    /// Every request answered with `{"sentence_months": months}`.
    pub async fn constant(months: u32) -> std::io::Result<Self> {
        Self::start(Arc::new(move |_| StubReply::months(months))).await
    }

    pub fn requests(&self) -> usize {
        self.counters.requests.load(Ordering::SeqCst)
    }

    /// Largest number of requests observed in flight at once.
    pub fn high_water(&self) -> usize {
        self.counters.high_water.load(Ordering::SeqCst)
    }

    pub fn reset_counters(&self) {
        self.counters.requests.store(0, Ordering::SeqCst);
        self.counters.high_water.store(0, Ordering::SeqCst);
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}
