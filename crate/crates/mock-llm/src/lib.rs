//! A scriptable OpenAI-compatible `/v1/chat/completions` server for tests.
//!
//! Each request is answered by a caller-supplied handler. The server records
//! every request body with its arrival time and tracks how many requests are
//! in flight at once.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::sync::oneshot;

/// What the server sends back for one request.
#[derive(Debug, Clone)]
pub struct MockReply {
    pub status: u16,
    pub body: Value,
    pub delay: Duration,
}

impl MockReply {
    /// A 200 response carrying one assistant message.
    pub fn content(text: impl Into<String>) -> Self {
        Self {
            status: 200,
            body: json!({
                "id": "chatcmpl-mock",
                "object": "chat.completion",
                "model": "mock-model",
                "choices": [{
                    "index": 0,
                    "finish_reason": "stop",
                    "message": {"role": "assistant", "content": text.into()}
                }]
            }),
            delay: Duration::ZERO,
        }
    }

    pub fn status(code: u16) -> Self {
        Self {
            status: code,
            body: json!({"error": {"message": format!("mock status {code}")}}),
            delay: Duration::ZERO,
        }
    }

    pub fn raw(code: u16, body: Value) -> Self {
        Self {
            status: code,
            body,
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

/// One request as seen by the server.
#[derive(Debug, Clone)]
pub struct LoggedRequest {
    pub at: Instant,
    pub body: Value,
    pub authorization: Option<String>,
}

impl LoggedRequest {
    pub fn system(&self) -> &str {
        message_content(&self.body, "system")
    }

    pub fn user(&self) -> &str {
        message_content(&self.body, "user")
    }
}

/// Content of the first message with the given role, or "".
pub fn message_content<'a>(body: &'a Value, role: &str) -> &'a str {
    body["messages"]
        .as_array()
        .and_then(|msgs| msgs.iter().find(|m| m["role"] == role))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("")
}

/// Canned replies for requests whose system and user messages contain the
/// given fragments. Successive matches walk through `replies`; the last one
/// repeats once the list is exhausted.
#[derive(Debug, Clone)]
pub struct ReplayRule {
    pub system_contains: String,
    pub user_contains: String,
    pub replies: Vec<String>,
}

impl ReplayRule {
    pub fn new(system_contains: &str, user_contains: &str, replies: Vec<String>) -> Self {
        Self {
            system_contains: system_contains.to_string(),
            user_contains: user_contains.to_string(),
            replies,
        }
    }
}

/// Handler answering from `rules` (first match wins); unmatched requests
/// get a 400.
pub fn replay(rules: Vec<ReplayRule>) -> impl Fn(&Value, usize) -> MockReply + Send + Sync + 'static {
    let hits: Mutex<Vec<usize>> = Mutex::new(vec![0; rules.len()]);
    move |body, _| {
        let system = message_content(body, "system");
        let user = message_content(body, "user");
        let Some(i) = rules
            .iter()
            .position(|r| system.contains(&r.system_contains) && user.contains(&r.user_contains))
        else {
            return MockReply::raw(400, json!({"error": {"message": "no replay rule matches"}}));
        };
        let rule = &rules[i];
        let mut hits = hits.lock().unwrap();
        let n = hits[i].min(rule.replies.len().saturating_sub(1));
        hits[i] += 1;
        match rule.replies.get(n) {
            Some(text) => MockReply::content(text.clone()),
            None => MockReply::raw(400, json!({"error": {"message": "replay rule has no replies"}})),
        }
    }
}

type Handler = dyn Fn(&Value, usize) -> MockReply + Send + Sync;

struct Shared {
    handler: Box<Handler>,
    calls: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    log: Mutex<Vec<LoggedRequest>>,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Binds to an ephemeral localhost port. `handler` receives the request
    /// body and the zero-based call index. Must run inside a tokio runtime.
    pub async fn start<F>(handler: F) -> Self
    where
        F: Fn(&Value, usize) -> MockReply + Send + Sync + 'static,
    {
        let shared = Arc::new(Shared {
            handler: Box::new(handler),
            calls: AtomicUsize::new(0),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        });
        let app = Router::new()
            .route("/v1/chat/completions", post(complete))
            .with_state(shared.clone());
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0")
            .await
            .expect("bind mock server");
        let addr = listener.local_addr().expect("local addr");
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await
                .ok();
        });
        Self {
            addr,
            shared,
            shutdown: Some(tx),
        }
    }

    /// Convenience: always reply with the same content.
    pub async fn constant(text: &str) -> Self {
        let text = text.to_string();
        Self::start(move |_, _| MockReply::content(text.clone())).await
    }

    /// Base URL to configure as `llm.base_url`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn request_count(&self) -> usize {
        self.shared.calls.load(Ordering::SeqCst)
    }

    pub fn max_in_flight(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.shared.log.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

async fn complete(
    State(shared): State<Arc<Shared>>,
    headers: axum::http::HeaderMap,
    Json(body): Json<Value>,
) -> Response {
    let index = shared.calls.fetch_add(1, Ordering::SeqCst);
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.max_in_flight.fetch_max(now, Ordering::SeqCst);
    shared.log.lock().unwrap().push(LoggedRequest {
        at: Instant::now(),
        body: body.clone(),
        authorization: headers
            .get("authorization")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string),
    });

    let reply = (shared.handler)(&body, index);
    if !reply.delay.is_zero() {
        tokio::time::sleep(reply.delay).await;
    }
    shared.in_flight.fetch_sub(1, Ordering::SeqCst);

    let status = StatusCode::from_u16(reply.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(reply.body)).into_response()
}
