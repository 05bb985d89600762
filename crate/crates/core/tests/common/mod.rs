#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use soapbench::experiment::ExperimentConfig;
use soapbench::llm::{BackendConfig, RetryPolicy};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// The shipped mock experiment, writing into `out`.
pub fn fixture_config(out: &Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::load(fixtures().join("experiment.toml")).expect("fixture config loads");
    config.run.output_dir = out.to_path_buf();
    config
}

/// Chat-completions stand-in answering with a fixed status script; the last
/// status repeats once the script runs out.
pub struct FakeServer {
    pub addr: SocketAddr,
    pub hits: Arc<AtomicUsize>,
    pub auth_headers: Arc<Mutex<Vec<String>>>,
    pub bodies: Arc<Mutex<Vec<serde_json::Value>>>,
}

#[derive(Clone)]
struct Script {
    statuses: Arc<Vec<u16>>,
    hits: Arc<AtomicUsize>,
    auth: Arc<Mutex<Vec<String>>>,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
}

async fn reply(
    State(s): State<Script>,
    headers: HeaderMap,
    Json(body): Json<serde_json::Value>,
) -> (StatusCode, Json<serde_json::Value>) {
    let n = s.hits.fetch_add(1, Ordering::SeqCst);
    let status = s.statuses[n.min(s.statuses.len() - 1)];
    if let Some(v) = headers.get("authorization") {
        s.auth.lock().unwrap().push(v.to_str().unwrap_or_default().to_string());
    }
    s.bodies.lock().unwrap().push(body);
    let payload = if status == 200 {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": "S: pain\nO: red\nA: otitis\nP: rest"}}],
            "usage": {"prompt_tokens": 12, "completion_tokens": 8}
        })
    } else {
        serde_json::json!({"error": {"message": "scripted failure"}})
    };
    (StatusCode::from_u16(status).unwrap(), Json(payload))
}

impl FakeServer {
    pub async fn start(statuses: &[u16]) -> Self {
        let script = Script {
            statuses: Arc::new(statuses.to_vec()),
            hits: Arc::new(AtomicUsize::new(0)),
            auth: Arc::new(Mutex::new(Vec::new())),
            bodies: Arc::new(Mutex::new(Vec::new())),
        };
        let out = FakeServer {
            addr: "127.0.0.1:0".parse().unwrap(),
            hits: script.hits.clone(),
            auth_headers: script.auth.clone(),
            bodies: script.bodies.clone(),
        };
        let app = Router::new().route("/v1/chat/completions", post(reply)).with_state(script);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
        FakeServer { addr, ..out }
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Remote backend config for this server with millisecond backoff.
    pub fn backend_config(&self, credential_env: &str) -> BackendConfig {
        BackendConfig {
            retry: RetryPolicy {
                max_attempts: 5,
                base_backoff_ms: 1,
                max_backoff_ms: 5,
                jitter: 0.5,
            },
            timeout_secs: 5.0,
            ..BackendConfig::remote(self.endpoint(), credential_env)
        }
    }
}
