//! Local JSON API and static file host for the annotation UI.
//!
//! Routes:
//!
//! ```text
//! GET  /api/taxonomy
//! GET  /api/sessions
//! GET  /api/session/{consultation_id}/{run_index}?variant=<id>
//! POST /api/annotations/{consultation_id}
//! POST /api/tokenize
//! GET  /*                                  static assets
//! ```
//!
//! Annotation files land in `<annotations_dir>/<consultation_id>.json`. A
//! save that arrives while another save of the same file is in flight is
//! rejected with 409.

use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::annotation::{
    validate_annotations, AnnotationDocument, AnnotationSet, ErrorType, WordCategory, RELEVANCE_CATEGORIES,
    SCHEMA_VERSION, SUGGESTED_OMISSION_KINDS,
};
use crate::corpus::Corpus;
use crate::experiment::RunLedger;
use crate::report::report_texts;
use crate::rouge::{tokenize_with_offsets, SpannedToken, TokenizerOptions};

pub struct ServeConfig {
    pub corpus: Corpus,
    pub ledger: RunLedger,
    /// Variant shown when a session request names none.
    pub default_variant: String,
    pub annotations_dir: PathBuf,
    pub assets_dir: Option<PathBuf>,
    pub tokenizer: TokenizerOptions,
}

struct AppState {
    config: ServeConfig,
    writing: Mutex<HashSet<PathBuf>>,
}

type Shared = Arc<AppState>;

#[derive(Debug, Serialize, Deserialize)]
pub struct Taxonomy {
    pub schema_version: u32,
    pub error_types: Vec<ErrorType>,
    pub omission_kinds: Vec<String>,
    pub word_categories: Vec<WordCategory>,
    pub relevance_categories: Vec<String>,
}

pub fn taxonomy() -> Taxonomy {
    Taxonomy {
        schema_version: SCHEMA_VERSION,
        error_types: ErrorType::palette(),
        omission_kinds: SUGGESTED_OMISSION_KINDS.iter().map(|s| s.to_string()).collect(),
        word_categories: WordCategory::ALL.to_vec(),
        relevance_categories: RELEVANCE_CATEGORIES.iter().map(|s| s.to_string()).collect(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionRef {
    pub variant_id: String,
    pub consultation_id: String,
    pub run_index: u32,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Session {
    pub consultation_id: String,
    pub run_index: u32,
    pub variant_id: String,
    pub generated_text: String,
    pub reference_text: String,
    pub annotations: AnnotationDocument,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SaveResult {
    pub ok: bool,
    pub violations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    variant: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TokenizeBody {
    text: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

fn annotation_path(dir: &Path, consultation_id: &str) -> Option<PathBuf> {
    let safe = !consultation_id.is_empty()
        && consultation_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    safe.then(|| dir.join(format!("{consultation_id}.json")))
}

async fn get_taxonomy() -> Json<Taxonomy> {
    Json(taxonomy())
}

async fn list_sessions(State(state): State<Shared>) -> Json<Vec<SessionRef>> {
    let mut refs: Vec<SessionRef> = state
        .config
        .ledger
        .records
        .iter()
        .map(|r| SessionRef {
            variant_id: r.variant_id.clone(),
            consultation_id: r.consultation_id.clone(),
            run_index: r.run_index,
        })
        .collect();
    refs.sort_by(|a, b| {
        (&a.variant_id, &a.consultation_id, a.run_index).cmp(&(&b.variant_id, &b.consultation_id, b.run_index))
    });
    refs.dedup_by(|a, b| {
        (&a.variant_id, &a.consultation_id, a.run_index) == (&b.variant_id, &b.consultation_id, b.run_index)
    });
    Json(refs)
}

async fn get_session(
    State(state): State<Shared>,
    UrlPath((consultation_id, run_index)): UrlPath<(String, u32)>,
    Query(query): Query<SessionQuery>,
) -> Response {
    let cfg = &state.config;
    let variant_id = query.variant.unwrap_or_else(|| cfg.default_variant.clone());
    let texts = report_texts(&cfg.ledger, &cfg.corpus, &variant_id);
    let (Some(generated), Some(reference)) = (
        texts.generated(&consultation_id, run_index),
        texts.references.get(&consultation_id),
    ) else {
        return error(
            StatusCode::NOT_FOUND,
            format!("no report for {consultation_id}#{run_index} under {variant_id}"),
        );
    };
    let Some(path) = annotation_path(&cfg.annotations_dir, &consultation_id) else {
        return error(StatusCode::BAD_REQUEST, "invalid consultation id");
    };
    let annotations = if path.exists() {
        match AnnotationDocument::load(&path) {
            Ok(doc) => doc,
            Err(e) => return error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        }
    } else {
        AnnotationDocument {
            variant_id: Some(variant_id.clone()),
            ..AnnotationDocument::new(&consultation_id)
        }
    };
    Json(Session {
        consultation_id,
        run_index,
        variant_id,
        generated_text: generated.to_string(),
        reference_text: reference.clone(),
        annotations,
    })
    .into_response()
}

/// Releases the per-file write claim when dropped.
struct Claim<'a> {
    set: &'a Mutex<HashSet<PathBuf>>,
    path: PathBuf,
}

impl Drop for Claim<'_> {
    fn drop(&mut self) {
        self.set.lock().expect("write set lock").remove(&self.path);
    }
}

async fn save_annotations(
    State(state): State<Shared>,
    UrlPath(consultation_id): UrlPath<String>,
    Json(doc): Json<AnnotationDocument>,
) -> Response {
    let cfg = &state.config;
    if doc.consultation_id != consultation_id {
        return error(StatusCode::BAD_REQUEST, "consultation id in body does not match the URL");
    }
    let Some(path) = annotation_path(&cfg.annotations_dir, &consultation_id) else {
        return error(StatusCode::BAD_REQUEST, "invalid consultation id");
    };
    let variant_id = doc.variant_id.clone().unwrap_or_else(|| cfg.default_variant.clone());
    let texts = report_texts(&cfg.ledger, &cfg.corpus, &variant_id);
    let set = AnnotationSet {
        documents: vec![doc],
    };
    let violations = validate_annotations(&set, &texts);
    if !violations.is_empty() {
        return (
            StatusCode::UNPROCESSABLE_ENTITY,
            Json(SaveResult {
                ok: false,
                violations,
                path: None,
            }),
        )
            .into_response();
    }

    if !state.writing.lock().expect("write set lock").insert(path.clone()) {
        return error(StatusCode::CONFLICT, format!("{} is being written", path.display()));
    }
    let _claim = Claim {
        set: &state.writing,
        path: path.clone(),
    };
    let json = set.documents[0].to_json();
    let tmp = path.with_extension("json.tmp");
    let written = async {
        tokio::fs::create_dir_all(&cfg.annotations_dir).await?;
        tokio::fs::write(&tmp, json).await?;
        tokio::fs::rename(&tmp, &path).await
    }
    .await;
    match written {
        Ok(()) => Json(SaveResult {
            ok: true,
            violations: Vec::new(),
            path: Some(path.display().to_string()),
        })
        .into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn tokenize(State(state): State<Shared>, Json(body): Json<TokenizeBody>) -> Json<Vec<SpannedToken>> {
    Json(tokenize_with_offsets(&body.text, &state.config.tokenizer))
}

pub fn router(config: ServeConfig) -> Router {
    let assets = config.assets_dir.clone();
    let state = Arc::new(AppState {
        config,
        writing: Mutex::new(HashSet::new()),
    });
    let api = Router::new()
        .route("/api/taxonomy", get(get_taxonomy))
        .route("/api/sessions", get(list_sessions))
        .route("/api/session/{consultation_id}/{run_index}", get(get_session))
        .route("/api/annotations/{consultation_id}", post(save_annotations))
        .route("/api/tokenize", post(tokenize))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServeConfig, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving annotation API");
    axum::serve(listener, router(config)).await
}
