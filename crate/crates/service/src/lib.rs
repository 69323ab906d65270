//! Reading-session service: an HTTP+JSON front end over a file-backed
//! session store and the unknown-word scorer.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | `{user_id, doc}` | [`SessionRecord`] |
//! | GET | `/sessions/{id}` | | [`SessionRecord`] |
//! | POST | `/sessions/{id}/gaze` | `{samples}` | `{accepted}` |
//! | POST | `/sessions/{id}/marks` | `{words}` | [`SessionRecord`] |
//! | POST | `/sessions/{id}/close` | | [`Predictions`] |
//! | GET | `/sessions/{id}/predictions` | | [`Predictions`] |
//! | GET | `/users/{id}/vocab` | | `[VocabEntry]` |
//! | POST | `/users/{id}/vocab/{word}/dismiss` | | 204 |
//! | GET | `/users/{id}/sessions` | | `[SessionRecord]` |

mod config;
mod error;
mod store;

pub use config::{ServiceConfig, ENV_PREFIX};
pub use error::{ServiceError, ServiceResult};
pub use store::{Event, ScoringJob, SessionRecord, Status, Store, VocabEntry};

use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use gazereader::model::Checkpoint;
use gazereader::pipeline::{flagged, Scorer, WordScore};
use gazereader::{DocumentLayout, GazeSample};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::Semaphore;

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<Store>,
    pub scorer: Option<Arc<Scorer>>,
    pool: Arc<Semaphore>,
    token: Option<Arc<str>>,
}

impl AppState {
    pub fn new(store: Store, scorer: Option<Scorer>, workers: usize, token: Option<String>) -> Self {
        AppState {
            store: Arc::new(store),
            scorer: scorer.map(Arc::new),
            pool: Arc::new(Semaphore::new(workers.max(1))),
            token: token.map(Arc::from),
        }
    }

    /// Opens the data directory and loads the checkpoint named in `cfg`.
    pub fn from_config(cfg: &ServiceConfig) -> ServiceResult<Self> {
        let store = Store::open(&cfg.data_dir)?;
        store.compact()?;
        let scorer = match &cfg.checkpoint {
            Some(path) => {
                let ckpt = Checkpoint::load(path).map_err(|e| ServiceError::Unavailable(format!("checkpoint {}: {e}", path.display())))?;
                Some(Scorer::from_checkpoint(&ckpt)?)
            }
            None => None,
        };
        Ok(AppState::new(store, scorer, cfg.workers, cfg.token.clone()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub user_id: String,
    pub doc: DocumentLayout,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GazeBatch {
    pub samples: Vec<GazeSample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Marks {
    pub words: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub session_id: String,
    pub status: Status,
    pub predicted_words: Vec<WordScore>,
}

impl Predictions {
    fn of(r: SessionRecord) -> ServiceResult<Self> {
        match r.predicted_words {
            Some(p) if r.status == Status::Scored => Ok(Predictions { session_id: r.session_id, status: r.status, predicted_words: p }),
            _ => Err(ServiceError::Conflict(format!("session {} is {:?}; predictions exist once it is scored", r.session_id, r.status))),
        }
    }
}

pub fn router(state: AppState, max_body: usize) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/gaze", post(append_gaze))
        .route("/sessions/{id}/marks", post(mark_words))
        .route("/sessions/{id}/close", post(close_session))
        .route("/sessions/{id}/predictions", get(predictions))
        .route("/users/{id}/vocab", get(vocab))
        .route("/users/{id}/vocab/{word}/dismiss", post(dismiss))
        .route("/users/{id}/sessions", get(user_sessions))
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .route("/health", get(|| async { Json(json!({ "ok": true })) }))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}

async fn authorize(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let given = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_ref()) {
            return ServiceError::Unauthorized.into_response();
        }
    }
    next.run(req).await
}

/// Runs blocking store or model work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ServiceResult<T> + Send + 'static) -> ServiceResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

async fn create_session(State(st): State<AppState>, Json(body): Json<CreateSession>) -> ServiceResult<(StatusCode, Json<SessionRecord>)> {
    let store = st.store.clone();
    let rec = blocking(move || store.create_session(&body.user_id, body.doc)).await?;
    Ok((StatusCode::CREATED, Json(rec)))
}

async fn get_session(State(st): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<SessionRecord>> {
    Ok(Json(st.store.session(&id)?))
}

async fn append_gaze(State(st): State<AppState>, Path(id): Path<String>, Json(body): Json<GazeBatch>) -> Response {
    let store = st.store.clone();
    match blocking(move || store.append_gaze(&id, body.samples)).await {
        Ok(n) => Json(json!({ "accepted": n })).into_response(),
        Err(e) => (e.status(), Json(json!({ "accepted": 0, "error": e.to_string() }))).into_response(),
    }
}

async fn mark_words(State(st): State<AppState>, Path(id): Path<String>, Json(body): Json<Marks>) -> ServiceResult<Json<SessionRecord>> {
    let store = st.store.clone();
    Ok(Json(blocking(move || store.mark_words(&id, body.words)).await?))
}

/// Closes the session and scores it on the bounded worker pool.
async fn close_session(State(st): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<Predictions>> {
    let store = st.store.clone();
    let sid = id.clone();
    let Some(job) = blocking(move || store.close(&sid)).await? else {
        return Ok(Json(Predictions::of(st.store.session(&id)?)?));
    };
    let scorer = st.scorer.clone().ok_or_else(|| ServiceError::Unavailable("no checkpoint is loaded; the session stays closed".into()))?;
    let _permit = st.pool.acquire().await.map_err(|e| ServiceError::Internal(e.to_string()))?;
    let store = st.store.clone();
    let rec = blocking(move || {
        let scores = scorer.score_session(&job.session_id, &job.user_id, &job.doc, &job.trace)?;
        let predicted = flagged(&scores, scorer.threshold());
        store.record_scores(&job, &scorer.align, predicted)
    })
    .await?;
    Ok(Json(Predictions::of(rec)?))
}

async fn predictions(State(st): State<AppState>, Path(id): Path<String>) -> ServiceResult<Json<Predictions>> {
    Ok(Json(Predictions::of(st.store.session(&id)?)?))
}

async fn vocab(State(st): State<AppState>, Path(user): Path<String>) -> Json<Vec<VocabEntry>> {
    Json(st.store.vocab(&user))
}

async fn dismiss(State(st): State<AppState>, Path((user, word)): Path<(String, String)>) -> ServiceResult<StatusCode> {
    let store = st.store.clone();
    blocking(move || store.dismiss(&user, &word)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn user_sessions(State(st): State<AppState>, Path(user): Path<String>) -> Json<Vec<SessionRecord>> {
    Json(st.store.sessions(&user))
}

/// Binds `cfg.bind` and serves until the process is stopped.
pub async fn serve(cfg: ServiceConfig) -> ServiceResult<()> {
    let state = AppState::from_config(&cfg)?;
    let listener = tokio::net::TcpListener::bind(cfg.bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state, cfg.max_body)).await?;
    Ok(())
}
