//! HTTP front end of an [`Experiment`].

use std::future::Future;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::round::load_rounds;
use super::store::Experiment;
use crate::error::{Error, Result};
use crate::funnel::{Response, Task};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const ENV_DATA_DIR: &str = "MIRRORGLASS_DATA_DIR";
pub const ENV_PORT: &str = "MIRRORGLASS_PORT";
pub const ENV_LOG: &str = "MIRRORGLASS_LOG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeConfig {
    pub rounds: PathBuf,
    pub records: PathBuf,
    pub images: PathBuf,
    pub port: u16,
}

impl ServeConfig {
    /// `rounds.json`, `records.jsonl` and `images/` under the data
    /// directory (default `./data`), port from the environment (default 8080).
    pub fn from_env() -> Result<Self> {
        let dir = PathBuf::from(std::env::var(ENV_DATA_DIR).unwrap_or_else(|_| "data".into()));
        let port = match std::env::var(ENV_PORT) {
            Ok(p) => p
                .parse()
                .map_err(|_| Error::invalid(format!("{ENV_PORT}={p} is not a port")))?,
            Err(_) => 8080,
        };
        Ok(Self::in_dir(&dir, port))
    }

    pub fn in_dir(dir: &Path, port: u16) -> Self {
        ServeConfig {
            rounds: dir.join("rounds.json"),
            records: dir.join("records.jsonl"),
            images: dir.join("images"),
            port,
        }
    }
}

pub struct AppState {
    exp: Mutex<Experiment>,
    images: PathBuf,
}

impl AppState {
    pub fn new(exp: Experiment, images: PathBuf) -> Arc<Self> {
        Arc::new(AppState {
            exp: Mutex::new(exp),
            images,
        })
    }

    /// The single writer. A panic while holding it cannot leave a partial
    /// record in memory, so a poisoned lock is still usable.
    pub fn experiment(&self) -> MutexGuard<'_, Experiment> {
        self.exp.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        let msg = self.0.to_string();
        let (status, body) = match self.0 {
            Error::NotFound(_) => (StatusCode::NOT_FOUND, json!({ "error": msg })),
            Error::InvalidArgument(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, json!({ "error": msg }))
            }
            Error::RatingRejected {
                current_trial,
                current_image,
                ..
            } => (
                StatusCode::CONFLICT,
                json!({
                    "error": msg,
                    "current_trial": current_trial,
                    "current_image": current_image,
                }),
            ),
            e => {
                log::error!("request failed: {e}");
                (StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg }))
            }
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub version: String,
    pub open_rounds: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RoundInfo {
    pub round_id: String,
    pub task: Task,
    pub duration_ms: u64,
    pub trials: usize,
    pub raters_required: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NewSession {
    pub rater_id: String,
    pub round_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub rater_id: String,
    pub round_id: String,
    pub cursor: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub trial_index: usize,
    pub image_url: String,
    pub task: Task,
    pub duration_ms: u64,
    pub scale_labels: Vec<String>,
}

/// Body of `GET /api/sessions/:id/next`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Next {
    Trial(TrialView),
    Complete { complete: bool, total: usize },
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RatingBody {
    pub image_id: String,
    pub response: serde_json::Value,
    pub rt_ms: u64,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn valid_image_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

async fn health(State(st): State<Arc<AppState>>) -> Json<Health> {
    Json(Health {
        version: VERSION.to_string(),
        open_rounds: st.experiment().open_rounds(),
    })
}

async fn rounds(State(st): State<Arc<AppState>>) -> Json<Vec<RoundInfo>> {
    Json(
        st.experiment()
            .rounds()
            .map(|r| RoundInfo {
                round_id: r.round_id.clone(),
                task: r.task,
                duration_ms: r.duration_ms,
                trials: r.trial_count(),
                raters_required: r.raters_required,
            })
            .collect(),
    )
}

async fn create_session(
    State(st): State<Arc<AppState>>,
    Json(body): Json<NewSession>,
) -> ApiResult<SessionInfo> {
    let s = st
        .experiment()
        .open_session(&body.rater_id, &body.round_id)?;
    Ok(Json(SessionInfo {
        session_id: s.session_id,
        rater_id: s.rater_id,
        round_id: s.round_id,
        cursor: s.cursor,
        total: s.trials.len(),
    }))
}

async fn next(State(st): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Next> {
    let exp = st.experiment();
    let s = exp.session(&id)?;
    let Some(image) = s.current() else {
        return Ok(Json(Next::Complete {
            complete: true,
            total: s.trials.len(),
        }));
    };
    let round = exp.round(&s.round_id)?;
    Ok(Json(Next::Trial(TrialView {
        trial_index: s.cursor,
        image_url: format!("/api/images/{image}"),
        task: round.task,
        duration_ms: round.duration_ms,
        scale_labels: round.scale_labels().into_iter().map(String::from).collect(),
    })))
}

async fn rating(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(body): Json<RatingBody>,
) -> ApiResult<super::store::Ack> {
    let response: Response = serde_json::from_value(body.response.clone())
        .map_err(|_| Error::invalid(format!("unrecognized response {}", body.response)))?;
    let ack = st
        .experiment()
        .submit(&id, &body.image_id, response, body.rt_ms, now_ms())?;
    Ok(Json(ack))
}

async fn image(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<HttpResponse, ApiError> {
    if !valid_image_id(&id) {
        return Err(Error::NotFound(format!("image {id}")).into());
    }
    let path = st.images.join(format!("{id}.png"));
    match tokio::fs::read(&path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(Error::NotFound(format!("image {id}")).into())
        }
        Err(e) => Err(Error::from(e).into()),
    }
}

async fn progress(
    State(st): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<super::store::RoundProgress> {
    Ok(Json(st.experiment().progress(&id)?))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/rounds", get(rounds))
        .route("/api/rounds/{id}/progress", get(progress))
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}/next", get(next))
        .route("/api/sessions/{id}/rating", post(rating))
        .route("/api/images/{id}", get(image))
        .with_state(state)
}

/// Load the stores named by `cfg`, failing early if any is unusable.
pub fn load_state(cfg: &ServeConfig) -> Result<Arc<AppState>> {
    let rounds = load_rounds(&cfg.rounds)?;
    std::fs::read_dir(&cfg.images)
        .map_err(|e| Error::format(&cfg.images, format!("image store unreadable: {e}")))?;
    let exp = Experiment::open(rounds, &cfg.records)?;
    Ok(AppState::new(exp, cfg.images.clone()))
}

/// Serve until `shutdown` resolves, then sync the record log.
pub async fn serve(
    cfg: &ServeConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<()> {
    let state = load_state(cfg)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.experiment().sync()?;
    log::info!("record log synced, shutting down");
    Ok(())
}
