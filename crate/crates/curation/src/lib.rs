//! Local HTTP service for reviewing mapping candidates.
//!
//! A [`CurationSession`] owns one candidate set and its append-only decision
//! log. At most one session can hold a log: an exclusive OS lock is taken on
//! `<log>.lock` when the session opens and released when it is dropped or the
//! process dies. Opening replays the log, so a restarted service resumes
//! exactly where the previous one stopped.
//!
//! Every accepted POST is validated by the same rules as offline
//! [`MappingCandidateSet::apply_decisions`], appended to the log and synced to
//! disk before the response is sent.

use std::fs::{self, File, OpenOptions, TryLockError};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use aceterm::curation::{append_decision, read_decision_log, CurationError, Progress, ResolutionState};
use aceterm::terminology::TermEntry;
use aceterm::{CandidateList, CurationDecision, Cui, Lexicon, MappingCandidateSet, Terminology, Verdict};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";
pub const DEFAULT_CURATOR: &str = "curator";
const INDEX_HTML: &str = include_str!("index.html");

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("decision log {0} is already held by another curation session")]
    Locked(PathBuf),
    #[error("decision log {path}: {source}")]
    Log { path: PathBuf, source: CurationError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

/// What a session needs besides the candidate set.
#[derive(Debug, Clone, Default)]
pub struct SessionOptions {
    /// Lexicon used to add surface forms as synonyms in the preview.
    pub lexicon: Option<Lexicon>,
    /// Project terms merged into the preview.
    pub project_terms: Vec<TermEntry>,
    pub terminology_name: Option<String>,
}

struct LogWriter {
    file: File,
    lines: u64,
    _lock: File,
}

pub struct CurationSession {
    state: RwLock<MappingCandidateSet>,
    writer: Mutex<LogWriter>,
    log_path: PathBuf,
    options: SessionOptions,
    replayed: usize,
}

pub fn lock_path(log_path: &Path) -> PathBuf {
    let mut name = log_path.file_name().unwrap_or_default().to_os_string();
    name.push(".lock");
    log_path.with_file_name(name)
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> SessionError + '_ {
    move |source| SessionError::Io { path: path.to_owned(), source }
}

impl CurationSession {
    /// Locks `log_path`, replays it onto `candidates` and readies it for
    /// appends. A trailing partial line left by an interrupted write is cut
    /// off so the next append starts on a fresh line.
    pub fn open(
        candidates: MappingCandidateSet,
        log_path: impl Into<PathBuf>,
        options: SessionOptions,
    ) -> Result<Self, SessionError> {
        let log_path = log_path.into();
        let lock_file_path = lock_path(&log_path);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_file_path)
            .map_err(io_err(&lock_file_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(TryLockError::WouldBlock) => return Err(SessionError::Locked(log_path)),
            Err(TryLockError::Error(e)) => return Err(SessionError::Io { path: lock_file_path, source: e }),
        }

        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(&log_path)
            .map_err(io_err(&log_path))?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw).map_err(io_err(&log_path))?;
        let decisions = read_decision_log(raw.as_slice()).map_err(|source| SessionError::Log {
            path: log_path.clone(),
            source,
        })?;
        let state = candidates.apply_decisions(&decisions).map_err(|source| SessionError::Log {
            path: log_path.clone(),
            source,
        })?;
        let keep = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        if keep < raw.len() {
            file.set_len(keep as u64).map_err(io_err(&log_path))?;
            file.sync_data().map_err(io_err(&log_path))?;
        }
        file.seek(SeekFrom::End(0)).map_err(io_err(&log_path))?;

        Ok(CurationSession {
            state: RwLock::new(state),
            writer: Mutex::new(LogWriter {
                file,
                lines: decisions.len() as u64,
                _lock: lock,
            }),
            log_path,
            options,
            replayed: decisions.len(),
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    /// Decisions read back from the log at open.
    pub fn replayed(&self) -> usize {
        self.replayed
    }

    pub fn progress(&self) -> Progress {
        self.state.read().expect("state lock").progress()
    }

    pub fn snapshot(&self) -> MappingCandidateSet {
        self.state.read().expect("state lock").clone()
    }

    pub fn preview(&self) -> Terminology {
        let name = self.options.terminology_name.as_deref().unwrap_or("preview");
        self.state
            .read()
            .expect("state lock")
            .preview_terminology(name, self.options.lexicon.as_ref(), &self.options.project_terms)
    }

    /// Validates, appends and applies one decision. Writers are serialized,
    /// and the log line is on disk before the in-memory state changes.
    pub fn record(&self, d: CurationDecision) -> Result<Progress, RecordError> {
        let mut writer = self.writer.lock().expect("writer lock");
        let next = self
            .state
            .read()
            .expect("state lock")
            .apply_decisions(std::slice::from_ref(&d))
            .map_err(RecordError::Invalid)?;
        let mut line = Vec::with_capacity(256);
        append_decision(&mut line, &d).map_err(RecordError::Invalid)?;
        writer.file.write_all(&line).map_err(RecordError::Io)?;
        writer.file.sync_data().map_err(RecordError::Io)?;
        writer.lines += 1;
        let progress = next.progress();
        *self.state.write().expect("state lock") = next;
        Ok(progress)
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error(transparent)]
    Invalid(CurationError),
    #[error("writing decision log: {0}")]
    Io(io::Error),
}

// ---------------------------------------------------------------------------
// HTTP

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatusFilter {
    Unresolved,
    Accepted,
    Rejected,
    #[default]
    All,
}

#[derive(Debug, Deserialize)]
pub struct CandidatesQuery {
    #[serde(default)]
    pub status: StatusFilter,
}

/// Row as served to the UI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RowView {
    pub class_iri: String,
    pub label: String,
    pub context: Vec<String>,
    pub candidates: CandidateList,
    pub status: ResolutionState,
    pub resolution: Option<CurationDecision>,
}

/// POST body: a decision whose curator and timestamp may be left for the
/// server to fill in.
#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    pub class_iri: String,
    pub verdict: Verdict,
    #[serde(default)]
    pub chosen_cui: Option<Cui>,
    #[serde(default)]
    pub curator: Option<String>,
    #[serde(default)]
    pub timestamp: Option<chrono::DateTime<chrono::Utc>>,
    #[serde(default)]
    pub note: Option<String>,
}

impl DecisionRequest {
    fn into_decision(self) -> CurationDecision {
        CurationDecision {
            class_iri: self.class_iri,
            verdict: self.verdict,
            chosen_cui: self.chosen_cui,
            curator: self.curator.unwrap_or_else(|| DEFAULT_CURATOR.to_owned()),
            timestamp: self.timestamp.unwrap_or_else(chrono::Utc::now),
            note: self.note,
        }
    }
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(ErrorBody { error: msg.into() })).into_response()
}

pub fn router(session: Arc<CurationSession>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/index.html", get(index))
        .route("/api/candidates", get(candidates))
        .route("/api/decisions", post(decide))
        .route("/api/progress", get(progress))
        .route("/api/terminology/preview", get(preview))
        .with_state(session)
}

async fn index() -> impl IntoResponse {
    ([(header::CACHE_CONTROL, "no-cache")], Html(INDEX_HTML))
}

async fn candidates(
    State(s): State<Arc<CurationSession>>,
    query: Result<Query<CandidatesQuery>, QueryRejection>,
) -> Response {
    let filter = match query {
        Ok(Query(q)) => q.status,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let state = s.state.read().expect("state lock");
    let rows: Vec<RowView> = state
        .rows
        .iter()
        .filter(|r| match filter {
            StatusFilter::All => true,
            StatusFilter::Unresolved => r.state() == ResolutionState::Unresolved,
            StatusFilter::Accepted => r.state() == ResolutionState::Accepted,
            StatusFilter::Rejected => r.state() == ResolutionState::Rejected,
        })
        .map(|r| RowView {
            class_iri: r.class_iri.clone(),
            label: r.label.clone(),
            context: r.context.clone(),
            candidates: r.candidates.clone(),
            status: r.state(),
            resolution: r.resolution.clone(),
        })
        .collect();
    Json(rows).into_response()
}

async fn decide(
    State(s): State<Arc<CurationSession>>,
    body: Result<Json<DecisionRequest>, JsonRejection>,
) -> Response {
    let req = match body {
        Ok(Json(r)) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.body_text()),
    };
    let decision = req.into_decision();
    let result = tokio::task::spawn_blocking(move || s.record(decision)).await;
    match result {
        Ok(Ok(p)) => Json(p).into_response(),
        Ok(Err(RecordError::Invalid(e))) => error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
        Ok(Err(e)) => {
            log::error!("{e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
        }
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn progress(State(s): State<Arc<CurationSession>>) -> Json<Progress> {
    Json(s.progress())
}

async fn preview(State(s): State<Arc<CurationSession>>) -> Json<Terminology> {
    Json(s.preview())
}

/// A running service. Dropping the handle does not stop it; call
/// [`ServiceHandle::shutdown`].
pub struct ServiceHandle {
    pub local_addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<io::Result<()>>,
}

impl ServiceHandle {
    pub async fn shutdown(mut self) -> io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(io::Error::other)?
    }

    /// Waits until the server stops on its own.
    pub async fn wait(self) -> io::Result<()> {
        self.task.await.map_err(io::Error::other)?
    }
}

/// Binds `addr` and serves the session in the background.
pub async fn serve(session: Arc<CurationSession>, addr: &str) -> io::Result<ServiceHandle> {
    let listener = TcpListener::bind(addr).await?;
    let local_addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(session);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(ServiceHandle {
        local_addr,
        shutdown: Some(tx),
        task,
    })
}

/// Reads the candidate set written by `map candidates`.
pub fn load_candidate_set(path: &Path) -> Result<MappingCandidateSet, SessionError> {
    let f = fs::File::open(path).map_err(io_err(path))?;
    MappingCandidateSet::load(io::BufReader::new(f)).map_err(|source| SessionError::Log {
        path: path.to_owned(),
        source,
    })
}
