//! HTTP + WebSocket front end for live matches.
//!
//! Each match sits behind its own mutex, so moves within a match are
//! serialised while different matches proceed independently. Agent
//! decisions may block on network calls and therefore run on the blocking
//! thread pool.

pub mod matches;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use arena_core::backends::BackendPool;
use arena_core::engine::default_registry;
use arena_core::tracestore::{StoreError, TraceStore};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::json;
use tokio::sync::broadcast::error::RecvError;

pub use matches::{CreateMatch, Event, Match, MatchError, MatchStatus, Snapshot, SubmitMove};

const INDEX: &str = include_str!("../assets/index.html");

type Shared = Arc<Mutex<Match>>;

pub struct AppState {
    matches: Mutex<HashMap<String, Shared>>,
    backends: BackendPool,
    store: Option<Mutex<TraceStore>>,
}

impl AppState {
    /// `db`: trace store receiving finished matches; `None` keeps them in
    /// memory only.
    pub fn new(db: Option<PathBuf>) -> Result<Arc<Self>, StoreError> {
        let store = db.map(TraceStore::open).transpose()?.map(Mutex::new);
        Ok(Arc::new(Self {
            matches: Mutex::new(HashMap::new()),
            backends: BackendPool::new(),
            store,
        }))
    }

    fn get(&self, id: &str) -> Result<Shared, MatchError> {
        self.matches
            .lock()
            .expect("match table")
            .get(id)
            .cloned()
            .ok_or_else(|| MatchError::NotFound(id.to_string()))
    }

    fn persist(&self, m: &mut Match) {
        let Some(store) = &self.store else { return };
        let mut store = store.lock().expect("store lock");
        let result = (|| {
            let id = store.next_episode_id()?;
            let Some((config, episode, moves)) = m.take_trace(id) else {
                return Ok(());
            };
            let config = serde_json::to_string(&config).expect("serialisable");
            store.insert_run(&episode.run_id, &chrono::Utc::now().to_rfc3339(), &config)?;
            store.write_episode(&episode, &moves)
        })();
        if let Err(e) = result {
            tracing::error!(match_id = m.id(), error = %e, "failed to persist match");
        }
    }
}

struct ApiError(MatchError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let message = self.0.to_string();
        match self.0 {
            MatchError::BadRequest(_) => (StatusCode::BAD_REQUEST, Json(json!({ "error": message }))).into_response(),
            MatchError::NotFound(_) => (StatusCode::NOT_FOUND, Json(json!({ "error": message }))).into_response(),
            MatchError::Conflict { legal_actions, .. } => (
                StatusCode::CONFLICT,
                Json(json!({ "error": message, "legal_actions": legal_actions })),
            )
                .into_response(),
        }
    }
}

impl From<MatchError> for ApiError {
    fn from(e: MatchError) -> Self {
        ApiError(e)
    }
}

#[derive(Serialize)]
struct GameInfo {
    name: String,
    title: String,
    num_players: usize,
    simultaneous: bool,
    max_turns: u32,
}

async fn list_games() -> Json<Vec<GameInfo>> {
    let reg = default_registry();
    let games = reg
        .names()
        .filter_map(|name| {
            let game = reg.create(&arena_core::engine::GameSpec::new(name)).ok()?;
            let meta = game.metadata();
            Some(GameInfo {
                title: game.title().to_string(),
                name: name.to_string(),
                num_players: meta.num_players,
                simultaneous: meta.simultaneous,
                max_turns: meta.max_turns,
            })
        })
        .collect();
    Json(games)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(MatchError::BadRequest(e.to_string())))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> T {
    tokio::task::spawn_blocking(f).await.expect("match task panicked")
}

async fn create_match(State(app): State<Arc<AppState>>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let req: CreateMatch = parse_body(&body)?;
    let snapshot = blocking(move || {
        let id = format!("{:016x}", rand::random::<u64>());
        let mut m = Match::create(id.clone(), req, &app.backends)?;
        app.persist(&mut m);
        let snapshot = m.snapshot();
        app.matches.lock().expect("match table").insert(id, Arc::new(Mutex::new(m)));
        Ok::<_, MatchError>(snapshot)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(snapshot)).into_response())
}

async fn get_match(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<Snapshot>, ApiError> {
    let m = app.get(&id)?;
    let snapshot = m.lock().expect("match lock").snapshot();
    Ok(Json(snapshot))
}

async fn submit_move(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: axum::body::Bytes,
) -> Result<Json<Snapshot>, ApiError> {
    let req: SubmitMove = parse_body(&body)?;
    let m = app.get(&id)?;
    let snapshot = blocking(move || {
        let mut m = m.lock().expect("match lock");
        m.submit(&req)?;
        app.persist(&mut m);
        Ok::<_, MatchError>(m.snapshot())
    })
    .await?;
    Ok(Json(snapshot))
}

async fn stream(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let m = app.get(&id)?;
    Ok(ws.on_upgrade(move |socket| forward(socket, m)))
}

async fn forward(mut socket: WebSocket, m: Shared) {
    // Subscribing under the match lock means no event falls between the
    // replayed backlog and the live tail.
    let (backlog, mut rx) = m.lock().expect("match lock").subscribe();
    for event in backlog {
        if send(&mut socket, &event).await.is_err() {
            return;
        }
    }
    loop {
        tokio::select! {
            event = rx.recv() => match event {
                Ok(event) => {
                    if send(&mut socket, &event).await.is_err() {
                        return;
                    }
                }
                Err(RecvError::Lagged(_)) => {
                    let _ = socket.send(Message::Close(None)).await;
                    return;
                }
                Err(RecvError::Closed) => return,
            },
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
                _ => {}
            },
        }
    }
}

async fn send(socket: &mut WebSocket, event: &Event) -> Result<(), axum::Error> {
    let text = serde_json::to_string(event).expect("serialisable");
    socket.send(Message::Text(text.into())).await
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/", get(|| async { Html(INDEX) }))
        .route("/api/games", get(list_games))
        .route("/api/matches", post(create_match))
        .route("/api/matches/{id}", get(get_match))
        .route("/api/matches/{id}/moves", post(submit_move))
        .route("/api/matches/{id}/stream", get(stream))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, db: Option<PathBuf>) -> std::io::Result<()> {
    let state = AppState::new(db).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}
