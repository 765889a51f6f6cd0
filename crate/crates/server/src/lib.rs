//! HTTP/JSON service around the simulator.
//!
//! - `GET /health`
//! - `GET /presets`
//! - `POST /run` runs a scenario to completion and returns report and CSV
//! - `POST /tune` pole-placement gains for one axis
//! - `GET /session` upgrades to a WebSocket attached to the live session

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bicopter_core::harness::api::{
    execute_run, execute_tune, preset_list, ErrorBody, PresetInfo, RunRequest, RunResponse,
    TuneRequest,
};
use bicopter_core::harness::scenario::Scenario;
use bicopter_core::harness::session::{ClientMessage, ServerMessage, Session, DEFAULT_DECIMATION};
use bicopter_core::tuning::TuneResult;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::time::{Instant, MissedTickBehavior};

mod pacing;

pub use pacing::Pacing;

/// Frames queued per subscriber before new ones are dropped.
const SUBSCRIBER_QUEUE: usize = 1024;

#[derive(Debug, Clone, Copy)]
pub struct SessionConfig {
    pub pacing: Pacing,
    /// One telemetry frame every this many ticks.
    pub decimation: u32,
    /// How often a paused session still reports its state.
    pub heartbeat: Duration,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            pacing: Pacing::Realtime,
            decimation: DEFAULT_DECIMATION,
            heartbeat: Duration::from_millis(250),
        }
    }
}

enum Inbound {
    Command {
        conn: u64,
        msg: ClientMessage,
        received_tick: u64,
    },
    Subscribe {
        conn: u64,
        tx: mpsc::Sender<Arc<str>>,
    },
    Unsubscribe {
        conn: u64,
    },
}

/// Cheap handle onto the session task.
#[derive(Clone)]
pub struct SessionHandle {
    tx: mpsc::UnboundedSender<Inbound>,
    tick: Arc<AtomicU64>,
    next_conn: Arc<AtomicU64>,
}

impl SessionHandle {
    /// Tick index the session will compute next.
    pub fn tick(&self) -> u64 {
        self.tick.load(Ordering::Acquire)
    }
}

/// Start the session task on the current runtime.
pub fn spawn_session(
    scenario: Scenario,
    config: SessionConfig,
) -> bicopter_core::Result<SessionHandle> {
    let session = Session::new(scenario, config.decimation)?;
    let (tx, rx) = mpsc::unbounded_channel();
    let tick = Arc::new(AtomicU64::new(0));
    tokio::spawn(run_session(session, config, rx, tick.clone()));
    Ok(SessionHandle {
        tx,
        tick,
        next_conn: Arc::new(AtomicU64::new(1)),
    })
}

struct Hub {
    subscribers: HashMap<u64, mpsc::Sender<Arc<str>>>,
}

impl Hub {
    fn broadcast(&mut self, msg: &ServerMessage) {
        let text: Arc<str> = msg.to_json().into();
        self.subscribers
            .retain(|_, tx| match tx.try_send(text.clone()) {
                Ok(()) | Err(mpsc::error::TrySendError::Full(_)) => true,
                Err(mpsc::error::TrySendError::Closed(_)) => false,
            });
    }

    fn send(&mut self, conn: u64, msg: &ServerMessage) {
        if let Some(tx) = self.subscribers.get(&conn) {
            if tx.try_send(msg.to_json().into()).is_err() {
                tracing::warn!(conn, "subscriber queue full, reply dropped");
            }
        }
    }
}

fn handle_inbound(session: &mut Session, hub: &mut Hub, msg: Inbound, clock: &mut pacing::Clock) {
    match msg {
        Inbound::Subscribe { conn, tx } => {
            hub.subscribers.insert(conn, tx);
            hub.send(conn, &ServerMessage::Telemetry(session.frame()));
        }
        Inbound::Unsubscribe { conn } => {
            hub.subscribers.remove(&conn);
        }
        Inbound::Command {
            conn,
            msg,
            received_tick,
        } => {
            let was_paused = session.is_paused();
            let mut reply = session.apply(msg);
            if let ServerMessage::Ack {
                received_tick: r, ..
            } = &mut reply
            {
                *r = received_tick.min(*r);
            }
            // pausing, resuming or resetting restarts the wall-clock schedule
            if was_paused != session.is_paused() || session.tick() == 0 {
                clock.rebase(session.tick());
            }
            hub.send(conn, &reply);
        }
    }
}

async fn run_session(
    mut session: Session,
    config: SessionConfig,
    mut rx: mpsc::UnboundedReceiver<Inbound>,
    tick: Arc<AtomicU64>,
) {
    let mut hub = Hub {
        subscribers: HashMap::new(),
    };
    let mut clock = pacing::Clock::new(config.pacing, session.dt(), session.tick());
    let mut wake = tokio::time::interval(config.pacing.wake_period());
    wake.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let mut last_heartbeat = Instant::now();

    loop {
        tokio::select! {
            msg = rx.recv() => match msg {
                Some(m) => handle_inbound(&mut session, &mut hub, m, &mut clock),
                None => break,
            },
            _ = wake.tick() => {
                if session.is_paused() {
                    if last_heartbeat.elapsed() >= config.heartbeat {
                        hub.broadcast(&ServerMessage::Telemetry(session.frame()));
                        last_heartbeat = Instant::now();
                    }
                    continue;
                }
                let due = clock.due(session.tick());
                for _ in 0..due {
                    // commands land between ticks, never inside one
                    while let Ok(m) = rx.try_recv() {
                        handle_inbound(&mut session, &mut hub, m, &mut clock);
                    }
                    if session.is_paused() {
                        break;
                    }
                    match session.advance() {
                        Ok(Some(frame)) => hub.broadcast(&ServerMessage::Telemetry(frame)),
                        Ok(None) => {}
                        Err(e) => {
                            hub.broadcast(&ServerMessage::Error { id: None, message: format!("{e}; session paused, send reset") });
                            break;
                        }
                    }
                    tick.store(session.tick(), Ordering::Release);
                }
                tick.store(session.tick(), Ordering::Release);
                if config.pacing == Pacing::Fast {
                    tokio::task::yield_now().await;
                }
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    session: Option<SessionHandle>,
}

pub fn router(session: Option<SessionHandle>) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/presets", get(presets))
        .route("/run", post(run))
        .route("/tune", post(tune))
        .route("/session", get(session_ws))
        .with_state(AppState { session })
}

/// Serve until the process receives Ctrl-C.
pub async fn serve(listener: TcpListener, session: Option<SessionHandle>) -> std::io::Result<()> {
    axum::serve(listener, router(session))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<bicopter_core::Error> for ApiError {
    fn from(e: bicopter_core::Error) -> Self {
        let status = if e.is_config_error() {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        ApiError(status, e.to_string())
    }
}

async fn presets() -> Json<Vec<PresetInfo>> {
    Json(preset_list())
}

async fn run(Json(req): Json<RunRequest>) -> Result<Json<RunResponse>, ApiError> {
    let out = tokio::task::spawn_blocking(move || execute_run(&req))
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    Ok(Json(out))
}

async fn tune(Json(req): Json<TuneRequest>) -> Result<Json<TuneResult>, ApiError> {
    Ok(Json(execute_tune(&req)?))
}

async fn session_ws(
    State(state): State<AppState>,
    ws: WebSocketUpgrade,
) -> Result<Response, ApiError> {
    let handle = state.session.ok_or_else(|| {
        ApiError(
            StatusCode::NOT_FOUND,
            "no live session on this server".into(),
        )
    })?;
    Ok(ws.on_upgrade(move |socket| connection(socket, handle)))
}

async fn connection(socket: WebSocket, handle: SessionHandle) {
    let conn = handle.next_conn.fetch_add(1, Ordering::Relaxed);
    let (out_tx, mut out_rx) = mpsc::channel::<Arc<str>>(SUBSCRIBER_QUEUE);
    if handle
        .tx
        .send(Inbound::Subscribe {
            conn,
            tx: out_tx.clone(),
        })
        .is_err()
    {
        return;
    }
    let (mut sink, mut stream) = socket.split();

    let writer = tokio::spawn(async move {
        while let Some(text) = out_rx.recv().await {
            if sink
                .send(Message::Text(text.as_ref().into()))
                .await
                .is_err()
            {
                break;
            }
        }
    });

    while let Some(Ok(frame)) = stream.next().await {
        let text = match frame {
            Message::Text(t) => t,
            Message::Close(_) => break,
            _ => continue,
        };
        let received_tick = handle.tick();
        match ClientMessage::parse(text.as_str()) {
            Ok(msg) => {
                if handle
                    .tx
                    .send(Inbound::Command {
                        conn,
                        msg,
                        received_tick,
                    })
                    .is_err()
                {
                    break;
                }
            }
            Err(e) => {
                let reply = ServerMessage::Error {
                    id: None,
                    message: format!("malformed message: {e}"),
                };
                let _ = out_tx.try_send(reply.to_json().into());
            }
        }
    }
    let _ = handle.tx.send(Inbound::Unsubscribe { conn });
    writer.abort();
}
