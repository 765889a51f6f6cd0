//! Client for the simulator service: blocking-free HTTP calls plus a
//! WebSocket handle on the live session.

use bicopter_core::harness::api::{ErrorBody, PresetInfo, RunRequest, RunResponse, TuneRequest};
use bicopter_core::harness::session::{ClientMessage, Command, ServerMessage};
use bicopter_core::tuning::TuneResult;
use futures::{SinkExt, StreamExt};
use serde::de::DeserializeOwned;
use serde::Serialize;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),
    /// The server rejected the request; `status` is the HTTP status code.
    #[error("server returned {status}: {message}")]
    Server { status: u16, message: String },
    #[error("websocket: {0}")]
    WebSocket(#[from] tokio_tungstenite::tungstenite::Error),
    #[error("unexpected message: {0}")]
    Protocol(String),
    #[error("session closed")]
    Closed,
}

impl ClientError {
    /// True when the server refused the input as invalid configuration.
    pub fn is_bad_request(&self) -> bool {
        matches!(self, ClientError::Server { status: 400, .. })
    }
}

pub type Result<T> = std::result::Result<T, ClientError>;

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        Self {
            base: base.into().trim_end_matches('/').to_string(),
            http: reqwest::Client::new(),
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorBody>(&text)
            .map(|b| b.error)
            .unwrap_or(text);
        Err(ClientError::Server {
            status: status.as_u16(),
            message,
        })
    }

    async fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T> {
        Self::decode(
            self.http
                .post(format!("{}{path}", self.base))
                .json(body)
                .send()
                .await?,
        )
        .await
    }

    pub async fn health(&self) -> Result<()> {
        self.http
            .get(format!("{}/health", self.base))
            .send()
            .await?
            .error_for_status()?;
        Ok(())
    }

    pub async fn presets(&self) -> Result<Vec<PresetInfo>> {
        Self::decode(
            self.http
                .get(format!("{}/presets", self.base))
                .send()
                .await?,
        )
        .await
    }

    pub async fn run(&self, req: &RunRequest) -> Result<RunResponse> {
        self.post("/run", req).await
    }

    pub async fn tune(&self, req: &TuneRequest) -> Result<TuneResult> {
        self.post("/tune", req).await
    }

    pub async fn session(&self) -> Result<SessionClient> {
        let url = format!("{}/session", self.base.replacen("http", "ws", 1));
        let (ws, _) = tokio_tungstenite::connect_async(url).await?;
        Ok(SessionClient { ws })
    }
}

/// Live session connection. Messages arrive in the order the server produced
/// them, so the first telemetry frame after an ack reflects that command.
pub struct SessionClient {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl SessionClient {
    pub async fn send(&mut self, command: Command) -> Result<()> {
        self.send_message(&ClientMessage::new(command)).await
    }

    pub async fn send_message(&mut self, msg: &ClientMessage) -> Result<()> {
        let text = serde_json::to_string(msg).map_err(|e| ClientError::Protocol(e.to_string()))?;
        self.send_raw(text).await
    }

    /// Send arbitrary text, bypassing the typed protocol.
    pub async fn send_raw(&mut self, text: impl Into<String>) -> Result<()> {
        self.ws.send(Message::text(text.into())).await?;
        Ok(())
    }

    pub async fn next(&mut self) -> Result<ServerMessage> {
        loop {
            match self.ws.next().await.ok_or(ClientError::Closed)?? {
                Message::Text(t) => {
                    return serde_json::from_str(t.as_str())
                        .map_err(|e| ClientError::Protocol(format!("{e}: {t}")))
                }
                Message::Close(_) => return Err(ClientError::Closed),
                _ => continue,
            }
        }
    }

    pub async fn close(mut self) -> Result<()> {
        self.ws.close(None).await?;
        Ok(())
    }
}
