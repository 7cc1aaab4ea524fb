//! WebSocket host for the snake protocol. Each connection owns one session;
//! its messages are handled strictly in arrival order.

use std::net::SocketAddr;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::{header, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use errp_bandit::game::{
    save_session, AgentAdapter, AgentDiagnostics, Cell, EndReason, LogRecord, ProtocolConfig, ProtocolSession,
    SessionHeader, TrialEvent, Turn,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::args::{AgentArgs, DetectorArgs, ServeArgs};
use crate::game::{agent_player, protocol_config};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Keys,
    Agent,
}

/// Messages accepted from the client.
#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum ClientFrame {
    Hello {
        participant: Option<String>,
        mode: Option<Mode>,
    },
    Command {
        dir: Turn,
    },
    Break {
        #[serde(rename = "continue")]
        go_on: bool,
    },
    End,
}

#[derive(Serialize)]
struct StateFrame<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    grid: [i32; 2],
    snake: &'a [Cell],
    path: &'a [Cell],
    fruit: Cell,
    phase: &'static str,
    trial: u32,
    await_command: bool,
}

#[derive(Serialize)]
struct EventFrame<'a> {
    #[serde(rename = "type")]
    kind: &'static str,
    #[serde(flatten)]
    event: &'a TrialEvent,
    #[serde(skip_serializing_if = "Option::is_none")]
    agent: Option<&'a AgentDiagnostics>,
}

fn error_frame(code: &str, message: impl std::fmt::Display) -> Value {
    json!({"type": "error", "code": code, "message": message.to_string()})
}

/// Settings shared by every session of one server.
pub struct SessionSettings {
    pub protocol: ProtocolConfig,
    pub log_dir: PathBuf,
    pub agent: AgentArgs,
    pub detector: DetectorArgs,
    pub separability: f64,
}

/// One interactive session. Pure with respect to the network: frames in,
/// frames out.
pub struct LiveSession {
    id: u64,
    session: ProtocolSession,
    participant: String,
    mode: Mode,
    adapter: Option<AgentAdapter>,
    started: bool,
    saved: Option<PathBuf>,
    settings: Arc<SessionSettings>,
}

impl LiveSession {
    /// Session `id` plays with seed `protocol.seed + id`.
    pub fn new(id: u64, settings: Arc<SessionSettings>) -> Result<Self> {
        let cfg = ProtocolConfig {
            seed: settings.protocol.seed.wrapping_add(id),
            ..settings.protocol.clone()
        };
        Ok(Self {
            id,
            session: ProtocolSession::new(&cfg)?,
            participant: format!("session-{id}"),
            mode: Mode::Keys,
            adapter: None,
            started: false,
            saved: None,
            settings,
        })
    }

    pub fn is_over(&self) -> bool {
        self.saved.is_some()
    }

    fn config_frame(&self) -> Value {
        json!({"type": "config", "config": self.session.config(), "mode": self.mode})
    }

    /// `hello`, `config`, then everything up to the first decision.
    pub fn open(&mut self) -> Vec<Value> {
        let mut frames = vec![
            json!({"type": "hello", "session_id": self.id, "protocol_version": PROTOCOL_VERSION}),
            self.config_frame(),
        ];
        self.advance(&mut frames);
        frames
    }

    pub fn state_frame(&self) -> Value {
        let s = self.session.state();
        serde_json::to_value(StateFrame {
            kind: "state",
            grid: [s.grid_w, s.grid_h],
            snake: &s.snake,
            path: &s.path,
            fruit: s.fruit,
            phase: s.phase.as_str(),
            trial: s.trial_counter,
            await_command: self.session.awaiting_command(),
        })
        .expect("state frame serializes")
    }

    fn event_frame(event: &TrialEvent, agent: Option<&AgentDiagnostics>) -> Value {
        serde_json::to_value(EventFrame {
            kind: "event",
            event,
            agent,
        })
        .expect("event frame serializes")
    }

    /// Auto-forward events, then a break, an end or the next decision state.
    fn advance(&mut self, frames: &mut Vec<Value>) {
        match self.session.advance_to_decision() {
            Ok(events) => frames.extend(events.iter().map(|e| Self::event_frame(e, None))),
            Err(e) => frames.push(error_frame("engine", e)),
        }
        if let Some(block) = self.session.at_break() {
            let next_trial = self.session.state().trial_counter;
            frames.push(json!({"type": "break", "block": block, "next_trial": next_trial}));
        }
        frames.push(self.state_frame());
        if self.session.ended().is_some() {
            frames.push(self.finish());
        }
    }

    /// Handles one text message. Malformed or out-of-place messages yield an
    /// error frame and leave the engine untouched.
    pub fn handle(&mut self, text: &str) -> Vec<Value> {
        if self.is_over() {
            return vec![error_frame("session_over", "the session has ended")];
        }
        let frame: ClientFrame = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => return vec![error_frame("bad_message", e)],
        };
        match frame {
            ClientFrame::Hello { participant, mode } => self.hello(participant, mode),
            ClientFrame::Command { dir } => self.command(dir),
            ClientFrame::Break { go_on } => {
                if self.session.at_break().is_none() {
                    return vec![error_frame("not_at_break", "no break is pending")];
                }
                let mut frames = Vec::new();
                if let Err(e) = self.session.resume(go_on) {
                    return vec![error_frame("engine", e)];
                }
                self.advance(&mut frames);
                frames
            }
            ClientFrame::End => {
                self.session.end(EndReason::Stopped);
                vec![self.state_frame(), self.finish()]
            }
        }
    }

    fn hello(&mut self, participant: Option<String>, mode: Option<Mode>) -> Vec<Value> {
        if self.started {
            return vec![error_frame("already_started", "hello must precede the first command")];
        }
        if let Some(p) = participant {
            self.participant = p;
        }
        if let Some(m) = mode {
            if m == Mode::Agent && self.adapter.is_none() {
                let s = &self.settings;
                match agent_player(&s.agent, &s.detector, s.separability, self.session.config().seed) {
                    Ok(a) => self.adapter = Some(a),
                    Err(e) => return vec![error_frame("agent_unavailable", e)],
                }
            }
            self.mode = m;
        }
        vec![self.config_frame(), self.state_frame()]
    }

    fn command(&mut self, intended: Turn) -> Vec<Value> {
        if !self.session.awaiting_command() {
            return vec![error_frame("not_awaiting_command", "no decision is pending")];
        }
        self.started = true;
        let trial = self.session.state().trial_counter;
        let issued = match (self.mode, self.adapter.as_mut()) {
            (Mode::Agent, Some(adapter)) => match adapter.decide(intended, trial) {
                Ok(t) => t,
                Err(e) => return vec![error_frame("agent", e)],
            },
            _ => intended,
        };
        let event = match self.session.command(issued) {
            Ok(e) => e,
            Err(e) => return vec![error_frame("engine", e)],
        };
        let diagnostics = match (self.mode, self.adapter.as_mut()) {
            (Mode::Agent, Some(adapter)) => match adapter.feedback(&event) {
                Ok(d) => {
                    self.session.push_record(LogRecord::Agent(d.clone()));
                    Some(d)
                }
                Err(e) => return vec![error_frame("agent", e)],
            },
            _ => None,
        };
        let mut frames = vec![Self::event_frame(&event, diagnostics.as_ref())];
        self.advance(&mut frames);
        frames
    }

    /// Ends the session if needed and persists its log once.
    pub fn finish(&mut self) -> Value {
        self.session.end(EndReason::Disconnected);
        let reason = self.session.ended();
        let dir = self.settings.log_dir.join(format!("session-{:04}", self.id));
        if self.saved.is_none() {
            let source = match self.mode {
                Mode::Keys => "keys",
                Mode::Agent => "agent",
            };
            let header = SessionHeader::new(self.session.config(), &self.participant, source);
            if let Err(e) = save_session(&dir, &header, self.session.records()) {
                return error_frame("log_write", e);
            }
            self.saved = Some(dir.clone());
        }
        json!({
            "type": "end",
            "reason": reason,
            "n_trials": self.session.state().trial_counter,
            "log_dir": dir.display().to_string(),
        })
    }
}

struct App {
    settings: Arc<SessionSettings>,
    next_id: AtomicU64,
    static_dir: Option<PathBuf>,
    step_delay: Duration,
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let protocol = protocol_config(&args.protocol)?;
    agent_player(&args.agent, &args.detector, args.separability, protocol.seed)?;
    let app = Arc::new(App {
        settings: Arc::new(SessionSettings {
            protocol,
            log_dir: args.log_dir.clone(),
            agent: args.agent.clone(),
            detector: args.detector.clone(),
            separability: args.separability,
        }),
        next_id: AtomicU64::new(0),
        static_dir: args.static_dir.clone(),
        step_delay: Duration::from_millis(args.step_delay_ms),
    });
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        let addr: SocketAddr = listener.local_addr()?;
        println!("listening on {addr}");
        let router = Router::new()
            .route("/ws", get(upgrade))
            .fallback(static_file)
            .with_state(app);
        axum::serve(listener, router).await?;
        Ok(())
    })
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<Arc<App>>) -> Response {
    ws.on_upgrade(move |socket| run_socket(socket, app))
}

async fn send(socket: &mut WebSocket, frames: Vec<Value>, delay: Duration) -> bool {
    for frame in frames {
        let pause = !delay.is_zero() && frame["type"] == "event" && frame["auto_forward"] == true;
        if socket.send(Message::Text(frame.to_string())).await.is_err() {
            return false;
        }
        if pause {
            tokio::time::sleep(delay).await;
        }
    }
    true
}

async fn run_socket(mut socket: WebSocket, app: Arc<App>) {
    let id = app.next_id.fetch_add(1, Ordering::SeqCst);
    let mut live = match LiveSession::new(id, app.settings.clone()) {
        Ok(l) => l,
        Err(e) => {
            let _ = socket.send(Message::Text(error_frame("engine", e).to_string())).await;
            return;
        }
    };
    let opening = live.open();
    if !send(&mut socket, opening, app.step_delay).await {
        live.finish();
        return;
    }
    while !live.is_over() {
        let frames = match socket.recv().await {
            Some(Ok(Message::Text(text))) => live.handle(&text),
            Some(Ok(Message::Binary(_))) => vec![error_frame("bad_message", "binary frames are not supported")],
            Some(Ok(Message::Ping(_) | Message::Pong(_))) => continue,
            Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
        };
        if !send(&mut socket, frames, app.step_delay).await {
            break;
        }
    }
    live.finish();
    let _ = socket.close().await;
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("json") => "application/json",
        Some("svg") => "image/svg+xml",
        Some("png") => "image/png",
        _ => "application/octet-stream",
    }
}

async fn static_file(State(app): State<Arc<App>>, uri: Uri) -> Response {
    let Some(root) = &app.static_dir else {
        return StatusCode::NOT_FOUND.into_response();
    };
    let rel = uri.path().trim_start_matches('/');
    let rel = if rel.is_empty() { "index.html" } else { rel };
    let rel = Path::new(rel);
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return StatusCode::BAD_REQUEST.into_response();
    }
    let path = root.join(rel);
    match tokio::fs::read(&path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response(),
        Err(_) => StatusCode::NOT_FOUND.into_response(),
    }
}
