use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use metasim::state::{serialize_trajectory, StateError, Trajectory};
use tokio::sync::{mpsc, Notify};
use tower_http::services::ServeDir;

use crate::protocol::{decode_frame, encode_error, ClientFrame, SeqGate};
use crate::session::{CommandQueue, TeleopSession};

pub const DEFAULT_PORT: u16 = 8571;
/// Environment variable consulted when no port flag is given.
pub const PORT_ENV: &str = "METASIM_TELEOP_PORT";

/// Port from the flag, else the environment, else the default.
pub fn resolve_port(flag: Option<u16>) -> u16 {
    flag.or_else(|| std::env::var(PORT_ENV).ok()?.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing the recording: {0}")]
    Record(#[from] StateError),
    #[error("stepping thread panicked")]
    Stepper,
}

#[derive(Clone, Debug, Default)]
pub struct ServerOptions {
    /// Directory served under `/`; a built-in page when unset.
    pub static_dir: Option<PathBuf>,
    /// Where to write the RVT1 recording when the session closes.
    pub record: Option<PathBuf>,
}

#[derive(Default)]
struct Control {
    token: Option<String>,
    connected: bool,
    closing: bool,
    gate: SeqGate,
    out: Option<mpsc::Sender<String>>,
}

struct Shared {
    queue: Mutex<CommandQueue>,
    control: Mutex<Control>,
    wake: Condvar,
    done: Notify,
}

impl Shared {
    fn notify(&self) {
        // Take the queue lock so a waiting stepper cannot miss the wakeup.
        let _q = self.queue.lock().unwrap();
        self.wake.notify_all();
    }

    fn sender(&self) -> Option<mpsc::Sender<String>> {
        self.control.lock().unwrap().out.clone()
    }
}

/// Applies queued commands at no more than the session rate. Runs on its
/// own thread; the env is touched nowhere else.
fn stepper(shared: Arc<Shared>, mut session: TeleopSession) -> Trajectory {
    let period = Duration::from_secs_f64(1.0 / session.rate() as f64);
    let mut last_tick: Option<Instant> = None;
    loop {
        let cmd = {
            let mut q = shared.queue.lock().unwrap();
            loop {
                let (connected, closing) = {
                    let c = shared.control.lock().unwrap();
                    (c.connected, c.closing)
                };
                if connected {
                    session.resume();
                } else {
                    session.pause();
                }
                if closing && q.is_empty() {
                    break None;
                }
                if (connected || closing) && !q.is_empty() {
                    break q.pop();
                }
                q = shared
                    .wake
                    .wait_timeout(q, Duration::from_millis(100))
                    .unwrap()
                    .0;
            }
        };
        let Some(cmd) = cmd else { break };
        if let Some(t) = last_tick {
            let next = t + period;
            let now = Instant::now();
            if next > now {
                std::thread::sleep(next - now);
            }
        }
        last_tick = Some(Instant::now());
        session.resume();
        let out = shared.sender();
        match session.apply_command(&cmd) {
            Ok(a) => {
                if let Some(tx) = &out {
                    let _ = tx.blocking_send(a.frame);
                    if let Some(w) = a.warning {
                        let _ = tx.blocking_send(format!("WARN {} {w}", cmd.seq));
                    }
                }
            }
            Err(e) => {
                if let Some(tx) = &out {
                    let _ = tx.blocking_send(encode_error(Some(cmd.seq), &e.to_string()));
                }
            }
        }
    }
    let applied = session.applied();
    let rec = session.close();
    let out = shared.control.lock().unwrap().out.take();
    if let Some(tx) = out {
        let _ = tx.blocking_send(format!("CLOSED {applied}"));
    }
    shared.done.notify_one();
    rec
}

#[derive(serde::Deserialize)]
struct Params {
    session: Option<String>,
}

async fn ws_route(
    ws: WebSocketUpgrade,
    Query(p): Query<Params>,
    State(shared): State<Arc<Shared>>,
) -> Response {
    ws.on_upgrade(move |socket| connection(socket, p.session, shared))
}

async fn connection(socket: WebSocket, token: Option<String>, shared: Arc<Shared>) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::channel::<String>(256);
    let admitted = {
        let mut c = shared.control.lock().unwrap();
        if c.connected {
            Err("session busy")
        } else if c.closing {
            Err("session closed")
        } else {
            match (&c.token, &token) {
                (Some(have), Some(t)) if have != t => Err("unknown session"),
                (Some(_), None) => Err("session token required"),
                _ => {
                    let t = c
                        .token
                        .get_or_insert_with(|| uuid::Uuid::new_v4().to_string())
                        .clone();
                    c.connected = true;
                    c.out = Some(tx.clone());
                    Ok(t)
                }
            }
        }
    };
    let token = match admitted {
        Ok(t) => t,
        Err(msg) => {
            let _ = sink
                .send(Message::Text(encode_error(None, msg).into()))
                .await;
            let _ = sink.close().await;
            return;
        }
    };
    shared.notify();
    let _ = tx.send(format!("SESSION {token}")).await;

    let writer = tokio::spawn(async move {
        while let Some(m) = rx.recv().await {
            if sink.send(Message::Text(m.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });

    while let Some(Ok(msg)) = stream.next().await {
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Close(_) => break,
            _ => continue,
        };
        match decode_frame(&text) {
            Ok(ClientFrame::Cmd(cmd)) => {
                let admitted = shared.control.lock().unwrap().gate.admit(cmd.seq);
                match admitted {
                    Ok(()) => {
                        shared.queue.lock().unwrap().push(cmd);
                        shared.wake.notify_all();
                    }
                    Err(e) => {
                        let _ = tx.send(encode_error(Some(cmd.seq), &e.to_string())).await;
                    }
                }
            }
            Ok(ClientFrame::Close) => {
                shared.control.lock().unwrap().closing = true;
                shared.notify();
                break;
            }
            Err(e) => {
                let _ = tx.send(encode_error(None, &e.to_string())).await;
            }
        }
    }
    drop(tx);
    {
        let mut c = shared.control.lock().unwrap();
        c.connected = false;
        if !c.closing {
            c.out = None;
        }
    }
    shared.notify();
    let _ = writer.await;
}

const INDEX: &str =
    "<!doctype html><title>metasim teleop</title><p>WebSocket endpoint: <code>/teleop</code></p>";

async fn index() -> impl IntoResponse {
    Html(INDEX)
}

fn router(shared: Arc<Shared>, static_dir: Option<&Path>) -> Router {
    let r = Router::new()
        .route("/teleop", get(ws_route))
        .with_state(shared);
    match static_dir {
        Some(d) => r.fallback_service(ServeDir::new(d)),
        None => r.route("/", get(index)),
    }
}

/// Serves one session on `listener` until the client sends `CLOSE`, then
/// returns the recording (also written to `opts.record` when set).
pub async fn serve(
    listener: tokio::net::TcpListener,
    session: TeleopSession,
    opts: ServerOptions,
) -> Result<Trajectory, ServerError> {
    let shared = Arc::new(Shared {
        queue: Mutex::new(CommandQueue::new(session.rate() as usize)),
        control: Mutex::new(Control::default()),
        wake: Condvar::new(),
        done: Notify::new(),
    });
    let app = router(shared.clone(), opts.static_dir.as_deref());
    let s2 = shared.clone();
    let stepping = tokio::task::spawn_blocking(move || stepper(s2, session));
    let s3 = shared.clone();
    axum::serve(listener, app)
        .with_graceful_shutdown(async move { s3.done.notified().await })
        .await?;
    let rec = stepping.await.map_err(|_| ServerError::Stepper)?;
    if let Some(path) = &opts.record {
        std::fs::write(path, serialize_trajectory(&rec)?)?;
    }
    Ok(rec)
}

/// Binds `127.0.0.1:port` (0 for any free port) and reports the address
/// before serving.
pub async fn bind(port: u16) -> std::io::Result<(tokio::net::TcpListener, SocketAddr)> {
    let l = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    let a = l.local_addr()?;
    Ok((l, a))
}
