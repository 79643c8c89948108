//! The corpus HTTP server: serves the fixture sites and the configured
//! robots.txt, and logs every request — crawl control here is advisory
//! only, so disallowed requests still succeed but are recorded as such.
//!
//! The server runs on a background thread behind a synchronous
//! [`ServerHandle`]; the request log is drained to a JSONL file by a single
//! writer thread fed over a channel, so concurrent requests never
//! interleave partial lines.

use std::fs::OpenOptions;
use std::io::{BufWriter, Write as _};
use std::net::{SocketAddr, TcpListener as StdTcpListener};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::sync::oneshot;

use crate::crawl::CrawlLogEntry;
use crate::error::ServerError;
use crate::robots::RobotsVariant;

/// Server configuration. Port 0 binds an ephemeral port.
#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub corpus_dir: PathBuf,
    pub bind: SocketAddr,
    pub robots: RobotsVariant,
    pub log_path: PathBuf,
}

impl ServerConfig {
    pub fn new(
        corpus_dir: impl Into<PathBuf>,
        port: u16,
        robots: RobotsVariant,
        log_path: impl Into<PathBuf>,
    ) -> Self {
        ServerConfig {
            corpus_dir: corpus_dir.into(),
            bind: SocketAddr::from(([127, 0, 0, 1], port)),
            robots,
            log_path: log_path.into(),
        }
    }
}

#[derive(Clone)]
struct AppState {
    corpus_dir: Arc<PathBuf>,
    robots: RobotsVariant,
    log_tx: mpsc::Sender<CrawlLogEntry>,
}

/// A running corpus server. Dropping the handle shuts it down; call
/// [`ServerHandle::shutdown`] to stop it explicitly and surface errors.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    log_path: PathBuf,
    shutdown_tx: Option<oneshot::Sender<()>>,
    serve_thread: Option<JoinHandle<()>>,
    writer_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL, e.g. `http://127.0.0.1:4555`.
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// `host:port` form, for plain TCP clients.
    pub fn authority(&self) -> String {
        self.addr.to_string()
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    /// Stop serving, flush the request log, and join both worker threads.
    pub fn shutdown(mut self) -> Result<(), ServerError> {
        self.stop()
    }

    fn stop(&mut self) -> Result<(), ServerError> {
        if let Some(tx) = self.shutdown_tx.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.serve_thread.take() {
            thread
                .join()
                .map_err(|_| ServerError::Startup("server thread panicked".into()))?;
        }
        // The serving thread owned the last log sender; once it is gone the
        // writer drains the channel and exits.
        if let Some(thread) = self.writer_thread.take() {
            thread
                .join()
                .map_err(|_| ServerError::CrawlLog("log writer thread panicked".into()))?;
        }
        Ok(())
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop();
    }
}

/// Bind and start the corpus server. Fails fast — before any thread is
/// spawned — when the port is taken, the corpus directory is missing, or
/// the log file cannot be opened.
pub fn start_server(config: ServerConfig) -> Result<ServerHandle, ServerError> {
    if !config.corpus_dir.join("manifest.json").is_file() {
        return Err(ServerError::Startup(format!(
            "{} is not a corpus directory (no manifest.json)",
            config.corpus_dir.display()
        )));
    }
    let listener = StdTcpListener::bind(config.bind)
        .map_err(|e| ServerError::Startup(format!("bind {}: {e}", config.bind)))?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;

    let log_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&config.log_path)
        .map_err(|e| {
            ServerError::CrawlLog(format!("open {}: {e}", config.log_path.display()))
        })?;
    let (log_tx, log_rx) = mpsc::channel::<CrawlLogEntry>();
    let writer_thread = std::thread::spawn(move || {
        let mut out = BufWriter::new(log_file);
        while let Ok(entry) = log_rx.recv() {
            if let Ok(line) = serde_json::to_string(&entry) {
                let _ = writeln!(out, "{line}");
                let _ = out.flush();
            }
        }
    });

    let state = AppState {
        corpus_dir: Arc::new(config.corpus_dir),
        robots: config.robots,
        log_tx,
    };
    let (shutdown_tx, shutdown_rx) = oneshot::channel::<()>();
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| ServerError::Startup(format!("runtime: {e}")))?;
    let serve_thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener)
                .expect("registering a pre-bound nonblocking listener cannot fail");
            let app = Router::new().fallback(handle_request).with_state(state);
            axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = shutdown_rx.await;
                })
                .await
                .ok();
        });
    });

    Ok(ServerHandle {
        addr,
        log_path: config.log_path,
        shutdown_tx: Some(shutdown_tx),
        serve_thread: Some(serve_thread),
        writer_thread: Some(writer_thread),
    })
}

/// Block the calling thread until Ctrl-C. Used by the CLI to keep a
/// foreground server alive.
pub fn wait_for_interrupt() -> Result<(), ServerError> {
    let runtime = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()?;
    runtime.block_on(tokio::signal::ctrl_c())?;
    Ok(())
}

async fn handle_request(State(state): State<AppState>, request: Request) -> Response {
    let path = request.uri().path().to_owned();
    let user_agent = request
        .headers()
        .get(header::USER_AGENT)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_owned();
    let entry = CrawlLogEntry {
        ts: epoch_millis(),
        path: path.clone(),
        user_agent,
        allowed_by_robots: state.robots.allows(
            request
                .headers()
                .get(header::USER_AGENT)
                .and_then(|v| v.to_str().ok())
                .unwrap_or_default(),
            &path,
        ),
    };
    let _ = state.log_tx.send(entry);

    if path == "/robots.txt" {
        return match state.robots.body() {
            Some(body) => plain_text(StatusCode::OK, body.to_owned()),
            None => plain_text(StatusCode::NOT_FOUND, "no robots.txt\n".to_owned()),
        };
    }
    serve_corpus_file(&state, &path).await
}

async fn serve_corpus_file(state: &AppState, url_path: &str) -> Response {
    let relative = url_path.trim_start_matches('/');
    if relative.is_empty() || relative.split('/').any(|part| part == ".." || part.is_empty()) {
        return plain_text(StatusCode::NOT_FOUND, "not found\n".to_owned());
    }
    let file_path = state.corpus_dir.join(relative);
    let read = tokio::task::spawn_blocking(move || std::fs::read(&file_path)).await;
    match read {
        Ok(Ok(bytes)) => {
            let content_type = match relative.rsplit('.').next() {
                Some("html") => "text/html; charset=utf-8",
                Some("json") => "application/json",
                _ => "text/plain; charset=utf-8",
            };
            ([(header::CONTENT_TYPE, content_type)], bytes).into_response()
        }
        _ => plain_text(StatusCode::NOT_FOUND, "not found\n".to_owned()),
    }
}

fn plain_text(status: StatusCode, body: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "text/plain; charset=utf-8")],
        body,
    )
        .into_response()
}

fn epoch_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default()
        .as_millis() as u64
}
