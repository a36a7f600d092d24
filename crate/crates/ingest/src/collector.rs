//! HTTP receiver for registry webhooks.
//!
//! `POST /webhook` parses the body as a webhook payload and appends one
//! `create` line to the sink. Appends are serialized by a mutex, so lines
//! from concurrent deliveries never interleave.

use std::io::Write;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::Router;
use tokio::net::TcpListener;

use crate::line::format_event;
use crate::source::parse_webhook;

/// A line-oriented output shared between request handlers.
pub struct LineSink {
    out: Mutex<Box<dyn Write + Send>>,
    appended: AtomicUsize,
    rejected: AtomicUsize,
}

impl LineSink {
    pub fn new(out: Box<dyn Write + Send>) -> Arc<Self> {
        Arc::new(LineSink {
            out: Mutex::new(out),
            appended: AtomicUsize::new(0),
            rejected: AtomicUsize::new(0),
        })
    }

    /// Writes `line` plus a newline in one call and flushes.
    pub fn append(&self, line: &str) -> std::io::Result<()> {
        let mut buf = String::with_capacity(line.len() + 1);
        buf.push_str(line);
        buf.push('\n');
        let mut out = self.out.lock().unwrap_or_else(|p| p.into_inner());
        out.write_all(buf.as_bytes())?;
        out.flush()?;
        self.appended.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    pub fn appended(&self) -> usize {
        self.appended.load(Ordering::Relaxed)
    }

    pub fn rejected(&self) -> usize {
        self.rejected.load(Ordering::Relaxed)
    }
}

async fn webhook(State(sink): State<Arc<LineSink>>, body: String) -> (StatusCode, String) {
    let line = parse_webhook(&body).and_then(|e| format_event(&e));
    match line {
        Ok(line) => match sink.append(&line) {
            Ok(()) => (StatusCode::OK, format!("{line}\n")),
            Err(e) => {
                eprintln!("collector: write failed: {e}");
                (
                    StatusCode::INTERNAL_SERVER_ERROR,
                    format!("write failed: {e}\n"),
                )
            }
        },
        Err(e) => {
            sink.rejected.fetch_add(1, Ordering::Relaxed);
            eprintln!("collector: rejected webhook: {e}");
            (StatusCode::BAD_REQUEST, format!("{e}\n"))
        }
    }
}

pub fn router(sink: Arc<LineSink>) -> Router {
    Router::new()
        .route("/webhook", post(webhook))
        .with_state(sink)
}

/// Binds the listening socket; failing here is a startup error.
pub async fn bind(addr: &str) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(
    listener: TcpListener,
    sink: Arc<LineSink>,
    shutdown: F,
) -> std::io::Result<()>
where
    F: std::future::Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(sink))
        .with_graceful_shutdown(shutdown)
        .await
}

/// Address actually bound, useful with port 0.
pub fn local_addr(listener: &TcpListener) -> std::io::Result<SocketAddr> {
    listener.local_addr()
}
