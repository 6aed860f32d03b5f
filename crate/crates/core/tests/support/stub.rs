//! In-process scoring service speaking the wire protocol, with scripted
//! failure modes.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::Router;
use pad_eval::corpusgen::decode_marker;
use pad_eval::manifest::SampleClass;

#[derive(Debug, Clone, Copy)]
pub enum Mode {
    /// Marker decode: bona fide 1.0, attacks 0.0, undecodable 0.5.
    Oracle,
    /// Oracle plus deterministic body-hashed jitter of up to `amp`.
    Jitter(f64),
    Constant(f64),
    OutOfRange,
    Malformed,
    MissingField,
    ServerError,
    /// Sleeps this long before answering.
    Slow(Duration),
    /// One of the four failure kinds per image, chosen by body hash.
    MixedFailures(Duration),
    /// Oracle scores, slowed down so concurrency can be observed.
    SlowOracle(Duration),
}

#[derive(Default)]
pub struct Counters {
    pub requests: AtomicUsize,
    pub inflight: AtomicUsize,
    pub max_inflight: AtomicUsize,
}

struct AppState {
    mode: Mode,
    counters: Arc<Counters>,
}

pub struct Stub {
    pub addr: SocketAddr,
    pub counters: Arc<Counters>,
}

impl Stub {
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }
}

fn body_hash(body: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    body.hash(&mut h);
    h.finish()
}

fn oracle(body: &[u8]) -> f64 {
    match decode_marker(body) {
        Ok(Some(SampleClass::BonaFide)) => 1.0,
        Ok(Some(_)) => 0.0,
        _ => 0.5,
    }
}

fn score(v: f64) -> Response {
    (StatusCode::OK, format!("{{\"score\": {v}}}")).into_response()
}

async fn failure(kind: u64, slow: Duration) -> Response {
    match kind % 4 {
        0 => score(1.7),
        1 => (StatusCode::OK, "{\"score\": oops").into_response(),
        2 => (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response(),
        _ => {
            tokio::time::sleep(slow).await;
            score(0.9)
        }
    }
}

async fn handle(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let c = &state.counters;
    c.requests.fetch_add(1, Ordering::SeqCst);
    let now = c.inflight.fetch_add(1, Ordering::SeqCst) + 1;
    c.max_inflight.fetch_max(now, Ordering::SeqCst);

    let resp = match state.mode {
        Mode::Oracle => score(oracle(&body)),
        Mode::Jitter(amp) => {
            let u = (body_hash(&body) % 10_000) as f64 / 10_000.0;
            let base = oracle(&body);
            let v = if base >= 1.0 { 1.0 - amp * u } else { base + amp * u };
            score(v.clamp(0.0, 1.0))
        }
        Mode::Constant(v) => score(v),
        Mode::OutOfRange => score(1.7),
        Mode::Malformed => (StatusCode::OK, "not json").into_response(),
        Mode::MissingField => (StatusCode::OK, "{\"value\": 0.5}").into_response(),
        Mode::ServerError => (StatusCode::INTERNAL_SERVER_ERROR, "boom").into_response(),
        Mode::Slow(d) => {
            tokio::time::sleep(d).await;
            score(0.9)
        }
        Mode::MixedFailures(slow) => failure(body_hash(&body), slow).await,
        Mode::SlowOracle(d) => {
            tokio::time::sleep(d).await;
            score(oracle(&body))
        }
    };
    c.inflight.fetch_sub(1, Ordering::SeqCst);
    resp
}

/// Starts the stub on an ephemeral port of the current tokio runtime.
pub async fn spawn(mode: Mode) -> Stub {
    let counters = Arc::new(Counters::default());
    let state = Arc::new(AppState { mode, counters: counters.clone() });
    let app = Router::new().route("/score", post(handle)).with_state(state);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    Stub { addr, counters }
}
