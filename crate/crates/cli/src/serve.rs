//! JSON API over a single token-game session.
//!
//! | method | path     | body / answer                                   |
//! |--------|----------|-------------------------------------------------|
//! | GET    | `/net`   | the spec                                        |
//! | GET    | `/state` | `{version, depth, marking, text, dead}`         |
//! | GET    | `/steps` | `{version, steps: [{id, kind, text, firings}]}` |
//! | POST   | `/fire`  | `{"stepId": "<version>-<index>"}` → state       |
//! | POST   | `/undo`, `/redo`, `/reset` | → state                       |
//! | GET    | `/trace` | trace export, as `simulate --json` prints it    |
//!
//! Mutations are serialized by the session lock. Firing a step id from an
//! older version, or undoing/redoing with an empty stack, answers 409; a
//! malformed body answers 400.

use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nestpn_core::format::json::{export_trace, marking_json, step_json};
use nestpn_core::semantics::render;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::session::{Session, SessionError};

pub type Shared = Arc<Mutex<Session>>;

pub fn router(session: Session) -> Router {
    let state: Shared = Arc::new(Mutex::new(session));
    Router::new()
        .route("/", get(index))
        .route("/net", get(net))
        .route("/state", get(state_view))
        .route("/steps", get(steps))
        .route("/trace", get(trace))
        .route("/fire", post(fire))
        .route("/undo", post(undo))
        .route("/redo", post(redo))
        .route("/reset", post(reset))
        .with_state(state)
}

fn error(code: StatusCode, msg: impl std::fmt::Display) -> Response {
    (code, Json(json!({ "error": msg.to_string() }))).into_response()
}

fn session_error(e: SessionError) -> Response {
    match e {
        SessionError::Semantics(_) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        _ => error(StatusCode::CONFLICT, e),
    }
}

fn state_json(s: &Session) -> Value {
    json!({
        "version": s.version,
        "depth": s.depth(),
        "marking": marking_json(&s.spec, s.current()),
        "text": render(&s.spec, s.current()),
        "dead": s.enabled().is_empty(),
    })
}

async fn index() -> &'static str {
    "nestpn session: GET /net /state /steps /trace; POST /fire /undo /redo /reset\n"
}

async fn net(State(st): State<Shared>) -> Json<Value> {
    let s = st.lock().unwrap();
    Json(serde_json::to_value(&s.spec).expect("spec serializes"))
}

async fn state_view(State(st): State<Shared>) -> Json<Value> {
    Json(state_json(&st.lock().unwrap()))
}

async fn steps(State(st): State<Shared>) -> Json<Value> {
    let s = st.lock().unwrap();
    let steps: Vec<Value> = s
        .enabled()
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let mut v = step_json(&s.spec, s.current(), step);
            v["id"] = json!(format!("{}-{i}", s.version));
            v
        })
        .collect();
    Json(json!({ "version": s.version, "steps": steps }))
}

async fn trace(State(st): State<Shared>) -> Response {
    let s = st.lock().unwrap();
    let body = export_trace(&s.spec, &s.trace()) + "\n";
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct FireBody {
    step_id: String,
}

async fn fire(State(st): State<Shared>, body: Result<Json<FireBody>, JsonRejection>) -> Response {
    let Json(body) = match body {
        Ok(b) => b,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.body_text()),
    };
    let Some((version, index)) = body
        .step_id
        .split_once('-')
        .and_then(|(v, i)| Some((v.parse::<u64>().ok()?, i.parse::<usize>().ok()?)))
    else {
        return error(StatusCode::BAD_REQUEST, format!("malformed step id `{}`", body.step_id));
    };
    let mut s = st.lock().unwrap();
    if version != s.version || index >= s.enabled().len() {
        return error(StatusCode::CONFLICT, format!("step {} is stale", body.step_id));
    }
    match s.fire_index(index) {
        Ok(()) => Json(state_json(&s)).into_response(),
        Err(e) => session_error(e),
    }
}

fn mutate(st: &Shared, f: impl FnOnce(&mut Session) -> Result<(), SessionError>) -> Response {
    let mut s = st.lock().unwrap();
    match f(&mut s) {
        Ok(()) => Json(state_json(&s)).into_response(),
        Err(e) => session_error(e),
    }
}

async fn undo(State(st): State<Shared>) -> Response {
    mutate(&st, Session::undo)
}

async fn redo(State(st): State<Shared>) -> Response {
    mutate(&st, Session::redo)
}

async fn reset(State(st): State<Shared>) -> Response {
    mutate(&st, |s| {
        s.reset();
        Ok(())
    })
}

/// Serves until the process is stopped; prints the bound address first.
pub fn run(session: Session, port: u16) -> anyhow::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
        println!("listening on http://{}", listener.local_addr()?);
        use std::io::Write;
        std::io::stdout().flush()?;
        axum::serve(listener, router(session)).await?;
        Ok(())
    })
}
