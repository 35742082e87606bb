//! HTTP surface: orders in, state, backlog and a live event stream out.

use std::convert::Infallible;
use std::collections::VecDeque;

use ascsim_core::autonomy::{self_assessment, AutonomyError, ManifoldConfig};
use ascsim_core::event::canonical_json;
use ascsim_core::model::{grams_to_kg, EntityId};
use ascsim_core::scenario::LineDoc;
use ascsim_core::{Event, EventBody, SimError};
use axum::body::Bytes;
use axum::extract::{Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::Stream;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

use crate::live::{LiveError, LiveHandle};

#[derive(Clone)]
pub struct AppState {
    live: LiveHandle,
    token: Option<String>,
}

pub fn router(live: LiveHandle, token: Option<String>) -> Router {
    let state = AppState { live, token };
    Router::new()
        .route("/api/orders", post(place_order))
        .route("/api/state", get(snapshot))
        .route("/api/events", get(events))
        .route("/api/stream", get(stream))
        .route("/api/entities", get(entities))
        .route("/api/chat", get(chat))
        .route("/api/assess", get(assess))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn json_body(status: StatusCode, body: String) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, HeaderValue::from_static("application/json"))],
        body,
    )
        .into_response()
}

fn error(status: StatusCode, message: impl ToString, path: Option<&str>) -> Response {
    let mut body = json!({ "error": message.to_string() });
    if let Some(p) = path {
        body["path"] = json!(p);
    }
    json_body(status, canonical_json(&body))
}

fn event_array<'a>(events: impl Iterator<Item = &'a Event>) -> String {
    let items: Vec<String> = events.map(Event::to_canonical_json).collect();
    format!("[{}]", items.join(","))
}

#[derive(Deserialize)]
struct TokenQuery {
    token: Option<String>,
}

async fn require_token(State(s): State<AppState>, req: Request, next: Next) -> Response {
    let Some(expected) = &s.token else {
        return next.run(req).await;
    };
    let bearer = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    let query = Query::<TokenQuery>::try_from_uri(req.uri())
        .ok()
        .and_then(|q| q.0.token);
    if bearer == Some(expected.as_str()) || query.as_deref() == Some(expected.as_str()) {
        next.run(req).await
    } else {
        error(StatusCode::UNAUTHORIZED, "missing or wrong token", None)
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OrderRequest {
    pub buyer: String,
    pub lines: Vec<LineDoc>,
}

async fn place_order(State(s): State<AppState>, body: Bytes) -> Response {
    let req: OrderRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e, None),
    };
    let buyer = EntityId::new(req.buyer);
    let scenario = s.live.scenario();
    if scenario.entity(&buyer).is_none() {
        return error(StatusCode::NOT_FOUND, format!("unknown buyer {buyer}"), Some("buyer"));
    }
    let lines = match scenario.parse_lines(&req.lines, "lines") {
        Ok(l) => l,
        Err(e) => return error(StatusCode::BAD_REQUEST, &e, e.path()),
    };
    match s.live.place_order(buyer, lines).await {
        Ok(Ok(order_id)) => json_body(StatusCode::CREATED, canonical_json(&json!({ "order_id": order_id }))),
        Ok(Err(e @ SimError::UnknownBuyer(_))) => error(StatusCode::NOT_FOUND, e, Some("buyer")),
        Ok(Err(e)) => error(StatusCode::BAD_REQUEST, e, None),
        Err(e @ LiveError::Stopped) => error(StatusCode::SERVICE_UNAVAILABLE, e, None),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e, None),
    }
}

async fn snapshot(State(s): State<AppState>) -> Response {
    let body = canonical_json(&s.live.read().snapshot);
    json_body(StatusCode::OK, body)
}

#[derive(Deserialize)]
struct Since {
    #[serde(default)]
    since: u64,
}

async fn events(State(s): State<AppState>, Query(q): Query<Since>) -> Response {
    let body = event_array(s.live.read().since(q.since).iter());
    json_body(StatusCode::OK, body)
}

async fn chat(State(s): State<AppState>, Query(q): Query<Since>) -> Response {
    let read = s.live.read();
    let chats = read
        .since(q.since)
        .iter()
        .filter(|e| matches!(e.body, EventBody::ChatMessage(_)));
    json_body(StatusCode::OK, event_array(chats))
}

async fn entities(State(s): State<AppState>) -> Response {
    let sc = s.live.scenario();
    let body = json!({
        "products": sc.products,
        "default_order_kg": grams_to_kg(sc.default_order_g),
        "wholesaler": sc.wholesaler().id,
        "entities": sc.network.entities().collect::<Vec<_>>(),
        "connections": sc.network.connections(),
        "routes": sc.routes,
        "sensor_profiles": sc.sensor_profiles,
        "time_scale": sc.time_scale,
    });
    json_body(StatusCode::OK, canonical_json(&body))
}

async fn assess(State(s): State<AppState>) -> Response {
    let read = s.live.read();
    match self_assessment(s.live.scenario(), &read.events, ManifoldConfig::default()) {
        Ok(a) => {
            let mut body = serde_json::to_value(&a).expect("assessment serializes");
            body["human_involvement"] = json!(a.scal.human_involvement());
            json_body(StatusCode::OK, canonical_json(&body))
        }
        Err(e @ AutonomyError::EmptyLog) => error(StatusCode::CONFLICT, e, None),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e, None),
    }
}

fn sse_event(e: &Event) -> SseEvent {
    SseEvent::default()
        .id(e.seq.to_string())
        .data(e.to_canonical_json())
}

/// Backlog after `since` (or the `Last-Event-ID` a reconnecting client
/// sends), then live events. The head watch is marked seen before each read
/// of the log, so nothing published in between is missed.
async fn stream(
    State(s): State<AppState>,
    Query(q): Query<Since>,
    headers: HeaderMap,
) -> Sse<impl Stream<Item = Result<SseEvent, Infallible>>> {
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok());
    let since = resume.map_or(q.since, |r| r.max(q.since));
    let head = s.live.subscribe();
    let init = (s.live, head, since, VecDeque::<Event>::new());
    let events = futures::stream::unfold(init, |(live, mut head, mut sent, mut queue)| async move {
        loop {
            if let Some(e) = queue.pop_front() {
                let item = Ok(sse_event(&e));
                return Some((item, (live, head, sent, queue)));
            }
            head.borrow_and_update();
            {
                let read = live.read();
                queue.extend(read.since(sent).iter().cloned());
            }
            if let Some(last) = queue.back() {
                sent = last.seq;
                continue;
            }
            if head.changed().await.is_err() {
                return None;
            }
        }
    });
    Sse::new(events).keep_alive(KeepAlive::default())
}
