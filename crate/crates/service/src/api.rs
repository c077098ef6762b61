//! Routes, handlers, bearer-token check and the event stream.

use crate::app::App;
use crate::error::ApiError;
use crate::wire::*;
use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::sse::{self, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use futures::Stream;
use goalscope_agents::UserInput;
use goalscope_core::fixtures;
use goalscope_core::session::GoalRecord;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::convert::Infallible;
use std::sync::Arc;
use tokio::sync::broadcast::error::RecvError;

pub const OPENAPI: &str = include_str!("openapi.json");

/// Every route as (method, path); the OpenAPI document must list each one.
pub const ROUTES: &[(&str, &str)] = &[
    ("get", "/health"),
    ("get", "/openapi.json"),
    ("get", "/fixtures"),
    ("get", "/events"),
    ("get", "/audit"),
    ("post", "/projects"),
    ("get", "/projects"),
    ("get", "/projects/{id}"),
    ("post", "/projects/{id}/goals"),
    ("patch", "/projects/{id}/goals/{gid}"),
    ("get", "/projects/{id}/templates"),
    ("post", "/projects/{id}/steps"),
    ("get", "/projects/{id}/steps"),
    ("post", "/projects/{id}/demo"),
    ("get", "/projects/{id}/demo"),
    ("get", "/steps/{id}"),
    ("get", "/steps/{id}/menu"),
    ("get", "/steps/{id}/suggestions"),
    ("post", "/steps/{id}/question"),
    ("get", "/steps/{id}/conversation"),
    ("get", "/jobs/{id}"),
];

#[derive(Clone)]
struct AppState {
    app: Arc<App>,
    token: Option<Arc<str>>,
}

pub fn router(app: Arc<App>, token: Option<String>) -> Router {
    let state = AppState {
        app,
        token: token.map(Arc::from),
    };
    Router::new()
        .route("/health", get(health))
        .route("/openapi.json", get(openapi))
        .route("/fixtures", get(list_fixtures))
        .route("/events", get(events))
        .route("/audit", get(audit))
        .route("/projects", post(create_project).get(list_projects))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/goals", post(create_goal))
        .route("/projects/{id}/goals/{gid}", patch(patch_goal))
        .route("/projects/{id}/templates", get(templates))
        .route("/projects/{id}/steps", post(create_step).get(list_steps))
        .route("/projects/{id}/demo", post(start_demo).get(demo))
        .route("/steps/{id}", get(get_step))
        .route("/steps/{id}/menu", get(menu))
        .route("/steps/{id}/suggestions", get(suggestions))
        .route("/steps/{id}/question", post(question))
        .route("/steps/{id}/conversation", get(conversation))
        .route("/jobs/{id}", get(job))
        .fallback(no_route)
        .layer(middleware::from_fn_with_state(state.clone(), authorize))
        .with_state(state)
}

/// Serves the router on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Arc<App>,
    token: Option<String>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(app, token))
        .with_graceful_shutdown(shutdown)
        .await
}

async fn authorize(State(s): State<AppState>, req: Request, next: Next) -> Response {
    let Some(token) = &s.token else {
        return next.run(req).await;
    };
    if req.uri().path() == "/health" {
        return next.run(req).await;
    }
    let presented = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if presented == Some(&**token) {
        next.run(req).await
    } else {
        ApiError::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong bearer token",
        )
        .into_response()
    }
}

async fn no_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no-route", "no such route")
}

/// Runs `f` on the blocking pool: project work takes std locks and may
/// call a language model.
async fn blocking<T: Send + 'static>(
    s: &AppState,
    f: impl FnOnce(&Arc<App>) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let app = s.app.clone();
    tokio::task::spawn_blocking(move || f(&app))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let bytes = if bytes.is_empty() { b"{}".as_slice() } else { bytes };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn openapi() -> Response {
    ([(header::CONTENT_TYPE, "application/json")], OPENAPI).into_response()
}

async fn list_fixtures() -> Json<Vec<&'static str>> {
    Json(fixtures::ALL.iter().map(|f| f.name).collect())
}

#[derive(Deserialize)]
struct EventFilter {
    project: Option<String>,
}

async fn events(
    State(s): State<AppState>,
    Query(filter): Query<EventFilter>,
) -> Sse<impl Stream<Item = Result<sse::Event, Infallible>>> {
    let rx = s.app.subscribe();
    let stream = futures::stream::unfold((rx, filter.project), |(mut rx, project)| async move {
        loop {
            match rx.recv().await {
                Ok(e) if project.as_deref().is_none_or(|p| p == e.project_id()) => {
                    let data = serde_json::to_string(&e).expect("events serialize");
                    let out = sse::Event::default().event(e.name()).data(data);
                    return Some((Ok(out), (rx, project)));
                }
                Ok(_) => {}
                // A slow client misses events; it can refetch state.
                Err(RecvError::Lagged(n)) => tracing::warn!("event stream lagged by {n}"),
                Err(RecvError::Closed) => return None,
            }
        }
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

async fn audit(State(s): State<AppState>) -> Result<Json<Vec<Value>>, ApiError> {
    blocking(&s, |a| a.audit_log()).await.map(Json)
}

async fn create_project(State(s): State<AppState>, b: Bytes) -> Result<(StatusCode, Json<ProjectView>), ApiError> {
    let req: CreateProject = body(&b)?;
    let view = blocking(&s, move |a| a.create_project(req)).await?;
    Ok((StatusCode::CREATED, Json(view)))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ProjectSummary {
    id: String,
    name: String,
    mode: goalscope_core::session::Mode,
    goals: usize,
    steps: usize,
    best_utility: u64,
}

async fn list_projects(State(s): State<AppState>) -> Result<Json<Vec<ProjectSummary>>, ApiError> {
    blocking(&s, |a| {
        a.list_projects()
            .iter()
            .map(|id| {
                let v = a.project_view(id)?;
                Ok(ProjectSummary {
                    id: v.id,
                    name: v.name,
                    mode: v.mode,
                    goals: v.goals.len(),
                    steps: v.steps.len(),
                    best_utility: v.best_utility,
                })
            })
            .collect()
    })
    .await
    .map(Json)
}

async fn get_project(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<ProjectView>, ApiError> {
    blocking(&s, move |a| a.project_view(&id)).await.map(Json)
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct GoalCreated {
    #[serde(flatten)]
    goal: GoalRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    reverse_translation: Option<String>,
}

async fn create_goal(
    State(s): State<AppState>,
    Path(id): Path<String>,
    b: Bytes,
) -> Result<(StatusCode, Json<GoalCreated>), ApiError> {
    let req: CreateGoal = body(&b)?;
    let (goal, reverse_translation) = blocking(&s, move |a| a.create_goal(&id, req)).await?;
    Ok((
        StatusCode::CREATED,
        Json(GoalCreated {
            goal,
            reverse_translation,
        }),
    ))
}

async fn patch_goal(
    State(s): State<AppState>,
    Path((id, gid)): Path<(String, String)>,
    b: Bytes,
) -> Result<Json<GoalRecord>, ApiError> {
    let req: PatchGoal = body(&b)?;
    blocking(&s, move |a| a.patch_goal(&id, &gid, req)).await.map(Json)
}

async fn templates(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<TemplateView>>, ApiError> {
    blocking(&s, move |a| Ok(a.project_view(&id)?.templates))
        .await
        .map(Json)
}

async fn create_step(
    State(s): State<AppState>,
    Path(id): Path<String>,
    b: Bytes,
) -> Result<(StatusCode, Json<Accepted<StepView>>), ApiError> {
    let req: CreateStep = body(&b)?;
    let (step, job) = blocking(&s, move |a| a.create_step(&id, req)).await?;
    Ok((StatusCode::ACCEPTED, Json(Accepted { body: step, job })))
}

async fn list_steps(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Vec<StepView>>, ApiError> {
    blocking(&s, move |a| Ok(a.project_view(&id)?.steps)).await.map(Json)
}

async fn start_demo(State(s): State<AppState>, Path(id): Path<String>) -> Result<(StatusCode, Json<Job>), ApiError> {
    let job = blocking(&s, move |a| a.start_demo(&id)).await?;
    Ok((StatusCode::ACCEPTED, Json(job)))
}

async fn demo(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<DemoView>, ApiError> {
    blocking(&s, move |a| a.demo_view(&id)).await.map(Json)
}

async fn get_step(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<StepView>, ApiError> {
    blocking(&s, move |a| a.step_view(&id)).await.map(Json)
}

async fn menu(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Menu>, ApiError> {
    blocking(&s, move |a| Ok(Menu { entries: a.menu(&id)? }))
        .await
        .map(Json)
}

async fn suggestions(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Suggestions>, ApiError> {
    blocking(&s, move |a| {
        Ok(Suggestions {
            questions: a.suggestions(&id)?,
        })
    })
    .await
    .map(Json)
}

async fn question(
    State(s): State<AppState>,
    Path(id): Path<String>,
    b: Bytes,
) -> Result<Json<goalscope_agents::Turn>, ApiError> {
    let input: UserInput = body(&b)?;
    blocking(&s, move |a| a.ask(&id, input)).await.map(Json)
}

async fn conversation(
    State(s): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<Vec<goalscope_agents::Turn>>, ApiError> {
    blocking(&s, move |a| a.conversation(&id)).await.map(Json)
}

async fn job(State(s): State<AppState>, Path(id): Path<String>) -> Result<Json<Job>, ApiError> {
    s.app.job(&id).map(Json)
}
