//! Tunnel sessions: server-held training state fed by engagement events.

use axum::extract::{Path, State};
use axum::Json;

use tunnelfit_core::api::{
    CreateTunnelRequest, EngagementRequest, EngagementResponse, TunnelFitRequest,
    TunnelLocateRequest, TunnelSummary,
};
use tunnelfit_core::estimator::{fit_from_training_set, TrainingSet};
use tunnelfit_core::formats::ModelFile;
use tunnelfit_core::model::TunnelGeometry;

use crate::error::ApiError;
use crate::locate::resolve_and_locate;
use crate::{provenance_timestamp, AppState, TunnelSession};

fn summary(id: &str, session: &TunnelSession) -> TunnelSummary {
    TunnelSummary {
        tunnel_id: id.to_string(),
        bs1_pos_m: session.geometry.bs1_pos_m(),
        bs2_pos_m: session.geometry.bs2_pos_m(),
        anchors_m: session.geometry.anchors_m().to_vec(),
        observation_count: session.training.len(),
        fitted: session.model.is_some(),
    }
}

pub async fn create(
    State(state): State<AppState>,
    Json(req): Json<CreateTunnelRequest>,
) -> Result<Json<TunnelSummary>, ApiError> {
    let geometry = TunnelGeometry::new(req.bs1_pos_m, req.bs2_pos_m, req.anchors_m)?;
    let mut sessions = state.sessions.write().expect("lock");
    let id = match req.tunnel_id {
        Some(id) if !id.is_empty() => {
            if sessions.tunnels.contains_key(&id) {
                return Err(ApiError::validation(format!("tunnel '{id}' already exists")));
            }
            id
        }
        _ => sessions.fresh_id(),
    };
    let session = TunnelSession {
        next_iteration: vec![0; geometry.anchor_count()],
        geometry,
        training: TrainingSet::new(),
        model: None,
    };
    tracing::info!(tunnel = %id, "tunnel session created");
    let body = summary(&id, &session);
    sessions.tunnels.insert(id, session);
    Ok(Json(body))
}

pub async fn list(State(state): State<AppState>) -> Json<Vec<TunnelSummary>> {
    let sessions = state.sessions.read().expect("lock");
    let mut all: Vec<TunnelSummary> =
        sessions.tunnels.iter().map(|(id, s)| summary(id, s)).collect();
    all.sort_by(|a, b| a.tunnel_id.cmp(&b.tunnel_id));
    Json(all)
}

pub async fn show(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<TunnelSummary>, ApiError> {
    let sessions = state.sessions.read().expect("lock");
    let session = sessions
        .tunnels
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    Ok(Json(summary(&id, session)))
}

pub async fn remove(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let mut sessions = state.sessions.write().expect("lock");
    sessions
        .tunnels
        .remove(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    Ok(Json(serde_json::json!({ "deleted": id })))
}

/// Appends one engagement: two observations, one per base station, at the
/// distances the geometry implies for the given anchor.
pub async fn engage(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<EngagementRequest>,
) -> Result<Json<EngagementResponse>, ApiError> {
    let mut sessions = state.sessions.write().expect("lock");
    let session = sessions
        .tunnels
        .get_mut(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    if req.anchor_index >= session.geometry.anchor_count() {
        return Err(ApiError::validation(format!(
            "anchor index {} out of range, tunnel has {} anchors",
            req.anchor_index,
            session.geometry.anchor_count()
        )));
    }
    let iteration = match req.iteration {
        Some(it) => it,
        None => session.next_iteration[req.anchor_index],
    };
    session.training.record_engagement(
        &session.geometry,
        req.anchor_index,
        req.loss_bs1_db,
        req.loss_bs2_db,
        iteration,
    )?;
    let next = &mut session.next_iteration[req.anchor_index];
    *next = (*next).max(iteration.saturating_add(1));
    Ok(Json(EngagementResponse { tunnel_id: id, observation_count: session.training.len() }))
}

/// Refits the session's training set and stores the result as the tunnel's
/// current model.
pub async fn fit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TunnelFitRequest>,
) -> Result<Json<ModelFile>, ApiError> {
    let mut sessions = state.sessions.write().expect("lock");
    let session = sessions
        .tunnels
        .get_mut(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    let result = fit_from_training_set(&session.training, &req.options)?;
    let file = ModelFile::from_fit(
        &result,
        format!("tunnel:{id}"),
        &req.options,
        provenance_timestamp(),
    );
    tracing::info!(tunnel = %id, sse = result.sse_db2, "tunnel model refitted");
    session.model = Some(file.clone());
    Ok(Json(file))
}

pub async fn model(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<ModelFile>, ApiError> {
    let sessions = state.sessions.read().expect("lock");
    let session = sessions
        .tunnels
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    let file = session
        .model
        .clone()
        .ok_or_else(|| ApiError::not_found(format!("tunnel '{id}' has no fitted model yet")))?;
    Ok(Json(file))
}

/// Positions an object using the tunnel's current model; the session's base
/// stations provide the geometry and the extent for range warnings.
pub async fn locate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TunnelLocateRequest>,
) -> Result<Json<tunnelfit_core::api::LocateReport>, ApiError> {
    let sessions = state.sessions.read().expect("lock");
    let session = sessions
        .tunnels
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no tunnel '{id}'")))?;
    let file = session
        .model
        .as_ref()
        .ok_or_else(|| ApiError::validation(format!("tunnel '{id}' has no fitted model yet")))?;
    let model = file.model()?;
    let report = resolve_and_locate(
        &model,
        Some(session.geometry.bs1_pos_m()),
        Some(session.geometry.bs2_pos_m()),
        &req.signal,
    )?;
    Ok(Json(report))
}
