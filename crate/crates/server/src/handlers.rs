//! Stateless computation endpoints.

use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use tunnelfit_core::api::{
    ConvergenceRequest, EvalRequest, FitRequest, FresnelRequest, FresnelResponse, InvertRequest,
    InvertResponse, LocateRequest, NormalizeRequest, NormalizeResponse, PathLossRequest,
    PathLossResponse, SimulateRequest,
};
use tunnelfit_core::estimator::fit_from_training_set;
use tunnelfit_core::formats::{write_curve_csv, write_trace_csv, CampaignFile, ModelFile};
use tunnelfit_core::model::{normalize_pair, FresnelParams, ModelError};
use tunnelfit_core::simulator::{run_campaign, run_experiment_matrix_with};

use crate::error::ApiError;
use crate::locate::resolve_and_locate;
use crate::provenance_timestamp;

fn csv_response(body: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], body).into_response()
}

pub async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

/// Generates a synthetic campaign; deterministic per (placement, seed).
pub async fn simulate(Json(req): Json<SimulateRequest>) -> Result<Response, ApiError> {
    let (scenario, policy) = req.to_scenario().map_err(ApiError::validation)?;
    let (geometry, rows) = run_campaign(&scenario, &policy).map_err(ApiError::validation)?;
    let campaign = CampaignFile::from_rows(req.tunnel_id.clone(), &geometry, &rows);
    Ok(csv_response(campaign.to_csv()))
}

/// Ingests a campaign and fits the template on the per-anchor means.
pub async fn fit(Json(req): Json<FitRequest>) -> Result<Json<ModelFile>, ApiError> {
    let campaign = CampaignFile::parse(&req.campaign_csv)?;
    let (_geometry, training) = campaign.to_training_set()?;
    let result = fit_from_training_set(&training, &req.options)?;
    let source = req
        .source
        .clone()
        .unwrap_or_else(|| format!("campaign:{}", campaign.tunnel_id));
    Ok(Json(ModelFile::from_fit(&result, source, &req.options, provenance_timestamp())))
}

/// Runs the placement-by-seed experiment matrix and streams the trace CSV.
pub async fn convergence(Json(req): Json<ConvergenceRequest>) -> Result<Response, ApiError> {
    if req.policies.is_empty() || req.seeds.is_empty() {
        return Err(ApiError::validation("policies and seeds must be non-empty"));
    }
    let (scenario, policies) = req.to_scenario().map_err(ApiError::validation)?;
    let traces = run_experiment_matrix_with(&scenario, &policies, &req.seeds, &req.fit_options)
        .map_err(ApiError::validation)?;
    Ok(csv_response(write_trace_csv(&traces)))
}

/// Positions an object from losses or RSSI readings.
pub async fn locate(Json(req): Json<LocateRequest>) -> Result<Response, ApiError> {
    let report = resolve_and_locate(&req.model, req.bs1_pos_m, req.bs2_pos_m, &req.signal)?;
    Ok(Json(report).into_response())
}

/// Tabulates a model over a distance range as plot-ready CSV.
pub async fn eval(Json(req): Json<EvalRequest>) -> Result<Response, ApiError> {
    let csv = write_curve_csv(&req.model, req.start_m, req.end_m, req.step_m)?;
    Ok(csv_response(csv))
}

pub async fn path_loss(Json(req): Json<PathLossRequest>) -> Result<Json<PathLossResponse>, ApiError> {
    let loss_db = req.model.path_loss_db(req.distance_m)?;
    Ok(Json(PathLossResponse { loss_db }))
}

pub async fn invert(Json(req): Json<InvertRequest>) -> Result<Json<InvertResponse>, ApiError> {
    let distance_m = req.model.invert_distance_m(req.loss_db).map_err(|e| match e {
        ModelError::FlatFarRegion { .. } => ApiError::inversion(e),
        other => ApiError::validation(other),
    })?;
    Ok(Json(InvertResponse { distance_m }))
}

pub async fn fresnel(Json(req): Json<FresnelRequest>) -> Result<Json<FresnelResponse>, ApiError> {
    let params = FresnelParams::new(req.h_r_m, req.h_t_m, req.lambda_m)?;
    Ok(Json(FresnelResponse { break_point_m: params.break_point_m() }))
}

pub async fn normalize(
    Json(req): Json<NormalizeRequest>,
) -> Result<Json<NormalizeResponse>, ApiError> {
    let (d1_m, d2_m) = normalize_pair(req.d1_m, req.d2_m, req.span_m)?;
    Ok(Json(NormalizeResponse { d1_m, d2_m }))
}
