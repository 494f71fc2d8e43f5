//! HTTP service exposing the estimation toolkit.
//!
//! Stateless endpoints run one computation per request (simulate, fit,
//! convergence, locate, eval, and the small model operations). Tunnel
//! sessions hold state: a geometry, an append-only training set fed by
//! engagement events, and the most recent fitted model, mirroring how a
//! deployment continuously refines its propagation model as tagged objects
//! pass the readers.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::routing::{get, post};
use axum::Router;

use tunnelfit_core::estimator::TrainingSet;
use tunnelfit_core::formats::ModelFile;
use tunnelfit_core::model::TunnelGeometry;

pub mod error;
mod handlers;
mod locate;
mod tunnels;

/// One tunnel's accumulated state.
pub struct TunnelSession {
    pub geometry: TunnelGeometry,
    pub training: TrainingSet,
    pub model: Option<ModelFile>,
    /// Next auto-assigned passage index, per anchor.
    pub next_iteration: Vec<u32>,
}

#[derive(Default)]
pub struct Sessions {
    pub tunnels: HashMap<String, TunnelSession>,
    next_id: u64,
}

impl Sessions {
    pub fn fresh_id(&mut self) -> String {
        self.next_id += 1;
        format!("tunnel-{}", self.next_id)
    }
}

/// Shared handler state. Session mutation is single-writer behind the lock;
/// all computation on snapshots is pure.
#[derive(Clone, Default)]
pub struct AppState {
    pub sessions: Arc<RwLock<Sessions>>,
}

/// Builds the service router.
pub fn app() -> Router {
    Router::new()
        .route("/health", get(handlers::health))
        .route("/v1/simulate", post(handlers::simulate))
        .route("/v1/fit", post(handlers::fit))
        .route("/v1/convergence", post(handlers::convergence))
        .route("/v1/locate", post(handlers::locate))
        .route("/v1/eval", post(handlers::eval))
        .route("/v1/model/path-loss", post(handlers::path_loss))
        .route("/v1/model/invert", post(handlers::invert))
        .route("/v1/model/fresnel", post(handlers::fresnel))
        .route("/v1/model/normalize", post(handlers::normalize))
        .route("/v1/tunnels", post(tunnels::create).get(tunnels::list))
        .route("/v1/tunnels/{id}", get(tunnels::show).delete(tunnels::remove))
        .route("/v1/tunnels/{id}/engagements", post(tunnels::engage))
        .route("/v1/tunnels/{id}/fit", post(tunnels::fit))
        .route("/v1/tunnels/{id}/model", get(tunnels::model))
        .route("/v1/tunnels/{id}/locate", post(tunnels::locate))
        .with_state(AppState::default())
}

/// RFC 3339 timestamp for model provenance. Honors `SOURCE_DATE_EPOCH`
/// (seconds since the Unix epoch) so pipelines can produce byte-identical
/// model files; falls back to the wall clock.
pub fn provenance_timestamp() -> String {
    let from_env = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::<chrono::Utc>::from_timestamp(secs, 0));
    from_env
        .unwrap_or_else(chrono::Utc::now)
        .to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}
