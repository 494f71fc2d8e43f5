//! Request and response types for the HTTP service.
//!
//! These are the wire contracts shared by the server, the client crate and
//! the CLI. Scalar conventions match the rest of the crate: positions and
//! distances in meters, losses in dB, powers in dBm.

use serde::{Deserialize, Serialize};

use crate::estimator::FitOptions;
use crate::locator::Direction;
use crate::model::{ModelError, TemplateModel, TunnelGeometry};
use crate::simulator::{defaults, PlacementPolicy, ReferenceScenario, SimError};

/// Machine-readable error codes carried by [`ErrorBody`].
pub mod codes {
    pub const PARSE: &str = "parse";
    pub const VALIDATION: &str = "validation";
    pub const IDENTIFIABILITY: &str = "identifiability";
    pub const INVERSION: &str = "inversion";
    pub const NOT_FOUND: &str = "not_found";
    pub const INTERNAL: &str = "internal";
}

/// JSON error envelope returned by every failing endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorInfo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub code: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(code: impl Into<String>, message: impl Into<String>) -> Self {
        ErrorBody { error: ErrorInfo { code: code.into(), message: message.into() } }
    }
}

/// Anchor placement as it appears in configs and requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementSpec {
    Uniform(usize),
    Explicit(Vec<f64>),
}

impl From<PlacementSpec> for PlacementPolicy {
    fn from(spec: PlacementSpec) -> Self {
        match spec {
            PlacementSpec::Uniform(n) => PlacementPolicy::Uniform(n),
            PlacementSpec::Explicit(positions) => PlacementPolicy::Explicit(positions),
        }
    }
}

impl From<PlacementPolicy> for PlacementSpec {
    fn from(policy: PlacementPolicy) -> Self {
        match policy {
            PlacementPolicy::Uniform(n) => PlacementSpec::Uniform(n),
            PlacementPolicy::Explicit(positions) => PlacementSpec::Explicit(positions),
        }
    }
}

fn default_gamma() -> f64 {
    defaults::GAMMA
}
fn default_c() -> f64 {
    defaults::C
}
fn default_d0() -> f64 {
    defaults::D0_M
}
fn default_alpha() -> f64 {
    defaults::ALPHA_DB_PER_M
}
fn default_bs1() -> f64 {
    defaults::BS1_POS_M
}
fn default_bs2() -> f64 {
    defaults::BS2_POS_M
}
fn default_sigma() -> f64 {
    defaults::NOISE_SIGMA_DB
}
fn default_iterations() -> u32 {
    defaults::ITERATIONS
}
fn default_placement() -> PlacementSpec {
    PlacementSpec::Explicit(defaults::ANCHORS_M.to_vec())
}
fn default_tunnel_id() -> String {
    "reference".to_string()
}

/// Scenario configuration for campaign generation. Every field defaults to
/// the reference scenario, so an empty request simulates the standard
/// synthetic tunnel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateRequest {
    pub gamma: f64,
    pub c: f64,
    pub d0_m: f64,
    pub alpha_db_per_m: f64,
    pub bs1_pos_m: f64,
    pub bs2_pos_m: f64,
    pub placement: PlacementSpec,
    pub noise_sigma_db: f64,
    pub iterations: u32,
    pub seed: u64,
    pub tunnel_id: String,
}

impl Default for SimulateRequest {
    fn default() -> Self {
        SimulateRequest {
            gamma: default_gamma(),
            c: default_c(),
            d0_m: default_d0(),
            alpha_db_per_m: default_alpha(),
            bs1_pos_m: default_bs1(),
            bs2_pos_m: default_bs2(),
            placement: default_placement(),
            noise_sigma_db: default_sigma(),
            iterations: default_iterations(),
            seed: defaults::SEED,
            tunnel_id: default_tunnel_id(),
        }
    }
}

impl SimulateRequest {
    /// Builds the validated scenario and placement this request describes.
    pub fn to_scenario(&self) -> Result<(ReferenceScenario, PlacementPolicy), ScenarioBuildError> {
        let reference_model =
            TemplateModel::new(self.gamma, self.c, self.d0_m, self.alpha_db_per_m)?;
        let geometry = TunnelGeometry::new(self.bs1_pos_m, self.bs2_pos_m, vec![])?;
        let scenario = ReferenceScenario {
            reference_model,
            geometry,
            noise_sigma_db: self.noise_sigma_db,
            iterations: self.iterations,
            seed: self.seed,
        };
        scenario.validate()?;
        Ok((scenario, self.placement.clone().into()))
    }
}

/// Validation failures when turning a request into a scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioBuildError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

fn default_policies() -> Vec<PlacementSpec> {
    vec![
        PlacementSpec::Uniform(19),
        PlacementSpec::Uniform(14),
        PlacementSpec::Uniform(9),
        PlacementSpec::Explicit(defaults::ANCHORS_M.to_vec()),
    ]
}

fn default_seeds() -> Vec<u64> {
    vec![defaults::SEED]
}

/// Experiment-matrix configuration: the placement study runs the default
/// four layouts over the given seeds and emits one trace row per
/// (policy, seed, iteration).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceRequest {
    pub gamma: f64,
    pub c: f64,
    pub d0_m: f64,
    pub alpha_db_per_m: f64,
    pub bs1_pos_m: f64,
    pub bs2_pos_m: f64,
    pub noise_sigma_db: f64,
    pub iterations: u32,
    pub policies: Vec<PlacementSpec>,
    pub seeds: Vec<u64>,
    pub fit_options: FitOptions,
}

impl Default for ConvergenceRequest {
    fn default() -> Self {
        ConvergenceRequest {
            gamma: default_gamma(),
            c: default_c(),
            d0_m: default_d0(),
            alpha_db_per_m: default_alpha(),
            bs1_pos_m: default_bs1(),
            bs2_pos_m: default_bs2(),
            noise_sigma_db: default_sigma(),
            iterations: default_iterations(),
            policies: default_policies(),
            seeds: default_seeds(),
            fit_options: FitOptions::default(),
        }
    }
}

impl ConvergenceRequest {
    pub fn to_scenario(&self) -> Result<(ReferenceScenario, Vec<PlacementPolicy>), ScenarioBuildError>
    {
        let reference_model =
            TemplateModel::new(self.gamma, self.c, self.d0_m, self.alpha_db_per_m)?;
        let geometry = TunnelGeometry::new(self.bs1_pos_m, self.bs2_pos_m, vec![])?;
        let scenario = ReferenceScenario {
            reference_model,
            geometry,
            noise_sigma_db: self.noise_sigma_db,
            iterations: self.iterations,
            seed: defaults::SEED,
        };
        scenario.validate()?;
        let policies = self.policies.iter().cloned().map(PlacementPolicy::from).collect();
        Ok((scenario, policies))
    }
}

/// Campaign-fitting request: the campaign CSV travels verbatim in the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRequest {
    pub campaign_csv: String,
    #[serde(default)]
    pub options: FitOptions,
    /// Recorded in the model file's provenance; defaults to the campaign's
    /// tunnel id.
    #[serde(default)]
    pub source: Option<String>,
}

/// Signal inputs for positioning: either direct losses or RSSI readings
/// plus the transmit configuration. Exactly one coherent combination must
/// be supplied:
///
/// - two-station: `loss_bs1_db` + `loss_bs2_db` (or `rssi_bs1_dbm` +
///   `rssi_bs2_dbm` + `tx_power_dbm`), positioned between `bs1_pos_m` and
///   `bs2_pos_m`;
/// - single-station: `loss_db` (or `rssi_dbm` + `tx_power_dbm`) +
///   `bs_pos_m` + `direction`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalInput {
    pub loss_bs1_db: Option<f64>,
    pub loss_bs2_db: Option<f64>,
    pub rssi_bs1_dbm: Option<f64>,
    pub rssi_bs2_dbm: Option<f64>,
    pub loss_db: Option<f64>,
    pub rssi_dbm: Option<f64>,
    pub bs_pos_m: Option<f64>,
    pub direction: Option<Direction>,
    /// Required with any RSSI input; there is no implicit transmit power.
    pub tx_power_dbm: Option<f64>,
    pub gains_db: Option<f64>,
}

/// Stateless positioning request carrying its own model and geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateRequest {
    pub model: TemplateModel,
    pub bs1_pos_m: Option<f64>,
    pub bs2_pos_m: Option<f64>,
    #[serde(flatten)]
    pub signal: SignalInput,
}

/// Position report: raw and normalized distances plus range warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocateReport {
    pub position_m: f64,
    pub d1_raw_m: f64,
    pub d2_raw_m: Option<f64>,
    pub d1_m: f64,
    pub d2_m: Option<f64>,
    pub normalized: bool,
    /// Machine-readable warning codes, e.g. `position-outside-span`.
    pub warnings: Vec<String>,
}

/// Curve tabulation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub model: TemplateModel,
    pub start_m: f64,
    pub end_m: f64,
    pub step_m: f64,
}

/// Forward-evaluation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossRequest {
    pub model: TemplateModel,
    pub distance_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossResponse {
    pub loss_db: f64,
}

/// Inversion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertRequest {
    pub model: TemplateModel,
    pub loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertResponse {
    pub distance_m: f64,
}

/// Fresnel break-point request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FresnelRequest {
    pub h_r_m: f64,
    pub h_t_m: f64,
    pub lambda_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FresnelResponse {
    pub break_point_m: f64,
}

/// Pair-normalization request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeRequest {
    pub d1_m: f64,
    pub d2_m: f64,
    pub span_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizeResponse {
    pub d1_m: f64,
    pub d2_m: f64,
}

/// Creates a tunnel session that accumulates engagements server-side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateTunnelRequest {
    /// Generated when absent.
    #[serde(default)]
    pub tunnel_id: Option<String>,
    pub bs1_pos_m: f64,
    pub bs2_pos_m: f64,
    pub anchors_m: Vec<f64>,
}

/// Snapshot of one tunnel session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunnelSummary {
    pub tunnel_id: String,
    pub bs1_pos_m: f64,
    pub bs2_pos_m: f64,
    pub anchors_m: Vec<f64>,
    pub observation_count: usize,
    pub fitted: bool,
}

/// One engagement event pushed into a tunnel session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementRequest {
    pub anchor_index: usize,
    pub loss_bs1_db: f64,
    pub loss_bs2_db: f64,
    /// Passage index; when absent the session assigns the next index for
    /// this anchor.
    #[serde(default)]
    pub iteration: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementResponse {
    pub tunnel_id: String,
    pub observation_count: usize,
}

/// Fits the session's accumulated training set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunnelFitRequest {
    pub options: FitOptions,
}

/// Positions an object inside a tunnel session using its current model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TunnelLocateRequest {
    #[serde(flatten)]
    pub signal: SignalInput,
}
