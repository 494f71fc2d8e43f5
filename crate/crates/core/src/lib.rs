//! Self-adaptive two-piece path-loss modeling and positioning for tunnels.
//!
//! A tunnel is instrumented with two Wi-Fi base stations and a handful of
//! anchor points (RFID readers) at exactly known coordinates. Every time a
//! tagged object passes an anchor, both base stations measure the path loss
//! of its signal, yielding one (distance, loss) sample per base station. From
//! these sparse samples the estimator fits the four parameters of a two-piece
//! path-loss template: a free-space-like near region and a linear far region
//! joined at a break point. The fitted template is then inverted to position
//! objects anywhere along the tunnel axis from loss measurements alone.
//!
//! Modules:
//! - [`model`] — the template model, break-point geometry, inversion and
//!   two-base-station normalization.
//! - [`estimator`] — training-set accumulation and the profiled
//!   least-squares fit.
//! - [`simulator`] — seeded Monte Carlo generation of noisy campaigns and
//!   convergence experiments.
//! - [`locator`] — the operating phase: losses in, positions out.
//! - [`formats`] — campaign CSV, model JSON and trace CSV codecs.
//! - [`api`] — request/response types for the HTTP service.

pub mod api;
pub mod estimator;
pub mod formats;
pub mod locator;
pub mod model;
pub mod simulator;

pub use estimator::{
    evaluate_residuals, fit_from_training_set, fit_template, AnchorId, AnchorObservation,
    BaseStation, FitError, FitOptions, FitResult, PointMean, RecordError, TrainingSet,
};
pub use formats::{CampaignFile, CampaignRow, FormatError, ModelFile, Provenance};
pub use locator::{locate_one_bs, locate_two_bs, path_loss_from_rssi, Direction, PositionEstimate};
pub use model::{normalize_pair, FresnelParams, ModelError, TemplateModel, TunnelGeometry};
pub use simulator::{
    place_anchors, run_campaign, run_convergence, run_experiment_matrix, sample_iteration,
    ConvergenceTrace, EngagementRow, EngagementSample, IterationFit, IterationRecord,
    PlacementPolicy, ReferenceScenario, SimError,
};
