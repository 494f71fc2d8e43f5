//! Seeded Monte Carlo generation of noisy campaigns and convergence
//! experiments.
//!
//! A scenario samples a reference template at the anchor points, adds white
//! Gaussian noise to every loss, and feeds the samples to the estimator one
//! passage at a time. Everything is driven by a ChaCha8 stream cipher RNG:
//! the seed picks the key and the placement label picks the stream (via
//! FNV-1a), so every (placement, seed) pair draws an independent sequence
//! that is reproducible across platforms and runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{fit_from_training_set, FitOptions, TrainingSet};
use crate::model::{ModelError, TemplateModel, TunnelGeometry};

/// Default reference scenario values: the synthetic tunnel used throughout
/// the validation experiments.
pub mod defaults {
    pub const GAMMA: f64 = 2.0;
    pub const C: f64 = 20.1;
    pub const D0_M: f64 = 50.0;
    pub const ALPHA_DB_PER_M: f64 = 0.2;
    pub const BS1_POS_M: f64 = 0.0;
    pub const BS2_POS_M: f64 = 300.0;
    pub const ANCHORS_M: [f64; 4] = [15.0, 30.0, 270.0, 285.0];
    pub const NOISE_SIGMA_DB: f64 = 1.25;
    pub const ITERATIONS: u32 = 100;
    pub const SEED: u64 = 0;
}

/// Errors from scenario validation and placement.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("noise sigma must be non-negative and finite, got {0} dB")]
    InvalidSigma(f64),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("uniform placement needs at least one anchor")]
    EmptyPlacement,
    #[error("scenario geometry has no anchors; place anchors first")]
    NoAnchors,
    #[error("experiment matrix needs at least one placement and one seed")]
    EmptyMatrix,
    #[error(transparent)]
    Geometry(#[from] ModelError),
}

/// Ground truth plus sampling configuration for one simulated tunnel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceScenario {
    pub reference_model: TemplateModel,
    pub geometry: TunnelGeometry,
    /// Standard deviation of the additive Gaussian noise on each sampled
    /// loss, dB.
    pub noise_sigma_db: f64,
    /// Passages through all anchors.
    pub iterations: u32,
    pub seed: u64,
}

impl Default for ReferenceScenario {
    fn default() -> Self {
        ReferenceScenario {
            reference_model: TemplateModel::new(
                defaults::GAMMA,
                defaults::C,
                defaults::D0_M,
                defaults::ALPHA_DB_PER_M,
            )
            .expect("reference parameters are valid"),
            geometry: TunnelGeometry::new(
                defaults::BS1_POS_M,
                defaults::BS2_POS_M,
                defaults::ANCHORS_M.to_vec(),
            )
            .expect("reference geometry is valid"),
            noise_sigma_db: defaults::NOISE_SIGMA_DB,
            iterations: defaults::ITERATIONS,
            seed: defaults::SEED,
        }
    }
}

impl ReferenceScenario {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.noise_sigma_db.is_finite() || self.noise_sigma_db < 0.0 {
            return Err(SimError::InvalidSigma(self.noise_sigma_db));
        }
        if self.iterations == 0 {
            return Err(SimError::NoIterations);
        }
        Ok(())
    }

    /// Same scenario over a different geometry (e.g. after anchor placement).
    pub fn with_geometry(&self, geometry: TunnelGeometry) -> Self {
        ReferenceScenario { geometry, ..self.clone() }
    }
}

/// Where the anchors go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementPolicy {
    /// `n` anchors evenly spaced strictly inside the span, at
    /// `bs1 + k*D/(n+1)` for `k = 1..=n`.
    Uniform(usize),
    /// Explicit anchor coordinates.
    Explicit(Vec<f64>),
}

impl PlacementPolicy {
    /// Stable label used in trace files and for RNG stream selection,
    /// e.g. `uniform-9` or `explicit-15-30-270-285`.
    pub fn label(&self) -> String {
        match self {
            PlacementPolicy::Uniform(n) => format!("uniform-{n}"),
            PlacementPolicy::Explicit(positions) => {
                let joined: Vec<String> = positions.iter().map(|p| format!("{p}")).collect();
                format!("explicit-{}", joined.join("-"))
            }
        }
    }

    /// RNG stream for this placement: FNV-1a over the label bytes.
    pub fn stream(&self) -> u64 {
        const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut hash = FNV_OFFSET;
        for byte in self.label().bytes() {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(FNV_PRIME);
        }
        hash
    }
}

/// Places anchors according to the policy, keeping the base stations.
pub fn place_anchors(
    policy: &PlacementPolicy,
    geometry: &TunnelGeometry,
) -> Result<TunnelGeometry, SimError> {
    match policy {
        PlacementPolicy::Uniform(0) => Err(SimError::EmptyPlacement),
        PlacementPolicy::Uniform(n) => {
            let span = geometry.span_m();
            let spacing = span / (*n as f64 + 1.0);
            let anchors: Vec<f64> = (1..=*n)
                .map(|k| geometry.bs1_pos_m() + k as f64 * spacing)
                .collect();
            Ok(geometry.with_anchors(anchors)?)
        }
        PlacementPolicy::Explicit(positions) => Ok(geometry.with_anchors(positions.clone())?),
    }
}

/// One noisy engagement drawn at an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementSample {
    pub anchor_index: usize,
    pub loss_bs1_db: f64,
    pub loss_bs2_db: f64,
}

/// One campaign row: an engagement sample tagged with its passage index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngagementRow {
    pub iteration: u32,
    pub anchor_index: usize,
    pub loss_bs1_db: f64,
    pub loss_bs2_db: f64,
}

/// Draws one passage through all anchors: for each anchor in order, the
/// noiseless losses to both base stations plus independent Gaussian noise
/// on each. Draw order is (anchor 0 bs1, anchor 0 bs2, anchor 1 bs1, ...),
/// advancing the RNG deterministically; a zero-sigma scenario consumes the
/// same number of draws and returns the noiseless losses exactly.
pub fn sample_iteration(scenario: &ReferenceScenario, rng: &mut ChaCha8Rng) -> Vec<EngagementSample> {
    let noise = Normal::new(0.0, scenario.noise_sigma_db)
        .expect("sigma validated as non-negative and finite");
    let g = &scenario.geometry;
    let m = &scenario.reference_model;
    (0..g.anchor_count())
        .map(|i| {
            let d1 = g.distance_to_bs1_m(i).expect("index in range");
            let d2 = g.distance_to_bs2_m(i).expect("index in range");
            let l1 = m.path_loss_db(d1).expect("anchors are strictly inside the span");
            let l2 = m.path_loss_db(d2).expect("anchors are strictly inside the span");
            EngagementSample {
                anchor_index: i,
                loss_bs1_db: l1 + noise.sample(rng),
                loss_bs2_db: l2 + noise.sample(rng),
            }
        })
        .collect()
}

fn scenario_rng(seed: u64, policy: &PlacementPolicy) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(policy.stream());
    rng
}

/// Generates a full campaign: `iterations` passages through the placed
/// anchors, one row per (iteration, anchor). Rows are iteration-major;
/// the same (policy, seed) always yields identical rows, and they match
/// the samples a convergence run would draw.
pub fn run_campaign(
    scenario: &ReferenceScenario,
    policy: &PlacementPolicy,
) -> Result<(TunnelGeometry, Vec<EngagementRow>), SimError> {
    scenario.validate()?;
    let geometry = place_anchors(policy, &scenario.geometry)?;
    if geometry.anchor_count() == 0 {
        return Err(SimError::NoAnchors);
    }
    let anchored = scenario.with_geometry(geometry.clone());
    let mut rng = scenario_rng(scenario.seed, policy);
    let mut rows = Vec::with_capacity(scenario.iterations as usize * geometry.anchor_count());
    for iteration in 0..scenario.iterations {
        for sample in sample_iteration(&anchored, &mut rng) {
            rows.push(EngagementRow {
                iteration,
                anchor_index: sample.anchor_index,
                loss_bs1_db: sample.loss_bs1_db,
                loss_bs2_db: sample.loss_bs2_db,
            });
        }
    }
    Ok((geometry, rows))
}

/// Fit outcome of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationFit {
    pub model: TemplateModel,
    pub sse_db2: f64,
}

/// One row of a convergence trace. `fit` is `None` when the estimator could
/// not produce a model from the data accumulated so far; consumers carry the
/// previous model forward for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Number of passages accumulated, starting at 1.
    pub iteration: u32,
    pub fit: Option<IterationFit>,
}

/// Per-iteration fits of one simulated run against its reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub policy_label: String,
    pub seed: u64,
    pub reference: TemplateModel,
    pub per_iteration: Vec<IterationRecord>,
}

/// Runs one convergence experiment: each iteration draws a passage, appends
/// it to the training set, and refits on the accumulated per-anchor means.
/// Fit failures are recorded, not raised. Fully deterministic per
/// (policy, seed).
pub fn run_convergence(
    scenario: &ReferenceScenario,
    policy: &PlacementPolicy,
) -> Result<ConvergenceTrace, SimError> {
    run_convergence_with(scenario, policy, &FitOptions::default())
}

/// [`run_convergence`] with explicit fit options.
pub fn run_convergence_with(
    scenario: &ReferenceScenario,
    policy: &PlacementPolicy,
    fit_options: &FitOptions,
) -> Result<ConvergenceTrace, SimError> {
    scenario.validate()?;
    let geometry = place_anchors(policy, &scenario.geometry)?;
    if geometry.anchor_count() == 0 {
        return Err(SimError::NoAnchors);
    }
    let anchored = scenario.with_geometry(geometry.clone());
    let mut rng = scenario_rng(scenario.seed, policy);
    let mut training = TrainingSet::new();
    let mut per_iteration = Vec::with_capacity(scenario.iterations as usize);
    for t in 1..=scenario.iterations {
        for sample in sample_iteration(&anchored, &mut rng) {
            training
                .record_engagement(
                    &geometry,
                    sample.anchor_index,
                    sample.loss_bs1_db,
                    sample.loss_bs2_db,
                    t - 1,
                )
                .expect("samples come from the same geometry");
        }
        let fit = fit_from_training_set(&training, fit_options)
            .ok()
            .map(|f| IterationFit { model: f.model, sse_db2: f.sse_db2 });
        per_iteration.push(IterationRecord { iteration: t, fit });
    }
    Ok(ConvergenceTrace {
        policy_label: policy.label(),
        seed: scenario.seed,
        reference: scenario.reference_model,
        per_iteration,
    })
}

/// Cross product of placements and seeds, one independent trace per pair.
pub fn run_experiment_matrix(
    base: &ReferenceScenario,
    policies: &[PlacementPolicy],
    seeds: &[u64],
) -> Result<Vec<ConvergenceTrace>, SimError> {
    run_experiment_matrix_with(base, policies, seeds, &FitOptions::default())
}

/// [`run_experiment_matrix`] with explicit fit options.
pub fn run_experiment_matrix_with(
    base: &ReferenceScenario,
    policies: &[PlacementPolicy],
    seeds: &[u64],
    fit_options: &FitOptions,
) -> Result<Vec<ConvergenceTrace>, SimError> {
    if policies.is_empty() || seeds.is_empty() {
        return Err(SimError::EmptyMatrix);
    }
    let mut traces = Vec::with_capacity(policies.len() * seeds.len());
    for policy in policies {
        for &seed in seeds {
            let scenario = ReferenceScenario { seed, ..base.clone() };
            traces.push(run_convergence_with(&scenario, policy, fit_options)?);
        }
    }
    Ok(traces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_placement_is_interior_and_even() {
        let g = TunnelGeometry::new(0.0, 300.0, vec![]).unwrap();
        let placed = place_anchors(&PlacementPolicy::Uniform(4), &g).unwrap();
        assert_eq!(placed.anchors_m(), &[60.0, 120.0, 180.0, 240.0]);
        let one = place_anchors(&PlacementPolicy::Uniform(1), &g).unwrap();
        assert_eq!(one.anchors_m(), &[150.0]);
    }

    #[test]
    fn explicit_placement_passes_through() {
        let g = TunnelGeometry::new(0.0, 300.0, vec![]).unwrap();
        let placed =
            place_anchors(&PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]), &g).unwrap();
        assert_eq!(placed.anchors_m(), &[15.0, 30.0, 270.0, 285.0]);
        assert!(place_anchors(&PlacementPolicy::Explicit(vec![301.0]), &g).is_err());
        assert!(place_anchors(&PlacementPolicy::Uniform(0), &g).is_err());
    }

    #[test]
    fn noiseless_samples_equal_model_evaluations() {
        let scenario = ReferenceScenario { noise_sigma_db: 0.0, ..ReferenceScenario::default() };
        let mut rng = scenario_rng(scenario.seed, &PlacementPolicy::Uniform(1));
        let samples = sample_iteration(&scenario, &mut rng);
        assert_eq!(samples.len(), 4);
        // Anchor at 15 m from bs1.
        assert_eq!(samples[0].loss_bs1_db, 63.72182518111363);
        // Anchor at 285 m sits 15 m from bs2: symmetric loss.
        assert_eq!(samples[3].loss_bs2_db, 63.72182518111363);
    }

    #[test]
    fn noise_statistics_match_sigma() {
        let scenario = ReferenceScenario {
            geometry: TunnelGeometry::new(0.0, 300.0, vec![15.0]).unwrap(),
            ..ReferenceScenario::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let s = sample_iteration(&scenario, &mut rng);
            sum += s[0].loss_bs1_db;
            sum_sq += s[0].loss_bs1_db * s[0].loss_bs1_db;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let noiseless = 63.72182518111363;
        let sigma = 1.25;
        assert!(
            (mean - noiseless).abs() < 3.0 * sigma / (n as f64).sqrt(),
            "sample mean {mean} too far from {noiseless}"
        );
        assert!(
            (var.sqrt() - sigma).abs() < 0.05 * sigma,
            "sample std {} too far from {sigma}",
            var.sqrt()
        );
    }

    #[test]
    fn anchor_symmetry_in_symmetric_scenario() {
        let scenario = ReferenceScenario { noise_sigma_db: 0.0, ..ReferenceScenario::default() };
        let g = &scenario.geometry;
        let m = &scenario.reference_model;
        for i in 0..g.anchor_count() {
            let x = g.anchors_m()[i];
            let mirrored = g.bs1_pos_m() + g.bs2_pos_m() - x;
            let l1 = m.path_loss_db(x - g.bs1_pos_m()).unwrap();
            let l2_mirror = m.path_loss_db(g.bs2_pos_m() - mirrored).unwrap();
            assert_eq!(l1, l2_mirror);
        }
    }

    #[test]
    fn convergence_is_deterministic() {
        let scenario = ReferenceScenario { iterations: 5, ..ReferenceScenario::default() };
        let policy = PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]);
        let a = run_convergence(&scenario, &policy).unwrap();
        let b = run_convergence(&scenario, &policy).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.per_iteration.len(), 5);
    }

    #[test]
    fn noiseless_convergence_is_a_fixed_point() {
        let scenario = ReferenceScenario {
            noise_sigma_db: 0.0,
            iterations: 3,
            ..ReferenceScenario::default()
        };
        let policy = PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]);
        let trace = run_convergence(&scenario, &policy).unwrap();
        for record in &trace.per_iteration {
            let fit = record.fit.as_ref().expect("noiseless fits succeed");
            let m = fit.model;
            assert!((m.gamma() - 2.0).abs() < 1e-6);
            assert!((m.c() - 20.1).abs() < 1e-6);
            assert!((m.d0_m() - 50.0).abs() < 1e-3);
            assert!((m.alpha_db_per_m() - 0.2).abs() < 1e-6);
        }
    }

    #[test]
    fn campaign_matches_convergence_samples() {
        let scenario = ReferenceScenario { iterations: 2, ..ReferenceScenario::default() };
        let policy = PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]);
        let (geometry, rows) = run_campaign(&scenario, &policy).unwrap();
        assert_eq!(geometry.anchor_count(), 4);
        assert_eq!(rows.len(), 8);
        assert_eq!(rows[0].iteration, 0);
        assert_eq!(rows[7].iteration, 1);
        // Same stream as a convergence run: first-iteration samples agree.
        let mut rng = scenario_rng(scenario.seed, &policy);
        let anchored = scenario.with_geometry(geometry);
        let samples = sample_iteration(&anchored, &mut rng);
        assert_eq!(rows[0].loss_bs1_db, samples[0].loss_bs1_db);
        assert_eq!(rows[3].loss_bs2_db, samples[3].loss_bs2_db);
    }

    #[test]
    fn matrix_is_cross_product_and_reproducible() {
        let base = ReferenceScenario { iterations: 2, ..ReferenceScenario::default() };
        let policies = vec![
            PlacementPolicy::Uniform(4),
            PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]),
        ];
        let seeds = vec![1, 2, 1];
        let traces = run_experiment_matrix(&base, &policies, &seeds).unwrap();
        assert_eq!(traces.len(), 6);
        // Repeated (policy, seed) pairs give bit-identical traces.
        assert_eq!(traces[0], traces[2]);
        // Different policies with the same seed draw from different streams.
        assert_ne!(
            traces[0].per_iteration[0].fit.map(|f| f.model.gamma()),
            traces[3].per_iteration[0].fit.map(|f| f.model.gamma()),
        );
        assert!(run_experiment_matrix(&base, &[], &seeds).is_err());
    }

    #[test]
    fn policy_labels_are_stable() {
        assert_eq!(PlacementPolicy::Uniform(9).label(), "uniform-9");
        assert_eq!(
            PlacementPolicy::Explicit(vec![15.0, 30.0, 270.0, 285.0]).label(),
            "explicit-15-30-270-285"
        );
        assert_ne!(
            PlacementPolicy::Uniform(9).stream(),
            PlacementPolicy::Uniform(19).stream()
        );
    }
}
