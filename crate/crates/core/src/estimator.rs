//! Training-set accumulation and least-squares estimation of the template
//! parameters.
//!
//! For a fixed break point the template is linear in `p = (gamma, gamma*C,
//! alpha)`: a near point at distance `d` contributes the row
//! `[10*log10(d), 1, 0]`, a far point the row `[10*log10(d0), 1, d - d0]`.
//! The fit therefore profiles the break point over a deterministic grid,
//! solves each candidate's linear subproblem by Householder least squares,
//! and polishes the best grid cell with a golden-section search. Profiling
//! is global and needs no initial guess.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, TemplateModel, TunnelGeometry};

/// Default break-point grid resolution, meters.
pub const DEFAULT_GRID_STEP_M: f64 = 0.5;
/// Default golden-section refinement tolerance on the break point, meters.
/// Tight enough that noiseless data recovers its generating parameters to
/// rounding; the ~40 extra inner solves it costs are negligible next to the
/// grid scan.
pub const DEFAULT_REFINE_TOL_M: f64 = 1e-9;

// A linear subproblem whose QR pivot falls below this threshold (relative to
// the largest pivot) is treated as rank-deficient and the candidate skipped.
const RANK_TOL: f64 = 1e-12;

/// Stable identifier of an anchor point within one tunnel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AnchorId(pub u32);

/// Which base station measured a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseStation {
    Bs1,
    Bs2,
}

impl std::fmt::Display for BaseStation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BaseStation::Bs1 => write!(f, "bs1"),
            BaseStation::Bs2 => write!(f, "bs2"),
        }
    }
}

/// One engagement sample: a known distance paired with a measured loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorObservation {
    pub anchor_id: AnchorId,
    pub bs: BaseStation,
    pub distance_m: f64,
    pub path_loss_db: f64,
    /// Passage index that produced this sample, starting at 0.
    pub iteration: u32,
}

/// Running mean of the losses observed at one (anchor, base station) key.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMean {
    pub distance_m: f64,
    pub mean_loss_db: f64,
    pub count: u64,
}

/// Append-only collection of engagement samples with per-point running means.
///
/// Means are keyed by `(anchor, base station)`; the distance within one key
/// never changes because anchors do not move.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    observations: Vec<AnchorObservation>,
    means: BTreeMap<(AnchorId, BaseStation), PointMean>,
}

/// Errors from recording engagements.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecordError {
    #[error("anchor index {index} out of range, geometry has {count} anchors")]
    AnchorIndexOutOfRange { index: usize, count: usize },
    #[error("loss at {bs} must be finite, got {value} dB")]
    NonFiniteLoss { bs: BaseStation, value: f64 },
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one engagement at anchor `anchor_index`: the object's distance
    /// to each base station is derived from the geometry and paired with the
    /// loss that station measured.
    pub fn record_engagement(
        &mut self,
        geometry: &TunnelGeometry,
        anchor_index: usize,
        loss_bs1_db: f64,
        loss_bs2_db: f64,
        iteration: u32,
    ) -> Result<(), RecordError> {
        let d1 = geometry.distance_to_bs1_m(anchor_index).ok_or(
            RecordError::AnchorIndexOutOfRange {
                index: anchor_index,
                count: geometry.anchor_count(),
            },
        )?;
        let d2 = geometry
            .distance_to_bs2_m(anchor_index)
            .expect("index checked above");
        if !loss_bs1_db.is_finite() {
            return Err(RecordError::NonFiniteLoss { bs: BaseStation::Bs1, value: loss_bs1_db });
        }
        if !loss_bs2_db.is_finite() {
            return Err(RecordError::NonFiniteLoss { bs: BaseStation::Bs2, value: loss_bs2_db });
        }
        let id = AnchorId(anchor_index as u32);
        self.push(AnchorObservation {
            anchor_id: id,
            bs: BaseStation::Bs1,
            distance_m: d1,
            path_loss_db: loss_bs1_db,
            iteration,
        });
        self.push(AnchorObservation {
            anchor_id: id,
            bs: BaseStation::Bs2,
            distance_m: d2,
            path_loss_db: loss_bs2_db,
            iteration,
        });
        Ok(())
    }

    fn push(&mut self, obs: AnchorObservation) {
        let entry = self.means.entry((obs.anchor_id, obs.bs)).or_insert(PointMean {
            distance_m: obs.distance_m,
            mean_loss_db: 0.0,
            count: 0,
        });
        debug_assert_eq!(entry.distance_m, obs.distance_m, "an anchor does not move");
        entry.count += 1;
        entry.mean_loss_db += (obs.path_loss_db - entry.mean_loss_db) / entry.count as f64;
        self.observations.push(obs);
    }

    pub fn observations(&self) -> &[AnchorObservation] {
        &self.observations
    }

    pub fn per_point_means(&self) -> &BTreeMap<(AnchorId, BaseStation), PointMean> {
        &self.means
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    /// One (distance, mean loss) point per (anchor, base station) key,
    /// optionally restricted to a single base station.
    pub fn mean_points(&self, bs: Option<BaseStation>) -> Vec<(f64, f64)> {
        self.means
            .iter()
            .filter(|((_, b), _)| bs.map_or(true, |want| *b == want))
            .map(|(_, m)| (m.distance_m, m.mean_loss_db))
            .collect()
    }

    /// Every raw (distance, loss) sample, optionally restricted to a single
    /// base station.
    pub fn raw_points(&self, bs: Option<BaseStation>) -> Vec<(f64, f64)> {
        self.observations
            .iter()
            .filter(|o| bs.map_or(true, |want| o.bs == want))
            .map(|o| (o.distance_m, o.path_loss_db))
            .collect()
    }
}

/// Knobs for the profiled fit. The defaults reproduce the standard
/// estimation procedure: fit on per-point means, pool both base stations,
/// profile the break point at 0.5 m over the observed distance range and
/// polish the winning cell until the bracket collapses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Break-point grid resolution, meters.
    pub grid_step_m: f64,
    /// Golden-section refinement tolerance, meters.
    pub refine_tol_m: f64,
    /// Lower bound of the break-point grid. Defaults to the smallest observed
    /// distance (or to the upper bound when that is smaller).
    pub d0_min_m: Option<f64>,
    /// Upper bound of the break-point grid. Defaults to the largest observed
    /// distance.
    pub d0_max_m: Option<f64>,
    /// Anchors the grid phase so this value is always a candidate, e.g. a
    /// first-Fresnel-zone estimate of the break point.
    pub d0_hint_m: Option<f64>,
    /// Clamp the far slope at zero (exact single-bound least squares).
    pub nonnegative_alpha: bool,
    /// Fit on per-point mean losses (default) or on every raw sample.
    pub fit_on_means: bool,
    /// Restrict the fit to one base station's observations; by default both
    /// stations share one propagation model and their points are pooled.
    pub bs_filter: Option<BaseStation>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grid_step_m: DEFAULT_GRID_STEP_M,
            refine_tol_m: DEFAULT_REFINE_TOL_M,
            d0_min_m: None,
            d0_max_m: None,
            d0_hint_m: None,
            nonnegative_alpha: false,
            fit_on_means: true,
            bs_filter: None,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<(), FitError> {
        if !self.grid_step_m.is_finite() || self.grid_step_m <= 0.0 {
            return Err(FitError::InvalidOptions(format!(
                "grid_step_m must be positive, got {}",
                self.grid_step_m
            )));
        }
        if !self.refine_tol_m.is_finite() || self.refine_tol_m <= 0.0 {
            return Err(FitError::InvalidOptions(format!(
                "refine_tol_m must be positive, got {}",
                self.refine_tol_m
            )));
        }
        for (name, v) in [
            ("d0_min_m", self.d0_min_m),
            ("d0_max_m", self.d0_max_m),
            ("d0_hint_m", self.d0_hint_m),
        ] {
            if let Some(v) = v {
                if !v.is_finite() || v <= 0.0 {
                    return Err(FitError::InvalidOptions(format!(
                        "{name} must be positive, got {v}"
                    )));
                }
            }
        }
        if let (Some(lo), Some(hi)) = (self.d0_min_m, self.d0_max_m) {
            if lo > hi {
                return Err(FitError::InvalidOptions(format!(
                    "d0_min_m ({lo}) exceeds d0_max_m ({hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Fitted model plus diagnostics from the profile search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: TemplateModel,
    /// Residual sum of squares at the optimum, dB^2.
    pub sse_db2: f64,
    /// Points assigned to the near region at the fitted break point.
    pub near_count: usize,
    /// Points assigned to the far region at the fitted break point.
    pub far_count: usize,
    /// (candidate break point, sse) pairs evaluated by the profile search.
    pub d0_trace: Vec<(f64, f64)>,
}

/// Errors from the fit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} points to fit, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("need at least {needed} distinct distances, got {got}")]
    TooFewDistinctDistances { needed: usize, got: usize },
    #[error("point {index}: distance must be positive and finite, got {value} m")]
    InvalidDistance { index: usize, value: f64 },
    #[error("point {index}: loss must be finite, got {value} dB")]
    InvalidLoss { index: usize, value: f64 },
    #[error("invalid fit options: {0}")]
    InvalidOptions(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(
        "no break-point candidate splits the data into at least two distinct \
         near distances and a non-empty far region"
    )]
    NoViableBreakpoint,
    #[error(
        "break point not identifiable: the best fit (d0 = {d0_m} m) leaves \
         {far_distinct} distinct far distance(s), at least 2 are needed to pin the far slope"
    )]
    BreakpointNotIdentifiable { d0_m: f64, far_distinct: usize },
    #[error("degenerate fit: gamma = {gamma} is not positive, C cannot be recovered")]
    DegenerateGamma { gamma: f64 },
    #[error("fitted parameters violate model invariants: {0}")]
    InvalidFit(#[from] ModelError),
}

impl FitError {
    /// True for data-starvation failures (as opposed to bad inputs).
    pub fn is_identifiability(&self) -> bool {
        matches!(
            self,
            FitError::NoViableBreakpoint
                | FitError::BreakpointNotIdentifiable { .. }
                | FitError::DegenerateGamma { .. }
                | FitError::InvalidFit(_)
        )
    }
}

#[derive(Debug, Clone, Copy)]
struct Regions {
    near_count: usize,
    far_count: usize,
    near_distinct: usize,
    far_distinct: usize,
}

/// Region membership at a candidate break point; `d <= d0` is near.
/// Points must be sorted by distance.
fn classify(points: &[(f64, f64)], d0: f64) -> Regions {
    let split = points.partition_point(|&(d, _)| d <= d0);
    let distinct = |slice: &[(f64, f64)]| {
        let mut n = 0;
        let mut prev = f64::NAN;
        for &(d, _) in slice {
            if d != prev {
                n += 1;
                prev = d;
            }
        }
        n
    };
    Regions {
        near_count: split,
        far_count: points.len() - split,
        near_distinct: distinct(&points[..split]),
        far_distinct: distinct(&points[split..]),
    }
}

#[derive(Debug, Clone, Copy)]
struct Solved {
    p: [f64; 3],
    sse: f64,
}

/// Householder least squares on augmented rows `[a_0, .., a_{ncols-1}, rhs]`.
/// Returns the solution and residual sum of squares, or `None` when a pivot
/// collapses (rank-deficient subproblem).
fn householder_lls(rows: &mut [[f64; 4]], ncols: usize) -> Option<(Vec<f64>, f64)> {
    let m = rows.len();
    if m < ncols {
        return None;
    }
    let mut max_pivot = 0.0f64;
    for k in 0..ncols {
        let mut norm_sq = 0.0;
        for row in rows[k..].iter() {
            norm_sq += row[k] * row[k];
        }
        let norm = norm_sq.sqrt();
        let pivot = norm;
        max_pivot = max_pivot.max(pivot);
        if pivot == 0.0 || pivot < RANK_TOL * max_pivot {
            return None;
        }
        let alpha = if rows[k][k] >= 0.0 { -norm } else { norm };
        // Householder vector v = x - alpha*e1 over rows k..m.
        let v0 = rows[k][k] - alpha;
        let v_norm_sq = norm_sq - 2.0 * alpha * rows[k][k] + alpha * alpha;
        if v_norm_sq == 0.0 {
            // Column already triangular below the diagonal.
            rows[k][k] = alpha;
            continue;
        }
        let beta = 2.0 / v_norm_sq;
        for j in (k + 1)..4 {
            let mut dot = v0 * rows[k][j];
            for row in rows[k + 1..].iter() {
                dot += row[k] * row[j];
            }
            let scale = beta * dot;
            rows[k][j] -= scale * v0;
            for row in rows[k + 1..].iter_mut() {
                row[j] -= scale * row[k];
            }
        }
        rows[k][k] = alpha;
        for row in rows[k + 1..].iter_mut() {
            row[k] = 0.0;
        }
    }
    // Rank check on the triangular diagonal.
    let scale = (0..ncols).map(|k| rows[k][k].abs()).fold(0.0f64, f64::max);
    for k in 0..ncols {
        if rows[k][k].abs() < RANK_TOL * scale {
            return None;
        }
    }
    // Back substitution.
    let mut x = vec![0.0; ncols];
    for k in (0..ncols).rev() {
        let mut acc = rows[k][3];
        for j in (k + 1)..ncols {
            acc -= rows[k][j] * x[j];
        }
        x[k] = acc / rows[k][k];
    }
    let sse: f64 = rows[ncols..].iter().map(|r| r[3] * r[3]).sum();
    Some((x, sse))
}

/// Solves the linear subproblem at a fixed break point. Points must be
/// sorted by distance and the candidate viable (two distinct near distances
/// and a non-empty far region).
fn solve_at(points: &[(f64, f64)], d0: f64, nonnegative_alpha: bool) -> Option<Solved> {
    let x0 = 10.0 * d0.log10();
    let rows: Vec<[f64; 4]> = points
        .iter()
        .map(|&(d, l)| {
            if d <= d0 {
                [10.0 * d.log10(), 1.0, 0.0, l]
            } else {
                [x0, 1.0, d - d0, l]
            }
        })
        .collect();
    let mut work = rows.clone();
    let (x, sse) = householder_lls(&mut work, 3)?;
    if nonnegative_alpha && x[2] < 0.0 {
        // Single active bound: pin alpha at zero and re-solve the two-column
        // problem, which is the exact constrained optimum.
        let mut reduced: Vec<[f64; 4]> =
            rows.iter().map(|r| [r[0], r[1], 0.0, r[3]]).collect();
        let (x2, sse2) = householder_lls(&mut reduced, 2)?;
        return Some(Solved { p: [x2[0], x2[1], 0.0], sse: sse2 });
    }
    Some(Solved { p: [x[0], x[1], x[2]], sse })
}

fn candidate_sse(points: &[(f64, f64)], d0: f64, nonnegative_alpha: bool) -> Option<Solved> {
    let r = classify(points, d0);
    if r.near_distinct < 2 || r.far_count == 0 {
        return None;
    }
    solve_at(points, d0, nonnegative_alpha)
}

/// Fits the four template parameters to (distance, loss) points.
///
/// The search profiles the break point: a deterministic candidate grid over
/// the admissible range, an exact linear solve per candidate, then a
/// golden-section polish around the best grid cell. Ties between candidates
/// with equal residuals go to the smaller break point. The output is
/// invariant under reordering of the input points.
pub fn fit_template(points: &[(f64, f64)], options: &FitOptions) -> Result<FitResult, FitError> {
    options.validate()?;
    if points.len() < 4 {
        return Err(FitError::TooFewPoints { needed: 4, got: points.len() });
    }
    for (i, &(d, l)) in points.iter().enumerate() {
        if !d.is_finite() || d <= 0.0 {
            return Err(FitError::InvalidDistance { index: i, value: d });
        }
        if !l.is_finite() {
            return Err(FitError::InvalidLoss { index: i, value: l });
        }
    }
    // Canonical order makes the fit bit-identical under input permutations.
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let distinct = classify(&pts, f64::INFINITY).near_distinct;
    if distinct < 2 {
        return Err(FitError::TooFewDistinctDistances { needed: 2, got: distinct });
    }

    let min_d = pts.first().expect("nonempty").0;
    let max_d = pts.last().expect("nonempty").0;
    let hi = options.d0_max_m.unwrap_or(max_d);
    // When a caller forces the grid below the observed range, keep the grid
    // non-empty so the viability scan (and its error) still runs.
    let lo = options.d0_min_m.unwrap_or_else(|| min_d.min(hi));
    if lo > hi {
        return Err(FitError::InvalidOptions(format!(
            "break-point grid is empty: lower bound {lo} m exceeds upper bound {hi} m"
        )));
    }

    let step = options.grid_step_m;
    // Anchor the grid phase on the hint so the hinted value is a candidate.
    let start = match options.d0_hint_m {
        Some(hint) => {
            let offset = (hint - lo).rem_euclid(step);
            let first = lo + offset;
            if first > hi {
                lo
            } else {
                first
            }
        }
        None => lo,
    };

    let mut trace: Vec<(f64, f64)> = Vec::new();
    let mut best: Option<(f64, Solved)> = None;
    let mut k = 0u32;
    loop {
        let d0 = start + f64::from(k) * step;
        if d0 > hi * (1.0 + 1e-15) && k > 0 {
            break;
        }
        let d0 = d0.min(hi);
        if let Some(sol) = candidate_sse(&pts, d0, options.nonnegative_alpha) {
            trace.push((d0, sol.sse));
            let better = match &best {
                None => true,
                Some((_, b)) => sol.sse < b.sse,
            };
            if better {
                best = Some((d0, sol));
            }
        }
        if d0 >= hi {
            break;
        }
        k += 1;
    }
    let (grid_d0, grid_sol) = best.ok_or(FitError::NoViableBreakpoint)?;

    // Golden-section polish within one grid step of the winning cell.
    let bracket_lo = (grid_d0 - step).max(lo);
    let bracket_hi = (grid_d0 + step).min(hi);
    let (mut d0_fit, mut sol) = (grid_d0, grid_sol);
    if bracket_hi - bracket_lo > options.refine_tol_m {
        if let Some((d, s)) = golden_section(
            &pts,
            bracket_lo,
            bracket_hi,
            options.refine_tol_m,
            options.nonnegative_alpha,
        ) {
            if s.sse < sol.sse {
                trace.push((d, s.sse));
                d0_fit = d;
                sol = s;
            }
        }
    }

    let regions = classify(&pts, d0_fit);
    if regions.far_distinct < 2 {
        // A single interpolated far distance leaves the residual flat in d0:
        // the break point (and slope) are not pinned down by the data.
        return Err(FitError::BreakpointNotIdentifiable {
            d0_m: d0_fit,
            far_distinct: regions.far_distinct,
        });
    }
    let [p1, p2, p3] = sol.p;
    if !p1.is_finite() || p1 <= 0.0 {
        return Err(FitError::DegenerateGamma { gamma: p1 });
    }
    let model = TemplateModel::new(p1, p2 / p1, d0_fit, p3)?;
    Ok(FitResult {
        model,
        sse_db2: sol.sse,
        near_count: regions.near_count,
        far_count: regions.far_count,
        d0_trace: trace,
    })
}

/// Minimizes the profiled residual over `[a, b]`; candidates that are not
/// viable evaluate to infinity. Ties prefer the left (smaller) break point.
fn golden_section(
    points: &[(f64, f64)],
    mut a: f64,
    mut b: f64,
    tol: f64,
    nonnegative_alpha: bool,
) -> Option<(f64, Solved)> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let eval = |d0: f64| -> (f64, Option<Solved>) {
        match candidate_sse(points, d0, nonnegative_alpha) {
            Some(s) => (s.sse, Some(s)),
            None => (f64::INFINITY, None),
        }
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut sc) = eval(c);
    let (mut fd, mut sd) = eval(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            sd = sc;
            c = b - INV_PHI * (b - a);
            (fc, sc) = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            sc = sd;
            d = a + INV_PHI * (b - a);
            (fd, sd) = eval(d);
        }
    }
    if fc <= fd {
        sc.map(|s| (c, s))
    } else {
        sd.map(|s| (d, s))
    }
}

/// Fits from the accumulated training set: by default one point per
/// (anchor, base station) key at its mean loss, matching the iterative
/// estimation procedure.
pub fn fit_from_training_set(
    ts: &TrainingSet,
    options: &FitOptions,
) -> Result<FitResult, FitError> {
    if ts.is_empty() {
        return Err(FitError::EmptyTrainingSet);
    }
    let points = if options.fit_on_means {
        ts.mean_points(options.bs_filter)
    } else {
        ts.raw_points(options.bs_filter)
    };
    fit_template(&points, options)
}

/// Residuals of a model against points: `residual_i = L(d_i) - l_i` and
/// their sum of squares.
pub fn evaluate_residuals(
    model: &TemplateModel,
    points: &[(f64, f64)],
) -> Result<(f64, Vec<f64>), ModelError> {
    let mut residuals = Vec::with_capacity(points.len());
    let mut sse = 0.0;
    for &(d, l) in points {
        let r = model.path_loss_db(d)? - l;
        residuals.push(r);
        sse += r * r;
    }
    Ok((sse, residuals))
}
