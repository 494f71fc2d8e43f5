//! The two-piece path-loss template and the tunnel geometry it lives in.
//!
//! The template joins a free-space-like near region to a linear far region
//! at the break point `d0`:
//!
//! ```text
//! L(d) = gamma * (10*log10(d) + C)    when d <= d0   (near)
//! L(d) = L0 + alpha * (d - d0)        otherwise      (far)
//! L0   = gamma * (10*log10(d0) + C)
//! ```
//!
//! Distances and positions are scalar coordinates on the tunnel axis in
//! meters, losses are in dB. All types are immutable values and all
//! operations are pure functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from model construction, evaluation and geometry validation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("path loss exponent must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("break point must be positive and finite, got {0} m")]
    InvalidBreakPoint(f64),
    #[error("model parameter `{name}` must be finite, got {value}")]
    NonFiniteParameter { name: &'static str, value: f64 },
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("path loss must be finite, got {0} dB")]
    NonFiniteLoss(f64),
    #[error("far region is flat (alpha = 0), losses above {l0_db} dB cannot be inverted")]
    FlatFarRegion { l0_db: f64 },
    #[error("wavelength must be positive, got {0} m")]
    NonPositiveWavelength(f64),
    #[error("antenna height must be non-negative and finite, got {0} m")]
    InvalidHeight(f64),
    #[error("base station 2 must lie beyond base station 1, got {bs1_m} m and {bs2_m} m")]
    BaseStationsOutOfOrder { bs1_m: f64, bs2_m: f64 },
    #[error("anchor at {pos_m} m is not strictly between the base stations ({bs1_m} m, {bs2_m} m)")]
    AnchorOutsideSpan { pos_m: f64, bs1_m: f64, bs2_m: f64 },
    #[error("anchor positions must be strictly increasing, got {prev_m} m followed by {next_m} m")]
    AnchorsNotIncreasing { prev_m: f64, next_m: f64 },
    #[error("normalization span must be positive, got {0} m")]
    NonPositiveSpan(f64),
}

/// The four fitted parameters of the two-piece template.
///
/// Invariants enforced at construction (and on deserialization): `gamma > 0`,
/// `d0 > 0`, and every parameter finite. The break-point loss `L0` is always
/// derived from the other parameters so the curve is continuous at `d0` by
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateModelRepr", into = "TemplateModelRepr")]
pub struct TemplateModel {
    gamma: f64,
    c: f64,
    d0_m: f64,
    alpha_db_per_m: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct TemplateModelRepr {
    gamma: f64,
    c: f64,
    d0_m: f64,
    alpha_db_per_m: f64,
}

impl TryFrom<TemplateModelRepr> for TemplateModel {
    type Error = ModelError;
    fn try_from(r: TemplateModelRepr) -> Result<Self, Self::Error> {
        TemplateModel::new(r.gamma, r.c, r.d0_m, r.alpha_db_per_m)
    }
}

impl From<TemplateModel> for TemplateModelRepr {
    fn from(m: TemplateModel) -> Self {
        TemplateModelRepr {
            gamma: m.gamma,
            c: m.c,
            d0_m: m.d0_m,
            alpha_db_per_m: m.alpha_db_per_m,
        }
    }
}

impl TemplateModel {
    pub fn new(gamma: f64, c: f64, d0_m: f64, alpha_db_per_m: f64) -> Result<Self, ModelError> {
        if !gamma.is_finite() || gamma <= 0.0 {
            return Err(ModelError::NonPositiveGamma(gamma));
        }
        if !c.is_finite() {
            return Err(ModelError::NonFiniteParameter { name: "c", value: c });
        }
        if !d0_m.is_finite() || d0_m <= 0.0 {
            return Err(ModelError::InvalidBreakPoint(d0_m));
        }
        if !alpha_db_per_m.is_finite() {
            return Err(ModelError::NonFiniteParameter {
                name: "alpha_db_per_m",
                value: alpha_db_per_m,
            });
        }
        Ok(TemplateModel { gamma, c, d0_m, alpha_db_per_m })
    }

    /// Path loss exponent of the near region.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Additive constant applied to `10*log10(d)` before the exponent.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Break point between the near and far regions, meters.
    pub fn d0_m(&self) -> f64 {
        self.d0_m
    }

    /// Far-region slope, dB per meter.
    pub fn alpha_db_per_m(&self) -> f64 {
        self.alpha_db_per_m
    }

    /// Loss at the break point, `gamma * (10*log10(d0) + C)`.
    pub fn l0_db(&self) -> f64 {
        self.gamma * (10.0 * self.d0_m.log10() + self.c)
    }

    /// Evaluates the template at `distance_m`.
    ///
    /// Distances must be strictly positive; there is no clamping, callers are
    /// responsible for excluding zero-distance samples.
    pub fn path_loss_db(&self, distance_m: f64) -> Result<f64, ModelError> {
        if !distance_m.is_finite() || distance_m <= 0.0 {
            return Err(ModelError::NonPositiveDistance(distance_m));
        }
        if distance_m <= self.d0_m {
            Ok(self.gamma * (10.0 * distance_m.log10() + self.c))
        } else {
            Ok(self.l0_db() + self.alpha_db_per_m * (distance_m - self.d0_m))
        }
    }

    /// Inverts the template: the distance at which the model predicts
    /// `loss_db`.
    ///
    /// Losses at or below the break-point loss invert through the near
    /// region, `d = 10^((L/gamma - C)/10)`; larger losses invert through the
    /// far line. A flat far region (`alpha = 0`) cannot be inverted above the
    /// break-point loss.
    pub fn invert_distance_m(&self, loss_db: f64) -> Result<f64, ModelError> {
        if !loss_db.is_finite() {
            return Err(ModelError::NonFiniteLoss(loss_db));
        }
        let l0 = self.l0_db();
        if loss_db <= l0 {
            Ok(10f64.powf((loss_db / self.gamma - self.c) / 10.0))
        } else if self.alpha_db_per_m == 0.0 {
            Err(ModelError::FlatFarRegion { l0_db: l0 })
        } else {
            Ok(self.d0_m + (loss_db - l0) / self.alpha_db_per_m)
        }
    }
}

/// First-Fresnel-zone inputs used to estimate a break point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FresnelParamsRepr", into = "FresnelParamsRepr")]
pub struct FresnelParams {
    h_r_m: f64,
    h_t_m: f64,
    lambda_m: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct FresnelParamsRepr {
    h_r_m: f64,
    h_t_m: f64,
    lambda_m: f64,
}

impl TryFrom<FresnelParamsRepr> for FresnelParams {
    type Error = ModelError;
    fn try_from(r: FresnelParamsRepr) -> Result<Self, Self::Error> {
        FresnelParams::new(r.h_r_m, r.h_t_m, r.lambda_m)
    }
}

impl From<FresnelParams> for FresnelParamsRepr {
    fn from(p: FresnelParams) -> Self {
        FresnelParamsRepr { h_r_m: p.h_r_m, h_t_m: p.h_t_m, lambda_m: p.lambda_m }
    }
}

impl FresnelParams {
    pub fn new(h_r_m: f64, h_t_m: f64, lambda_m: f64) -> Result<Self, ModelError> {
        if !h_r_m.is_finite() || h_r_m < 0.0 {
            return Err(ModelError::InvalidHeight(h_r_m));
        }
        if !h_t_m.is_finite() || h_t_m < 0.0 {
            return Err(ModelError::InvalidHeight(h_t_m));
        }
        if !lambda_m.is_finite() || lambda_m <= 0.0 {
            return Err(ModelError::NonPositiveWavelength(lambda_m));
        }
        Ok(FresnelParams { h_r_m, h_t_m, lambda_m })
    }

    pub fn h_r_m(&self) -> f64 {
        self.h_r_m
    }

    pub fn h_t_m(&self) -> f64 {
        self.h_t_m
    }

    pub fn lambda_m(&self) -> f64 {
        self.lambda_m
    }

    /// Distance where the first Fresnel zone clears the ground,
    /// `4 * h_r * h_t / lambda`.
    pub fn break_point_m(&self) -> f64 {
        4.0 * self.h_r_m * self.h_t_m / self.lambda_m
    }
}

/// Two base stations and the anchor points between them, all on one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TunnelGeometryRepr", into = "TunnelGeometryRepr")]
pub struct TunnelGeometry {
    bs1_pos_m: f64,
    bs2_pos_m: f64,
    anchors_m: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TunnelGeometryRepr {
    bs1_pos_m: f64,
    bs2_pos_m: f64,
    anchors_m: Vec<f64>,
}

impl TryFrom<TunnelGeometryRepr> for TunnelGeometry {
    type Error = ModelError;
    fn try_from(r: TunnelGeometryRepr) -> Result<Self, Self::Error> {
        TunnelGeometry::new(r.bs1_pos_m, r.bs2_pos_m, r.anchors_m)
    }
}

impl From<TunnelGeometry> for TunnelGeometryRepr {
    fn from(g: TunnelGeometry) -> Self {
        TunnelGeometryRepr {
            bs1_pos_m: g.bs1_pos_m,
            bs2_pos_m: g.bs2_pos_m,
            anchors_m: g.anchors_m,
        }
    }
}

impl TunnelGeometry {
    /// Validates that the base stations are ordered, and that anchors are
    /// strictly increasing and strictly inside the span. An empty anchor list
    /// is allowed (anchors can be placed later).
    pub fn new(bs1_pos_m: f64, bs2_pos_m: f64, anchors_m: Vec<f64>) -> Result<Self, ModelError> {
        if !bs1_pos_m.is_finite() || !bs2_pos_m.is_finite() || bs2_pos_m <= bs1_pos_m {
            return Err(ModelError::BaseStationsOutOfOrder { bs1_m: bs1_pos_m, bs2_m: bs2_pos_m });
        }
        let mut prev: Option<f64> = None;
        for &pos in &anchors_m {
            if !pos.is_finite() || pos <= bs1_pos_m || pos >= bs2_pos_m {
                return Err(ModelError::AnchorOutsideSpan {
                    pos_m: pos,
                    bs1_m: bs1_pos_m,
                    bs2_m: bs2_pos_m,
                });
            }
            if let Some(p) = prev {
                if pos <= p {
                    return Err(ModelError::AnchorsNotIncreasing { prev_m: p, next_m: pos });
                }
            }
            prev = Some(pos);
        }
        Ok(TunnelGeometry { bs1_pos_m, bs2_pos_m, anchors_m })
    }

    pub fn bs1_pos_m(&self) -> f64 {
        self.bs1_pos_m
    }

    pub fn bs2_pos_m(&self) -> f64 {
        self.bs2_pos_m
    }

    /// Inter-base-station distance `D`.
    pub fn span_m(&self) -> f64 {
        self.bs2_pos_m - self.bs1_pos_m
    }

    pub fn anchors_m(&self) -> &[f64] {
        &self.anchors_m
    }

    pub fn anchor_count(&self) -> usize {
        self.anchors_m.len()
    }

    /// Distance from anchor `index` to base station 1.
    pub fn distance_to_bs1_m(&self, index: usize) -> Option<f64> {
        self.anchors_m.get(index).map(|&p| p - self.bs1_pos_m)
    }

    /// Distance from anchor `index` to base station 2.
    pub fn distance_to_bs2_m(&self, index: usize) -> Option<f64> {
        self.anchors_m.get(index).map(|&p| self.bs2_pos_m - p)
    }

    /// Same base stations, different anchors.
    pub fn with_anchors(&self, anchors_m: Vec<f64>) -> Result<Self, ModelError> {
        TunnelGeometry::new(self.bs1_pos_m, self.bs2_pos_m, anchors_m)
    }
}

/// Rescales a pair of distance estimates so they sum to the known span.
///
/// Returns `(span*d1/(d1+d2), span*d2/(d1+d2))`. When `d1 + d2` already
/// equals the span exactly the inputs are returned unchanged. The products
/// and divisions are compensated with exact FMA arithmetic so the outputs
/// sum to the span within one unit in the last place while preserving the
/// `d1:d2` ratio to rounding.
pub fn normalize_pair(d1_m: f64, d2_m: f64, span_m: f64) -> Result<(f64, f64), ModelError> {
    if !d1_m.is_finite() || d1_m <= 0.0 {
        return Err(ModelError::NonPositiveDistance(d1_m));
    }
    if !d2_m.is_finite() || d2_m <= 0.0 {
        return Err(ModelError::NonPositiveDistance(d2_m));
    }
    if !span_m.is_finite() || span_m <= 0.0 {
        return Err(ModelError::NonPositiveSpan(span_m));
    }
    let (sum_hi, sum_lo) = two_sum(d1_m, d2_m);
    if sum_hi == span_m && sum_lo == 0.0 {
        return Ok((d1_m, d2_m));
    }
    let (p1_hi, p1_lo) = two_prod(span_m, d1_m);
    let (p2_hi, p2_lo) = two_prod(span_m, d2_m);
    Ok((
        dd_div(p1_hi, p1_lo, sum_hi, sum_lo),
        dd_div(p2_hi, p2_lo, sum_hi, sum_lo),
    ))
}

/// Error-free sum: `a + b = hi + lo` exactly.
#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let hi = a + b;
    let a_virtual = hi - b;
    let b_virtual = hi - a_virtual;
    let lo = (a - a_virtual) + (b - b_virtual);
    (hi, lo)
}

/// Error-free product via FMA: `a * b = hi + lo` exactly.
#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let hi = a * b;
    let lo = a.mul_add(b, -hi);
    (hi, lo)
}

/// `(p_hi + p_lo) / (s_hi + s_lo)` with one Newton correction.
#[inline]
fn dd_div(p_hi: f64, p_lo: f64, s_hi: f64, s_lo: f64) -> f64 {
    let q = p_hi / s_hi;
    let (t, e) = two_prod(q, s_hi);
    let remainder = ((p_hi - t) - e) + p_lo - q * s_lo;
    q + remainder / s_hi
}
