//! Operating phase: converts measured losses into a position on the tunnel
//! axis through the fitted template.
//!
//! With both base stations audible the two inverted distances are rescaled
//! so they sum to the known inter-station distance; with a single station
//! the raw inverted distance is applied along the given direction and no
//! normalization is possible.

use serde::{Deserialize, Serialize};

use crate::model::{normalize_pair, ModelError, TemplateModel, TunnelGeometry};

/// Which way a single-station estimate extends from the base station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(&self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "+" | "positive" | "pos" => Ok(Direction::Positive),
            "-" | "negative" | "neg" => Ok(Direction::Negative),
            other => Err(format!("expected '+' or '-', got '{other}'")),
        }
    }
}

/// A position on the tunnel axis with the distances that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub position_m: f64,
    /// Distance to base station 1 as inverted from the loss.
    pub d1_raw_m: f64,
    /// Distance to base station 2 as inverted from the loss; absent in
    /// single-station mode.
    pub d2_raw_m: Option<f64>,
    /// Distance to base station 1 after normalization (equals the raw value
    /// when normalization was skipped or not applicable).
    pub d1_m: f64,
    pub d2_m: Option<f64>,
    /// Whether the pair was rescaled to sum to the inter-station distance.
    pub normalized: bool,
}

/// Positions an object audible at both base stations. The inverted
/// distances are normalized onto the inter-station span whenever their sum
/// disagrees with it, so the reported position always lies between the
/// stations.
pub fn locate_two_bs(
    model: &TemplateModel,
    geometry: &TunnelGeometry,
    loss_bs1_db: f64,
    loss_bs2_db: f64,
) -> Result<PositionEstimate, ModelError> {
    let d1_raw = model.invert_distance_m(loss_bs1_db)?;
    let d2_raw = model.invert_distance_m(loss_bs2_db)?;
    let span = geometry.span_m();
    let (d1, d2, normalized) = if d1_raw + d2_raw == span {
        (d1_raw, d2_raw, false)
    } else {
        let (n1, n2) = normalize_pair(d1_raw, d2_raw, span)?;
        (n1, n2, true)
    };
    Ok(PositionEstimate {
        position_m: geometry.bs1_pos_m() + d1,
        d1_raw_m: d1_raw,
        d2_raw_m: Some(d2_raw),
        d1_m: d1,
        d2_m: Some(d2),
        normalized,
    })
}

/// Positions an object audible at a single base station: the inverted
/// distance applied along `direction`. The estimate is not constrained to
/// any span; callers that know the tunnel extent should range-check it.
pub fn locate_one_bs(
    model: &TemplateModel,
    bs_pos_m: f64,
    direction: Direction,
    loss_db: f64,
) -> Result<PositionEstimate, ModelError> {
    let d = model.invert_distance_m(loss_db)?;
    Ok(PositionEstimate {
        position_m: bs_pos_m + direction.sign() * d,
        d1_raw_m: d,
        d2_raw_m: None,
        d1_m: d,
        d2_m: None,
        normalized: false,
    })
}

/// Link-budget conversion from a received signal strength reading to a path
/// loss: `loss = tx_power + gains - rssi`.
pub fn path_loss_from_rssi(rssi_dbm: f64, tx_power_dbm: f64, gains_db: f64) -> f64 {
    tx_power_dbm + gains_db - rssi_dbm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_model() -> TemplateModel {
        TemplateModel::new(2.0, 20.1, 50.0, 0.2).unwrap()
    }

    fn geometry() -> TunnelGeometry {
        TunnelGeometry::new(0.0, 300.0, vec![]).unwrap()
    }

    #[test]
    fn two_bs_round_trip_at_100m() {
        let m = reference_model();
        let l1 = m.path_loss_db(100.0).unwrap();
        let l2 = m.path_loss_db(200.0).unwrap();
        assert!((l1 - 84.17940008672038).abs() < 1e-9);
        assert!((l2 - 104.17940008672038).abs() < 1e-9);
        let est = locate_two_bs(&m, &geometry(), l1, l2).unwrap();
        assert!((est.position_m - 100.0).abs() < 1e-6, "position {}", est.position_m);
        let sum = est.d1_m + est.d2_m.unwrap();
        assert!((sum - 300.0).abs() <= 300.0 * f64::EPSILON, "sum {sum}");
    }

    #[test]
    fn equal_losses_give_midpoint() {
        let m = reference_model();
        let l = m.path_loss_db(120.0).unwrap();
        let est = locate_two_bs(&m, &geometry(), l, l).unwrap();
        assert!((est.position_m - 150.0).abs() < 1e-9);
    }

    #[test]
    fn overshooting_distances_normalize_by_ratio() {
        // Losses chosen so the inverted distances are 30 m and 90 m against
        // a span of 80 m: 1:3 ratio rescales to (20, 60).
        let m = reference_model();
        let g = TunnelGeometry::new(0.0, 80.0, vec![]).unwrap();
        let l1 = m.path_loss_db(30.0).unwrap();
        let l2 = m.path_loss_db(90.0).unwrap();
        let est = locate_two_bs(&m, &g, l1, l2).unwrap();
        assert!(est.normalized);
        assert!((est.d1_m - 20.0).abs() < 1e-9, "d1 {}", est.d1_m);
        assert!((est.d2_m.unwrap() - 60.0).abs() < 1e-9);
        assert!((est.position_m - 20.0).abs() < 1e-9);
        assert!((est.d1_raw_m - 30.0).abs() < 1e-9);
    }

    #[test]
    fn one_bs_near_branch() {
        let m = reference_model();
        let est = locate_one_bs(&m, 0.0, Direction::Positive, 60.2).unwrap();
        assert!((est.position_m - 10.0).abs() < 1e-9);
        assert!(!est.normalized);
        assert!(est.d2_m.is_none());
    }

    #[test]
    fn one_bs_break_point_and_far_branch() {
        let m = reference_model();
        let at_break = locate_one_bs(&m, 0.0, Direction::Positive, m.l0_db()).unwrap();
        assert!((at_break.position_m - 50.0).abs() < 1e-9);
        let far = locate_one_bs(&m, 0.0, Direction::Positive, 124.17940008672038).unwrap();
        assert!((far.position_m - 300.0).abs() < 1e-9);
        let behind = locate_one_bs(&m, 300.0, Direction::Negative, 124.17940008672038).unwrap();
        assert!((behind.position_m - 0.0).abs() < 1e-9);
    }

    #[test]
    fn inversion_errors_propagate() {
        let flat = TemplateModel::new(2.0, 20.1, 50.0, 0.0).unwrap();
        assert!(locate_two_bs(&flat, &geometry(), 100.0, 60.0).is_err());
        assert!(locate_one_bs(&flat, 0.0, Direction::Positive, 100.0).is_err());
        let m = reference_model();
        assert!(locate_two_bs(&m, &geometry(), f64::NAN, 60.0).is_err());
    }

    #[test]
    fn rssi_conversion() {
        assert_eq!(path_loss_from_rssi(-60.0, 15.0, 0.0), 75.0);
        assert_eq!(path_loss_from_rssi(15.0, 15.0, 0.0), 0.0);
        assert_eq!(path_loss_from_rssi(-90.0, 20.0, 4.0), 114.0);
    }
}
