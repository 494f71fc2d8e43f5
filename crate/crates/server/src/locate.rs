//! Turns a locate request's signal fields into a position report.

use tunnelfit_core::api::{LocateReport, SignalInput};
use tunnelfit_core::locator::{locate_one_bs, locate_two_bs, path_loss_from_rssi, PositionEstimate};
use tunnelfit_core::model::{ModelError, TemplateModel, TunnelGeometry};

use crate::error::ApiError;

/// Warning code attached when a single-station estimate lands outside the
/// known tunnel extent.
pub const WARN_OUTSIDE_SPAN: &str = "position-outside-span";

fn loss_from(
    label: &str,
    loss: Option<f64>,
    rssi: Option<f64>,
    signal: &SignalInput,
) -> Result<Option<f64>, ApiError> {
    match (loss, rssi) {
        (Some(_), Some(_)) => Err(ApiError::validation(format!(
            "give either a loss or an RSSI reading for {label}, not both"
        ))),
        (Some(l), None) => Ok(Some(l)),
        (None, Some(r)) => {
            let tx = signal.tx_power_dbm.ok_or_else(|| {
                ApiError::validation(format!(
                    "RSSI input for {label} needs tx_power_dbm; there is no implicit transmit power"
                ))
            })?;
            Ok(Some(path_loss_from_rssi(r, tx, signal.gains_db.unwrap_or(0.0))))
        }
        (None, None) => Ok(None),
    }
}

fn inversion_error(e: ModelError) -> ApiError {
    match e {
        ModelError::FlatFarRegion { .. } => ApiError::inversion(e),
        other => ApiError::validation(other),
    }
}

/// Resolves the request into two-station or single-station positioning and
/// runs it. Exactly one coherent signal combination must be present.
pub fn resolve_and_locate(
    model: &TemplateModel,
    bs1_pos_m: Option<f64>,
    bs2_pos_m: Option<f64>,
    signal: &SignalInput,
) -> Result<LocateReport, ApiError> {
    let l1 = loss_from("bs1", signal.loss_bs1_db, signal.rssi_bs1_dbm, signal)?;
    let l2 = loss_from("bs2", signal.loss_bs2_db, signal.rssi_bs2_dbm, signal)?;
    let single = loss_from("the single station", signal.loss_db, signal.rssi_dbm, signal)?;

    match (l1, l2, single) {
        (Some(l1), Some(l2), None) => {
            let (bs1, bs2) = match (bs1_pos_m, bs2_pos_m) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(ApiError::validation(
                        "two-station positioning needs bs1_pos_m and bs2_pos_m",
                    ))
                }
            };
            let geometry = TunnelGeometry::new(bs1, bs2, vec![])?;
            let est = locate_two_bs(model, &geometry, l1, l2).map_err(inversion_error)?;
            Ok(report(est, Vec::new()))
        }
        (None, None, Some(loss)) => {
            let bs_pos = signal.bs_pos_m.ok_or_else(|| {
                ApiError::validation("single-station positioning needs bs_pos_m")
            })?;
            let direction = signal.direction.ok_or_else(|| {
                ApiError::validation("single-station positioning needs a direction ('+' or '-')")
            })?;
            let est = locate_one_bs(model, bs_pos, direction, loss).map_err(inversion_error)?;
            let mut warnings = Vec::new();
            if let (Some(bs1), Some(bs2)) = (bs1_pos_m, bs2_pos_m) {
                if est.position_m < bs1 || est.position_m > bs2 {
                    warnings.push(WARN_OUTSIDE_SPAN.to_string());
                }
            }
            Ok(report(est, warnings))
        }
        (None, None, None) => Err(ApiError::validation(
            "no signal given: provide losses (or RSSI) for both stations, or one loss with \
             bs_pos_m and direction",
        )),
        _ => Err(ApiError::validation(
            "ambiguous signal: provide either both stations' losses or a single-station loss, \
             not a mixture",
        )),
    }
}

fn report(est: PositionEstimate, warnings: Vec<String>) -> LocateReport {
    LocateReport {
        position_m: est.position_m,
        d1_raw_m: est.d1_raw_m,
        d2_raw_m: est.d2_raw_m,
        d1_m: est.d1_m,
        d2_m: est.d2_m,
        normalized: est.normalized,
        warnings,
    }
}
