//! TOML config files mirroring the command flags. Flags win over file
//! values, file values win over defaults.

use std::path::Path;

use serde::Deserialize;

use tunnelfit_core::api::PlacementSpec;
use tunnelfit_core::estimator::{BaseStation, FitOptions};

use crate::CliError;

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Parse(format!("config {}: {e}", path.display())))
}

/// Scenario keys shared by `simulate` and `convergence` config files.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub d0: Option<f64>,
    pub alpha: Option<f64>,
    pub bs1_pos: Option<f64>,
    pub bs2_pos: Option<f64>,
    pub anchors: Option<Vec<f64>>,
    pub uniform_anchors: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub iterations: Option<u32>,
    pub seed: Option<u64>,
    pub tunnel_id: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub gamma: Option<f64>,
    pub c: Option<f64>,
    pub d0: Option<f64>,
    pub alpha: Option<f64>,
    pub bs1_pos: Option<f64>,
    pub bs2_pos: Option<f64>,
    pub noise_sigma: Option<f64>,
    pub iterations: Option<u32>,
    /// Placement strings, e.g. `"uniform:9"` or `"explicit:15,30,270,285"`.
    pub policies: Option<Vec<String>>,
    /// Either a range string like `"0..20"` or an explicit list.
    pub seeds: Option<SeedsConfig>,
    #[serde(flatten)]
    pub fit: FitConfig,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum SeedsConfig {
    Range(String),
    List(Vec<u64>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub grid_step: Option<f64>,
    pub refine_tol: Option<f64>,
    pub d0_min: Option<f64>,
    pub d0_max: Option<f64>,
    pub d0_hint: Option<f64>,
    pub alpha_nonneg: Option<bool>,
    pub raw: Option<bool>,
    pub bs: Option<String>,
    pub source: Option<String>,
}

pub fn parse_base_station(s: &str) -> Result<BaseStation, CliError> {
    match s {
        "bs1" | "1" => Ok(BaseStation::Bs1),
        "bs2" | "2" => Ok(BaseStation::Bs2),
        other => Err(CliError::Validation(format!(
            "base station must be bs1 or bs2, got '{other}'"
        ))),
    }
}

/// `uniform:N` or `explicit:p1,p2,...`.
pub fn parse_policy(s: &str) -> Result<PlacementSpec, CliError> {
    let (kind, rest) = s
        .split_once(':')
        .ok_or_else(|| CliError::Validation(format!("policy '{s}' must be uniform:N or explicit:p1,p2,...")))?;
    match kind {
        "uniform" => {
            let n: usize = rest.parse().map_err(|_| {
                CliError::Validation(format!("policy '{s}': '{rest}' is not an anchor count"))
            })?;
            Ok(PlacementSpec::Uniform(n))
        }
        "explicit" => {
            let positions: Result<Vec<f64>, _> =
                rest.split(',').map(|p| p.trim().parse::<f64>()).collect();
            let positions = positions.map_err(|_| {
                CliError::Validation(format!("policy '{s}': positions must be numbers"))
            })?;
            Ok(PlacementSpec::Explicit(positions))
        }
        other => Err(CliError::Validation(format!(
            "policy kind must be uniform or explicit, got '{other}'"
        ))),
    }
}

/// `"a..b"` (half-open), `"a..=b"`terminal, or a comma list.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = |why: &str| CliError::Validation(format!("seeds '{s}': {why}"));
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad("start is not an integer"))?,
            b.trim().parse().map_err(|_| bad("end is not an integer"))?,
        );
        if b < a {
            return Err(bad("end is before start"));
        }
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (
            a.trim().parse().map_err(|_| bad("start is not an integer"))?,
            b.trim().parse().map_err(|_| bad("end is not an integer"))?,
        );
        if b < a {
            return Err(bad("end is before start"));
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().map_err(|_| bad("entries must be integers")))
        .collect()
}

/// Assembles fit options: flag beats file beats default.
pub struct FitOverrides {
    pub grid_step: Option<f64>,
    pub refine_tol: Option<f64>,
    pub d0_min: Option<f64>,
    pub d0_max: Option<f64>,
    pub d0_hint: Option<f64>,
    pub alpha_nonneg: bool,
    pub raw: bool,
    pub bs: Option<String>,
}

pub fn fit_options(flags: &FitOverrides, file: &FitConfig) -> Result<FitOptions, CliError> {
    let mut options = FitOptions::default();
    if let Some(v) = flags.grid_step.or(file.grid_step) {
        options.grid_step_m = v;
    }
    if let Some(v) = flags.refine_tol.or(file.refine_tol) {
        options.refine_tol_m = v;
    }
    options.d0_min_m = flags.d0_min.or(file.d0_min);
    options.d0_max_m = flags.d0_max.or(file.d0_max);
    options.d0_hint_m = flags.d0_hint.or(file.d0_hint);
    options.nonnegative_alpha = flags.alpha_nonneg || file.alpha_nonneg.unwrap_or(false);
    options.fit_on_means = !(flags.raw || file.raw.unwrap_or(false));
    options.bs_filter = match flags.bs.as_deref().or(file.bs.as_deref()) {
        Some(s) => Some(parse_base_station(s)?),
        None => None,
    };
    Ok(options)
}
