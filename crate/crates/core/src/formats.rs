//! File codecs: campaign CSV, model JSON and the trace/curve CSV emitters.
//!
//! All CSV output is UTF-8 with a header row, `.` as the decimal separator
//! and no locale dependence. Floats are written with the shortest
//! representation that round-trips, so write-then-read reproduces the
//! in-memory values bit for bit and identical inputs yield byte-identical
//! files.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{FitOptions, FitResult, TrainingSet};
use crate::model::{ModelError, TemplateModel, TunnelGeometry};
use crate::simulator::{ConvergenceTrace, EngagementRow};

/// Column header of a campaign file.
pub const CAMPAIGN_COLUMNS: &str = "anchor_pos,loss_bs1,loss_bs2,iteration";

/// Errors from parsing and validating files.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    #[error("line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("missing header `# {key}=...`")]
    MissingHeader { key: &'static str },
    #[error("line {line}, column {column} ({name}): {message}")]
    Cell { line: usize, column: usize, name: &'static str, message: String },
    #[error("line {line}: expected {expected} comma-separated fields, got {got}")]
    FieldCount { line: usize, expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Row { line: usize, message: String },
    #[error("invalid model file: {0}")]
    ModelJson(String),
    #[error("invalid range: {0}")]
    InvalidRange(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Coarse classification used for exit codes and HTTP statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatErrorKind {
    /// The bytes could not be decoded into rows/fields.
    Parse,
    /// The decoded values violate the schema's invariants.
    Validation,
}

impl FormatError {
    pub fn kind(&self) -> FormatErrorKind {
        match self {
            FormatError::Header { .. }
            | FormatError::MissingHeader { .. }
            | FormatError::Cell { .. }
            | FormatError::FieldCount { .. }
            | FormatError::ModelJson(_) => FormatErrorKind::Parse,
            FormatError::Row { .. } | FormatError::InvalidRange(_) | FormatError::Model(_) => {
                FormatErrorKind::Validation
            }
        }
    }
}

/// One measurement campaign: two base stations and engagement rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignFile {
    pub tunnel_id: String,
    pub bs1_pos_m: f64,
    pub bs2_pos_m: f64,
    pub rows: Vec<CampaignRow>,
}

/// One engagement: an anchor position with the loss each base station
/// measured during one passage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub anchor_pos_m: f64,
    pub loss_bs1_db: f64,
    pub loss_bs2_db: f64,
    pub iteration: u32,
}

impl CampaignFile {
    /// Assembles a campaign from simulator output.
    pub fn from_rows(
        tunnel_id: impl Into<String>,
        geometry: &TunnelGeometry,
        rows: &[EngagementRow],
    ) -> Self {
        CampaignFile {
            tunnel_id: tunnel_id.into(),
            bs1_pos_m: geometry.bs1_pos_m(),
            bs2_pos_m: geometry.bs2_pos_m(),
            rows: rows
                .iter()
                .map(|r| CampaignRow {
                    anchor_pos_m: geometry.anchors_m()[r.anchor_index],
                    loss_bs1_db: r.loss_bs1_db,
                    loss_bs2_db: r.loss_bs2_db,
                    iteration: r.iteration,
                })
                .collect(),
        }
    }

    /// Serializes to the campaign CSV dialect:
    ///
    /// ```text
    /// # tunnel=<id>
    /// # bs1_pos=<m>
    /// # bs2_pos=<m>
    /// anchor_pos,loss_bs1,loss_bs2,iteration
    /// 15,63.72182518111363,121.17940008672038,0
    /// ```
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tunnel={}", self.tunnel_id);
        let _ = writeln!(out, "# bs1_pos={}", self.bs1_pos_m);
        let _ = writeln!(out, "# bs2_pos={}", self.bs2_pos_m);
        let _ = writeln!(out, "{CAMPAIGN_COLUMNS}");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                row.anchor_pos_m, row.loss_bs1_db, row.loss_bs2_db, row.iteration
            );
        }
        out
    }

    /// Parses and validates a campaign file, reporting the offending line
    /// (and column for cell errors). Unknown `#` lines are ignored as
    /// comments.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut tunnel_id: Option<String> = None;
        let mut bs1_pos: Option<f64> = None;
        let mut bs2_pos: Option<f64> = None;
        let mut rows = Vec::new();
        let mut saw_columns = false;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some((key, value)) = rest.split_once('=') {
                    let (key, value) = (key.trim(), value.trim());
                    match key {
                        "tunnel" => tunnel_id = Some(value.to_string()),
                        "bs1_pos" => {
                            bs1_pos = Some(parse_header_float(line_no, "bs1_pos", value)?)
                        }
                        "bs2_pos" => {
                            bs2_pos = Some(parse_header_float(line_no, "bs2_pos", value)?)
                        }
                        _ => {} // free-form comment
                    }
                }
                continue;
            }
            if !saw_columns {
                if line != CAMPAIGN_COLUMNS {
                    return Err(FormatError::Header {
                        line: line_no,
                        message: format!(
                            "expected column header `{CAMPAIGN_COLUMNS}`, got `{line}`"
                        ),
                    });
                }
                saw_columns = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(FormatError::FieldCount {
                    line: line_no,
                    expected: 4,
                    got: fields.len(),
                });
            }
            let anchor_pos_m = parse_cell_float(line_no, 1, "anchor_pos", fields[0])?;
            let loss_bs1_db = parse_cell_float(line_no, 2, "loss_bs1", fields[1])?;
            let loss_bs2_db = parse_cell_float(line_no, 3, "loss_bs2", fields[2])?;
            let iteration: u32 = fields[3].trim().parse().map_err(|e| FormatError::Cell {
                line: line_no,
                column: 4,
                name: "iteration",
                message: format!("{e}"),
            })?;
            let (bs1, bs2) = match (bs1_pos, bs2_pos) {
                (Some(a), Some(b)) => (a, b),
                (None, _) => return Err(FormatError::MissingHeader { key: "bs1_pos" }),
                (_, None) => return Err(FormatError::MissingHeader { key: "bs2_pos" }),
            };
            if bs2 <= bs1 {
                return Err(FormatError::Row {
                    line: line_no,
                    message: format!("bs2_pos ({bs2}) must exceed bs1_pos ({bs1})"),
                });
            }
            if !(anchor_pos_m > bs1 && anchor_pos_m < bs2) {
                return Err(FormatError::Row {
                    line: line_no,
                    message: format!(
                        "anchor_pos {anchor_pos_m} is not strictly between the base stations \
                         ({bs1}, {bs2})"
                    ),
                });
            }
            rows.push(CampaignRow { anchor_pos_m, loss_bs1_db, loss_bs2_db, iteration });
        }

        let tunnel_id = tunnel_id.ok_or(FormatError::MissingHeader { key: "tunnel" })?;
        let bs1_pos_m = bs1_pos.ok_or(FormatError::MissingHeader { key: "bs1_pos" })?;
        let bs2_pos_m = bs2_pos.ok_or(FormatError::MissingHeader { key: "bs2_pos" })?;
        if bs2_pos_m <= bs1_pos_m {
            return Err(FormatError::Header {
                line: 1,
                message: format!("bs2_pos ({bs2_pos_m}) must exceed bs1_pos ({bs1_pos_m})"),
            });
        }
        if !saw_columns {
            return Err(FormatError::Header {
                line: text.lines().count().max(1),
                message: format!("missing column header `{CAMPAIGN_COLUMNS}`"),
            });
        }
        Ok(CampaignFile { tunnel_id, bs1_pos_m, bs2_pos_m, rows })
    }

    /// The campaign's geometry: base stations plus the distinct anchor
    /// positions in increasing order.
    pub fn geometry(&self) -> Result<TunnelGeometry, ModelError> {
        let mut anchors: Vec<f64> = self.rows.iter().map(|r| r.anchor_pos_m).collect();
        anchors.sort_by(f64::total_cmp);
        anchors.dedup();
        TunnelGeometry::new(self.bs1_pos_m, self.bs2_pos_m, anchors)
    }

    /// Ingests the rows into a training set, deriving each row's two
    /// distances from the anchor position and the base-station coordinates.
    pub fn to_training_set(&self) -> Result<(TunnelGeometry, TrainingSet), FormatError> {
        let geometry = self.geometry()?;
        let mut training = TrainingSet::new();
        for row in &self.rows {
            let index = geometry
                .anchors_m()
                .binary_search_by(|a| a.total_cmp(&row.anchor_pos_m))
                .expect("every row position is in the geometry");
            training
                .record_engagement(
                    &geometry,
                    index,
                    row.loss_bs1_db,
                    row.loss_bs2_db,
                    row.iteration,
                )
                .map_err(|e| FormatError::Row { line: 0, message: e.to_string() })?;
        }
        Ok((geometry, training))
    }
}

fn parse_header_float(line: usize, name: &'static str, value: &str) -> Result<f64, FormatError> {
    let v: f64 = value.parse().map_err(|e| FormatError::Header {
        line,
        message: format!("{name}: {e}"),
    })?;
    if !v.is_finite() {
        return Err(FormatError::Header { line, message: format!("{name} must be finite, got {v}") });
    }
    Ok(v)
}

fn parse_cell_float(
    line: usize,
    column: usize,
    name: &'static str,
    value: &str,
) -> Result<f64, FormatError> {
    let v: f64 = value
        .trim()
        .parse()
        .map_err(|e| FormatError::Cell { line, column, name, message: format!("{e}") })?;
    if !v.is_finite() {
        return Err(FormatError::Cell {
            line,
            column,
            name,
            message: format!("must be finite, got {v}"),
        });
    }
    Ok(v)
}

/// A fitted model with its provenance, as persisted to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub gamma: f64,
    pub c: f64,
    pub d0_m: f64,
    pub alpha_db_per_m: f64,
    pub sse_db2: f64,
    pub provenance: Provenance,
}

/// Where a fitted model came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Campaign or scenario that produced the training data.
    pub source: String,
    pub fit_options: FitOptions,
    pub point_count: usize,
    pub near_count: usize,
    pub far_count: usize,
    /// RFC 3339 timestamp; writers honor `SOURCE_DATE_EPOCH` for
    /// reproducible output.
    pub created_at: String,
}

impl ModelFile {
    pub fn from_fit(
        fit: &FitResult,
        source: impl Into<String>,
        options: &FitOptions,
        created_at: impl Into<String>,
    ) -> Self {
        ModelFile {
            gamma: fit.model.gamma(),
            c: fit.model.c(),
            d0_m: fit.model.d0_m(),
            alpha_db_per_m: fit.model.alpha_db_per_m(),
            sse_db2: fit.sse_db2,
            provenance: Provenance {
                source: source.into(),
                fit_options: *options,
                point_count: fit.near_count + fit.far_count,
                near_count: fit.near_count,
                far_count: fit.far_count,
                created_at: created_at.into(),
            },
        }
    }

    /// Pretty JSON with stable key order.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Parses and validates: the parameters must form a legal model.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| FormatError::ModelJson(e.to_string()))?;
        file.model()?;
        Ok(file)
    }

    /// The model the file describes, re-validated.
    pub fn model(&self) -> Result<TemplateModel, ModelError> {
        TemplateModel::new(self.gamma, self.c, self.d0_m, self.alpha_db_per_m)
    }
}

/// Trace CSV: one row per (policy, seed, iteration), sorted by policy (in
/// first-appearance order), then seed, then iteration. Failed fits repeat
/// the most recent successful parameters with an empty-handed `sse_db2` of
/// `NaN`; leading failures emit `NaN` parameters.
pub fn write_trace_csv(traces: &[ConvergenceTrace]) -> String {
    let mut order: Vec<&str> = Vec::new();
    for t in traces {
        if !order.contains(&t.policy_label.as_str()) {
            order.push(&t.policy_label);
        }
    }
    let mut sorted: Vec<&ConvergenceTrace> = traces.iter().collect();
    sorted.sort_by_key(|t| {
        (
            order.iter().position(|l| *l == t.policy_label).expect("label collected"),
            t.seed,
        )
    });

    let mut out = String::from("policy,seed,iteration,gamma,c,d0_m,alpha_db_per_m,sse_db2\n");
    for trace in sorted {
        let mut carried: Option<TemplateModel> = None;
        for record in &trace.per_iteration {
            let (model, sse) = match &record.fit {
                Some(fit) => {
                    carried = Some(fit.model);
                    (Some(fit.model), fit.sse_db2)
                }
                None => (carried, f64::NAN),
            };
            match model {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        trace.policy_label,
                        trace.seed,
                        record.iteration,
                        m.gamma(),
                        m.c(),
                        m.d0_m(),
                        m.alpha_db_per_m(),
                        sse
                    );
                }
                None => {
                    let _ = writeln!(
                        out,
                        "{},{},{},NaN,NaN,NaN,NaN,NaN",
                        trace.policy_label, trace.seed, record.iteration
                    );
                }
            }
        }
    }
    out
}

/// Curve CSV: the model tabulated over `[start, end]` at `step`, for
/// external plotting against measurements.
pub fn write_curve_csv(
    model: &TemplateModel,
    start_m: f64,
    end_m: f64,
    step_m: f64,
) -> Result<String, FormatError> {
    if !(start_m > 0.0) || !start_m.is_finite() {
        return Err(FormatError::InvalidRange(format!(
            "start must be positive, got {start_m} m"
        )));
    }
    if !(end_m >= start_m) || !end_m.is_finite() {
        return Err(FormatError::InvalidRange(format!(
            "end ({end_m} m) must be at least start ({start_m} m)"
        )));
    }
    if !(step_m > 0.0) || !step_m.is_finite() {
        return Err(FormatError::InvalidRange(format!(
            "step must be positive, got {step_m} m"
        )));
    }
    let mut out = String::from("distance_m,loss_db\n");
    let mut k = 0u64;
    loop {
        let d = start_m + k as f64 * step_m;
        if d > end_m * (1.0 + 1e-12) {
            break;
        }
        let d = d.min(end_m);
        let loss = model.path_loss_db(d)?;
        let _ = writeln!(out, "{d},{loss}");
        if d >= end_m {
            break;
        }
        k += 1;
    }
    Ok(out)
}
