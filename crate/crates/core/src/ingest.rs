//! Detection-record ingestion: JSONL parsing, the 1D baseline coordinate of
//! each bounding box, and lane-marking intercepts on the horizontal baseline.
//!
//! Wire schema (one JSON object per line):
//! `{"frame_index": int, "timestamp_s": float, "boxes": [[u_tl,v_tl,u_br,v_br],...],
//!   "left_marking": [[u,v],...], "right_marking": [[u,v],...]}`

use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of marking points (nearest in v to the baseline) used per line fit.
pub const INTERCEPT_NEIGHBORS: usize = 6;

/// How far beyond the fitted v-range the intercept may be extrapolated.
pub const MAX_EXTRAPOLATION_PX: f64 = 50.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed JSON: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing or invalid field `{field}`")]
    Schema { line: usize, field: String },
    #[error("line {line}: box has non-positive extent: [{u_tl}, {v_tl}, {u_br}, {v_br}]")]
    InvalidBox {
        line: usize,
        u_tl: f64,
        v_tl: f64,
        u_br: f64,
        v_br: f64,
    },
    #[error("duplicate frame_index {frame_index}")]
    DuplicateFrame { frame_index: i64 },
    #[error("marking has {got} points, need at least {needed} for an intercept")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("baseline row {v_base} is {distance:.1} px beyond the fitted marking range")]
    ExtrapolationTooFar { v_base: f64, distance: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Axis-aligned bounding box in pixels. Serialized as `[u_tl, v_tl, u_br, v_br]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "[f64; 4]", try_from = "[f64; 4]")]
pub struct BoundingBox {
    pub u_tl: f64,
    pub v_tl: f64,
    pub u_br: f64,
    pub v_br: f64,
}

impl BoundingBox {
    pub fn new(u_tl: f64, v_tl: f64, u_br: f64, v_br: f64) -> Option<Self> {
        if u_tl < u_br && v_tl < v_br {
            Some(Self { u_tl, v_tl, u_br, v_br })
        } else {
            None
        }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.u_tl, b.v_tl, b.u_br, b.v_br]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = String;

    fn try_from(v: [f64; 4]) -> Result<Self, String> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
            .ok_or_else(|| format!("box corners out of order: {v:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MarkingSide {
    Left,
    Right,
}

/// Pixel points along one lane marking.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkingPoints {
    pub side: MarkingSide,
    pub points: Vec<[f64; 2]>,
}

/// One frame of tracking-by-detection output.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    pub frame_index: i64,
    pub timestamp_s: f64,
    pub boxes: Vec<BoundingBox>,
    pub left_marking: MarkingPoints,
    pub right_marking: MarkingPoints,
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    frame_index: i64,
    timestamp_s: f64,
    boxes: Vec<[f64; 4]>,
    left_marking: Vec<[f64; 2]>,
    right_marking: Vec<[f64; 2]>,
}

impl Serialize for DetectionFrame {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        WireFrame {
            frame_index: self.frame_index,
            timestamp_s: self.timestamp_s,
            boxes: self.boxes.iter().map(|b| (*b).into()).collect(),
            left_marking: self.left_marking.points.clone(),
            right_marking: self.right_marking.points.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DetectionFrame {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = WireFrame::deserialize(deserializer)?;
        let boxes = wire
            .boxes
            .into_iter()
            .map(BoundingBox::try_from)
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)?;
        Ok(DetectionFrame {
            frame_index: wire.frame_index,
            timestamp_s: wire.timestamp_s,
            boxes,
            left_marking: MarkingPoints {
                side: MarkingSide::Left,
                points: wire.left_marking,
            },
            right_marking: MarkingPoints {
                side: MarkingSide::Right,
                points: wire.right_marking,
            },
        })
    }
}

/// Object and marking positions on one horizontal baseline row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineObservation {
    /// Object 1D coordinate: horizontal bounding-box center.
    pub u_o: f64,
    /// The baseline row: the box's bottom edge.
    pub v_base: f64,
    /// Left marking intercept at `v_base`.
    pub u1: f64,
    /// Right marking intercept at `v_base`.
    pub u2: f64,
}

/// Parse a JSONL stream of detection frames, validate, and sort by
/// `frame_index`.
pub fn parse_frames<R: BufRead>(reader: R) -> Result<Vec<DetectionFrame>, IngestError> {
    let mut frames = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: DetectionFrame =
            serde_json::from_str(&line).map_err(|e| classify_json_error(line_no, &e))?;
        frames.push(frame);
    }
    frames.sort_by_key(|f| f.frame_index);
    for pair in frames.windows(2) {
        if pair[0].frame_index == pair[1].frame_index {
            return Err(IngestError::DuplicateFrame {
                frame_index: pair[0].frame_index,
            });
        }
    }
    Ok(frames)
}

/// Turn serde_json's "missing field `x`" message into a schema error that
/// names the field; anything else stays a parse error.
fn classify_json_error(line: usize, err: &serde_json::Error) -> IngestError {
    let message = err.to_string();
    if let Some(rest) = message.strip_prefix("missing field `") {
        if let Some(field) = rest.split('`').next() {
            return IngestError::Schema {
                line,
                field: field.to_string(),
            };
        }
    }
    if message.starts_with("invalid type") || message.starts_with("invalid length") {
        // Field present but with the wrong shape; still a schema problem.
        return IngestError::Schema {
            line,
            field: message,
        };
    }
    IngestError::Parse { line, message }
}

/// The 1D coordinate of a box on its own baseline: `((u_tl+u_br)/2, v_br)`.
pub fn baseline_position(b: &BoundingBox) -> (f64, f64) {
    ((b.u_tl + b.u_br) / 2.0, b.v_br)
}

/// Intersect a marking with the horizontal baseline at `v_base`.
///
/// Fits `u = a*v + b` by least squares over the `INTERCEPT_NEIGHBORS` points
/// nearest in v to the baseline, then evaluates at `v_base`. Markings are
/// near-vertical in image space at long range, so u(v) is single-valued.
pub fn marking_intercept(m: &MarkingPoints, v_base: f64) -> Result<f64, IngestError> {
    if m.points.len() < 2 {
        return Err(IngestError::InsufficientPoints {
            needed: 2,
            got: m.points.len(),
        });
    }
    let mut pts = m.points.clone();
    // Deterministic regardless of input ordering: distance to the baseline,
    // then coordinates as tie-breakers.
    pts.sort_by(|a, b| {
        let da = (a[1] - v_base).abs();
        let db = (b[1] - v_base).abs();
        da.total_cmp(&db)
            .then(a[1].total_cmp(&b[1]))
            .then(a[0].total_cmp(&b[0]))
    });
    let k = INTERCEPT_NEIGHBORS.min(pts.len());
    let sel = &pts[..k];

    let v_lo = sel.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    let v_hi = sel.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
    let distance = if v_base < v_lo {
        v_lo - v_base
    } else if v_base > v_hi {
        v_base - v_hi
    } else {
        0.0
    };
    if distance > MAX_EXTRAPOLATION_PX {
        return Err(IngestError::ExtrapolationTooFar { v_base, distance });
    }

    let n = k as f64;
    let v_mean = sel.iter().map(|p| p[1]).sum::<f64>() / n;
    let u_mean = sel.iter().map(|p| p[0]).sum::<f64>() / n;
    let mut svv = 0.0;
    let mut svu = 0.0;
    for p in sel {
        let dv = p[1] - v_mean;
        svv += dv * dv;
        svu += dv * (p[0] - u_mean);
    }
    // All selected points on one row: the fit is underdetermined, fall back
    // to the mean u.
    let slope = if svv > 0.0 { svu / svv } else { 0.0 };
    Ok(u_mean + slope * (v_base - v_mean))
}
