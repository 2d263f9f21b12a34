//! Lane-width normalization: smoothed image-space observations become the
//! dimensionless relative motion series, then fixed-length model windows.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenegen::Label;

/// Lane widths below this many pixels are degenerate.
pub const MIN_LANE_WIDTH_PX: f64 = 4.0;

/// Relative positions are clamped to this band; beyond three lane widths
/// the class is unambiguous anyway and residual tracking blunders must not
/// blow up the classifier input.
pub const CLAMP: f64 = 3.0;

/// Model window length in frames.
pub const WINDOW_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum NormalizeError {
    #[error("degenerate lane width {width:.2} px at frame {frame}")]
    DegenerateLaneWidth { frame: i64, width: f64 },
    #[error("series of {got} values is shorter than a {needed}-frame window")]
    TooShort { needed: usize, got: usize },
    #[error("series grids disagree: {0}")]
    GridMismatch(String),
}

/// Normalized relative position series for one tracked object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionSeries {
    pub frames: Vec<i64>,
    pub values: Vec<f64>,
    pub label: Option<Label>,
}

impl MotionSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Exactly `WINDOW_LEN` consecutive relative positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    values: Vec<f64>,
    pub label: Option<Label>,
}

impl Window {
    pub fn new(values: Vec<f64>, label: Option<Label>) -> Result<Self, NormalizeError> {
        if values.len() != WINDOW_LEN {
            return Err(NormalizeError::TooShort {
                needed: WINDOW_LEN,
                got: values.len(),
            });
        }
        Ok(Self { values, label })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Relative position of the object on one baseline row:
/// `(u_o - (u_1+u_2)/2) / |u_1 - u_2|`, clamped to `[-CLAMP, CLAMP]`.
pub fn normalize_frame(u_o: f64, u_1: f64, u_2: f64) -> Result<f64, NormalizeError> {
    let width = (u_1 - u_2).abs();
    if width < MIN_LANE_WIDTH_PX {
        return Err(NormalizeError::DegenerateLaneWidth { frame: -1, width });
    }
    let center = (u_1 + u_2) / 2.0;
    Ok(((u_o - center) / width).clamp(-CLAMP, CLAMP))
}

/// Normalize three aligned smoothed series into a motion series.
///
/// The three inputs must share a frame grid. Marking order is canonicalized
/// per frame (left = smaller u), so swapped inputs give identical output.
pub fn build_series(
    u_o: &[(i64, f64)],
    u_1: &[(i64, f64)],
    u_2: &[(i64, f64)],
    label: Option<Label>,
) -> Result<MotionSeries, NormalizeError> {
    if u_o.len() != u_1.len() || u_o.len() != u_2.len() {
        return Err(NormalizeError::GridMismatch(format!(
            "lengths {} / {} / {}",
            u_o.len(),
            u_1.len(),
            u_2.len()
        )));
    }
    let mut frames = Vec::with_capacity(u_o.len());
    let mut values = Vec::with_capacity(u_o.len());
    for ((&(f, obj), &(f1, m1)), &(f2, m2)) in u_o.iter().zip(u_1).zip(u_2) {
        if f != f1 || f != f2 {
            return Err(NormalizeError::GridMismatch(format!(
                "frame {f} vs {f1} vs {f2}"
            )));
        }
        let (left, right) = if m1 <= m2 { (m1, m2) } else { (m2, m1) };
        let p = normalize_frame(obj, left, right)
            .map_err(|_| NormalizeError::DegenerateLaneWidth {
                frame: f,
                width: (left - right).abs(),
            })?;
        frames.push(f);
        values.push(p);
    }
    Ok(MotionSeries { frames, values, label })
}

/// Sliding windows of `WINDOW_LEN` values with the given stride. Values are
/// copied bit-exactly; every window inherits the series label.
pub fn make_windows(series: &MotionSeries, stride: usize) -> Result<Vec<Window>, NormalizeError> {
    let n = series.values.len();
    if n < WINDOW_LEN {
        return Err(NormalizeError::TooShort {
            needed: WINDOW_LEN,
            got: n,
        });
    }
    let stride = stride.max(1);
    let mut out = Vec::new();
    let mut start = 0;
    while start + WINDOW_LEN <= n {
        out.push(Window {
            values: series.values[start..start + WINDOW_LEN].to_vec(),
            label: series.label,
        });
        start += stride;
    }
    Ok(out)
}

/// The last `WINDOW_LEN` values of a series; sample-level predictions are
/// made on this window.
pub fn last_window(series: &MotionSeries) -> Result<Window, NormalizeError> {
    let n = series.values.len();
    if n < WINDOW_LEN {
        return Err(NormalizeError::TooShort {
            needed: WINDOW_LEN,
            got: n,
        });
    }
    Ok(Window {
        values: series.values[n - WINDOW_LEN..].to_vec(),
        label: series.label,
    })
}

/// One row of the intermediate-series CSV export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRow {
    pub frame_index: i64,
    pub p_r: f64,
    pub u_o: f64,
    pub u_1: f64,
    pub u_2: f64,
}

/// Write the per-frame series table: `frame_index,p_r,u_o,u_1,u_2`.
pub fn write_series_csv<W: Write>(mut w: W, rows: &[SeriesRow]) -> std::io::Result<()> {
    writeln!(w, "frame_index,p_r,u_o,u_1,u_2")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.6},{:.3},{:.3},{:.3}",
            r.frame_index, r.p_r, r.u_o, r.u_1, r.u_2
        )?;
    }
    Ok(())
}
