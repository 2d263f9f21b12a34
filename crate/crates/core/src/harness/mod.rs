//! Experiment harness: detection-to-window pipeline, k-fold splits,
//! training and evaluation loops, metrics, and the ablation runners the CLI
//! exposes.

mod ablation;
mod eval;
mod kfold;
mod report;
mod train;

pub use ablation::{ablation_orders, ablation_preproc, OrdersRow, PreprocRow};
pub use eval::{crossval, evaluate, EvalOutcome, MetricsReport};
pub use kfold::{kfold_split, FoldSplit};
pub use report::{
    confusion_csv, content_hash, loss_curves_csv, metrics_csv, orders_csv, preproc_csv,
    render_metrics_table, svg_line_chart, write_manifest,
};
pub use train::{train, TrainConfig};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::DetectionFrame;
use crate::normalize::{
    build_series, last_window, make_windows, normalize_frame, MotionSeries, NormalizeError,
    SeriesRow, Window,
};
use crate::scenegen::{DatasetSample, Label};
use crate::smoothing::{kalman_smooth, KalmanConfig, SmoothingError};
use crate::tracking::{associate, Track, TrackingError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Smoothing(#[from] SmoothingError),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("class {0:?} has no training windows")]
    EmptyClass(Label),
    #[error("{n} samples cannot form {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("sample {index}: {source}")]
    Pipeline {
        index: usize,
        source: PipelineError,
    },
    #[error(transparent)]
    Model(#[from] crate::psrnet::PsrNetError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which preprocessing the pipeline applies before windowing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocVariant {
    /// Tracked pixel coordinate rescaled by the image width; no lane-width
    /// normalization, no filtering.
    Raw,
    /// Lane-width normalization on raw tracked observations.
    Normalized,
    /// Kalman smoothing of object and marking series, then normalization.
    NormalizedFiltered,
}

/// Everything between detection records and model windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub gate_px: f64,
    pub kalman: KalmanConfig,
    pub stride: usize,
    pub variant: PreprocVariant,
    /// Only used by the raw variant's rescaling.
    pub image_width_px: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            gate_px: 40.0,
            kalman: KalmanConfig::default(),
            stride: 8,
            variant: PreprocVariant::NormalizedFiltered,
            image_width_px: 1920.0,
        }
    }
}

/// A sample after the full pipeline: its motion series and model windows.
#[derive(Debug, Clone)]
pub struct PreparedSample {
    pub index: usize,
    pub label: Label,
    pub series: MotionSeries,
    /// Training windows (stride-strided).
    pub windows: Vec<Window>,
    /// The window sample-level predictions are made on.
    pub last: Window,
    /// Per-frame table for the series CSV export.
    pub rows: Vec<SeriesRow>,
}

/// Linear interpolation onto the full frame grid.
fn fill_gaps_linear(series: &[(i64, f64)]) -> Vec<(i64, f64)> {
    if series.is_empty() {
        return Vec::new();
    }
    let first = series[0].0;
    let last = series[series.len() - 1].0;
    let mut out = Vec::with_capacity((last - first + 1) as usize);
    let mut seg = 0usize;
    for frame in first..=last {
        while seg + 1 < series.len() && series[seg + 1].0 <= frame {
            seg += 1;
        }
        if series[seg].0 == frame {
            out.push((frame, series[seg].1));
        } else {
            let (f0, v0) = series[seg];
            let (f1, v1) = series[seg + 1];
            let alpha = (frame - f0) as f64 / (f1 - f0) as f64;
            out.push((frame, v0 + alpha * (v1 - v0)));
        }
    }
    out
}

fn track_series(track: &Track) -> (Vec<(i64, f64)>, Vec<(i64, f64)>, Vec<(i64, f64)>) {
    let u_o = track
        .observations
        .iter()
        .map(|(f, o)| (*f, o.u_o))
        .collect();
    let u_1 = track
        .observations
        .iter()
        .map(|(f, o)| (*f, o.u1))
        .collect();
    let u_2 = track
        .observations
        .iter()
        .map(|(f, o)| (*f, o.u2))
        .collect();
    (u_o, u_1, u_2)
}

/// Run one detection sequence through association, smoothing (per variant),
/// and normalization, then cut windows.
pub fn prepare_sample(
    frames: &[DetectionFrame],
    label: Label,
    index: usize,
    cfg: &PipelineConfig,
) -> Result<PreparedSample, PipelineError> {
    let track = associate(frames, cfg.gate_px)?;
    let (u_o, u_1, u_2) = track_series(&track);

    let (series, rows) = match cfg.variant {
        PreprocVariant::NormalizedFiltered => {
            let s_o = kalman_smooth(&u_o, &cfg.kalman)?;
            let s_1 = kalman_smooth(&u_1, &cfg.kalman)?;
            let s_2 = kalman_smooth(&u_2, &cfg.kalman)?;
            let series = build_series(&s_o, &s_1, &s_2, Some(label))?;
            let rows = series
                .frames
                .iter()
                .enumerate()
                .map(|(i, &f)| SeriesRow {
                    frame_index: f,
                    p_r: series.values[i],
                    u_o: s_o[i].1,
                    u_1: s_1[i].1,
                    u_2: s_2[i].1,
                })
                .collect();
            (series, rows)
        }
        PreprocVariant::Normalized => {
            // Normalize at observed frames, interpolate the gaps.
            let mut observed = Vec::with_capacity(u_o.len());
            for i in 0..u_o.len() {
                let (f, obj) = u_o[i];
                let (lo, hi) = if u_1[i].1 <= u_2[i].1 {
                    (u_1[i].1, u_2[i].1)
                } else {
                    (u_2[i].1, u_1[i].1)
                };
                let p = normalize_frame(obj, lo, hi)?;
                observed.push((f, p));
            }
            let filled = fill_gaps_linear(&observed);
            let o_full = fill_gaps_linear(&u_o);
            let l_full = fill_gaps_linear(&u_1);
            let r_full = fill_gaps_linear(&u_2);
            let series = MotionSeries {
                frames: filled.iter().map(|(f, _)| *f).collect(),
                values: filled.iter().map(|(_, v)| *v).collect(),
                label: Some(label),
            };
            let rows = filled
                .iter()
                .enumerate()
                .map(|(i, &(f, p))| SeriesRow {
                    frame_index: f,
                    p_r: p,
                    u_o: o_full[i].1,
                    u_1: l_full[i].1,
                    u_2: r_full[i].1,
                })
                .collect();
            (series, rows)
        }
        PreprocVariant::Raw => {
            let filled = fill_gaps_linear(&u_o);
            let l_full = fill_gaps_linear(&u_1);
            let r_full = fill_gaps_linear(&u_2);
            let series = MotionSeries {
                frames: filled.iter().map(|(f, _)| *f).collect(),
                values: filled
                    .iter()
                    .map(|(_, v)| v / cfg.image_width_px)
                    .collect(),
                label: Some(label),
            };
            let rows = filled
                .iter()
                .enumerate()
                .map(|(i, &(f, u))| SeriesRow {
                    frame_index: f,
                    p_r: u / cfg.image_width_px,
                    u_o: u,
                    u_1: l_full[i].1,
                    u_2: r_full[i].1,
                })
                .collect();
            (series, rows)
        }
    };

    let windows = make_windows(&series, cfg.stride)?;
    let last = last_window(&series)?;
    Ok(PreparedSample {
        index,
        label,
        series,
        windows,
        last,
        rows,
    })
}

/// Prepare a whole dataset. Samples the pipeline cannot process are
/// reported, not dropped silently: evaluation counts them as errors.
pub fn prepare_dataset(
    samples: &[DatasetSample],
    cfg: &PipelineConfig,
) -> (Vec<PreparedSample>, Vec<(usize, PipelineError)>) {
    use rayon::prelude::*;
    let results: Vec<Result<PreparedSample, (usize, PipelineError)>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| prepare_sample(&s.frames, s.label, i, cfg).map_err(|e| (i, e)))
        .collect();
    let mut prepared = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(p) => prepared.push(p),
            Err(f) => failures.push(f),
        }
    }
    (prepared, failures)
}
