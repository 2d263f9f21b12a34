//! Lane intrusion action recognition from monocular detection records.
//!
//! The pipeline turns per-frame bounding boxes and lane-marking points into
//! a normalized relative motion time series and classifies it with a small
//! phase-space reconstruction network:
//!
//! detections -> association (Hungarian) -> Kalman smoothing -> lane-width
//! normalization -> 24-frame windows -> classifier.
//!
//! A synthetic scene generator ([`scenegen`]) provides labeled data with
//! known world-coordinate ground truth, and [`harness`] adds training,
//! k-fold cross-validation, metrics, and the ablation runners behind the
//! `laneintrude` CLI.

pub mod geometry;
pub mod harness;
pub mod ingest;
pub mod normalize;
pub mod scenegen;
pub mod smoothing;
pub mod psrnet;
pub mod tracking;
