//! Tracking-by-detection: Hungarian assignment between track predictions and
//! per-frame detections, with gating to reject clutter. A sample is assumed
//! to contain one real intruder; the longest surviving track wins.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::ingest::{baseline_position, marking_intercept, BaselineObservation, DetectionFrame};

/// Minimum number of observations for a usable track (one model window).
pub const MIN_TRACK_LEN: usize = 24;

/// A track is dropped after this many consecutive unmatched frames.
const MAX_CONSECUTIVE_MISSES: usize = 8;

/// Tracks with at least this many observations match ahead of tentative
/// ones in the per-frame cascade.
const CONFIRMED_LEN: usize = 3;

/// Maximum tolerated fraction of missed frames inside a track's span.
const MAX_GAP_FRACTION: f64 = 0.3;

#[derive(Debug, Error)]
pub enum TrackingError {
    #[error("cost matrix is empty")]
    EmptyMatrix,
    #[error("cost matrix entry ({row},{col}) is {value}, must be finite and >= 0")]
    InvalidCost { row: usize, col: usize, value: f64 },
    #[error("no track reached {MIN_TRACK_LEN} observations")]
    NoTrackFound,
}

/// Rectangular nonnegative cost matrix, row-major.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, TrackingError> {
        assert_eq!(data.len(), rows * cols, "cost data length mismatch");
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(TrackingError::InvalidCost {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, TrackingError> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }
}

/// Minimum-cost assignment of `min(rows, cols)` row/column pairs.
///
/// Shortest-augmenting-path formulation with dual potentials, O(n^2 m).
/// Returns pairs sorted by row index.
pub fn hungarian(c: &CostMatrix) -> Result<Vec<(usize, usize)>, TrackingError> {
    if c.rows == 0 || c.cols == 0 {
        return Err(TrackingError::EmptyMatrix);
    }
    let transposed = c.rows > c.cols;
    let (n, m) = if transposed {
        (c.cols, c.rows)
    } else {
        (c.rows, c.cols)
    };
    let cost = |i: usize, j: usize| -> f64 {
        if transposed {
            c.get(j, i)
        } else {
            c.get(i, j)
        }
    };

    // 1-based potentials; assigned[j] is the row matched to column j, 0 = free.
    let mut pot_row = vec![0.0; n + 1];
    let mut pot_col = vec![0.0; m + 1];
    let mut assigned = vec![0usize; m + 1];
    let mut path = vec![0usize; m + 1];

    for row in 1..=n {
        assigned[0] = row;
        let mut j0 = 0usize;
        let mut min_to = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = assigned[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let reduced = cost(i0 - 1, j - 1) - pot_row[i0] - pot_col[j];
                if reduced < min_to[j] {
                    min_to[j] = reduced;
                    path[j] = j0;
                }
                if min_to[j] < delta {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    pot_row[assigned[j]] += delta;
                    pot_col[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
            if assigned[j0] == 0 {
                break;
            }
        }
        // Walk the augmenting path backwards.
        while j0 != 0 {
            let j1 = path[j0];
            assigned[j0] = assigned[j1];
            j0 = j1;
        }
    }

    let mut pairs = Vec::with_capacity(n);
    for j in 1..=m {
        if assigned[j] != 0 {
            let (row, col) = if transposed {
                (j - 1, assigned[j] - 1)
            } else {
                (assigned[j] - 1, j - 1)
            };
            pairs.push((row, col));
        }
    }
    pairs.sort_unstable_by_key(|&(r, _)| r);
    Ok(pairs)
}

/// Total cost of an assignment, summed in row order.
pub fn assignment_cost(c: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, col)| c.get(r, col)).sum()
}

/// A single object's track through a detection sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub object_id: u32,
    /// `(frame_index, observation)`, strictly increasing frames.
    pub observations: Vec<(i64, BaselineObservation)>,
    /// Frames inside the track's span with no matched detection.
    pub gaps: BTreeSet<i64>,
}

impl Track {
    pub fn first_frame(&self) -> i64 {
        self.observations.first().map(|(f, _)| *f).unwrap_or(0)
    }

    pub fn last_frame(&self) -> i64 {
        self.observations.last().map(|(f, _)| *f).unwrap_or(0)
    }

    pub fn gap_fraction(&self) -> f64 {
        let span = (self.last_frame() - self.first_frame() + 1) as f64;
        self.gaps.len() as f64 / span
    }
}

#[derive(Debug)]
struct TrackBuilder {
    id: u32,
    observations: Vec<(i64, BaselineObservation)>,
    matched_cost: f64,
    matched_steps: usize,
    consecutive_misses: usize,
    dead: bool,
}

impl TrackBuilder {
    /// Constant-velocity extrapolation. The velocity is a least-squares
    /// slope over the last three observations: short enough to follow the
    /// yaw-induced image acceleration, averaged enough that one noisy
    /// match cannot fling the prediction out of the gate.
    fn predict(&self, frame: i64) -> f64 {
        let n = self.observations.len();
        let (f_last, last) = self.observations[n - 1];
        if n < 2 {
            return last.u_o;
        }
        let tail = &self.observations[n.saturating_sub(3)..];
        let k = tail.len() as f64;
        let f_mean = tail.iter().map(|(f, _)| *f as f64).sum::<f64>() / k;
        let u_mean = tail.iter().map(|(_, o)| o.u_o).sum::<f64>() / k;
        let mut sff = 0.0;
        let mut sfu = 0.0;
        for (f, o) in tail {
            let df = *f as f64 - f_mean;
            sff += df * df;
            sfu += df * (o.u_o - u_mean);
        }
        let vel = if sff > 0.0 { sfu / sff } else { 0.0 };
        last.u_o + vel * (frame - f_last) as f64
    }

    fn mean_cost(&self) -> f64 {
        if self.matched_steps == 0 {
            0.0
        } else {
            self.matched_cost / self.matched_steps as f64
        }
    }

    fn into_track(self) -> Track {
        let mut gaps = BTreeSet::new();
        let first = self.observations[0].0;
        let last = self.observations[self.observations.len() - 1].0;
        let mut have = BTreeSet::new();
        for (f, _) in &self.observations {
            have.insert(*f);
        }
        for f in first..=last {
            if !have.contains(&f) {
                gaps.insert(f);
            }
        }
        Track {
            object_id: self.id,
            observations: self.observations,
            gaps,
        }
    }
}

/// Build per-box baseline observations for one frame. Boxes whose marking
/// intercepts cannot be computed (or coincide) are dropped.
fn frame_candidates(frame: &DetectionFrame) -> Vec<BaselineObservation> {
    let mut out = Vec::with_capacity(frame.boxes.len());
    for b in &frame.boxes {
        let (u_o, v_base) = baseline_position(b);
        let Ok(u1) = marking_intercept(&frame.left_marking, v_base) else {
            continue;
        };
        let Ok(u2) = marking_intercept(&frame.right_marking, v_base) else {
            continue;
        };
        if u1 == u2 {
            continue;
        }
        out.push(BaselineObservation { u_o, v_base, u1, u2 });
    }
    // Canonical in-frame order: association must not depend on how the
    // detector happened to order its boxes.
    out.sort_by(|a, b| a.u_o.total_cmp(&b.u_o).then(a.v_base.total_cmp(&b.v_base)));
    out
}

/// Greedy-forward association over a detection sequence.
///
/// Each frame, live tracks are Hungarian-matched to detections on absolute
/// u-distance from a constant-velocity prediction; matches over `gate_px`
/// are rejected. Unmatched detections spawn tracks. The longest valid track
/// (ties broken by lower mean match cost) is returned.
pub fn associate(frames: &[DetectionFrame], gate_px: f64) -> Result<Track, TrackingError> {
    let mut builders: Vec<TrackBuilder> = Vec::new();
    let mut next_id = 0u32;

    for frame in frames {
        let candidates = frame_candidates(frame);
        let mut candidate_taken = vec![false; candidates.len()];
        let mut track_matched = vec![false; builders.len()];

        // Matching cascade: established tracks claim detections first, so a
        // freshly spawned clutter track can never steal a detection from the
        // track that has been following the object all along.
        for stage in 0..2 {
            let stage_tracks: Vec<usize> = builders
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.dead)
                .filter(|(_, t)| {
                    if stage == 0 {
                        t.observations.len() >= CONFIRMED_LEN
                    } else {
                        t.observations.len() < CONFIRMED_LEN
                    }
                })
                .map(|(i, _)| i)
                .collect();
            let free: Vec<usize> = (0..candidates.len())
                .filter(|&c| !candidate_taken[c])
                .collect();
            if stage_tracks.is_empty() || free.is_empty() {
                continue;
            }
            // Saturate distances just above the widest gate: pairs that can
            // never be accepted must not be able to distort the optimal
            // assignment among the acceptable ones.
            let cap = 2.0 * gate_px + 1.0;
            let cost = CostMatrix::from_fn(stage_tracks.len(), free.len(), |r, c| {
                (builders[stage_tracks[r]].predict(frame.frame_index)
                    - candidates[free[c]].u_o)
                    .abs()
                    .min(cap)
            })?;
            for (r, c) in hungarian(&cost)? {
                // The gate doubles whenever the prediction is weakly
                // constrained: a single-observation track has no velocity
                // estimate yet, and a coasting track's uncertainty grows
                // with every missed frame.
                let b = &builders[stage_tracks[r]];
                let gate = if b.observations.len() < 2 || b.consecutive_misses >= 1 {
                    2.0 * gate_px
                } else {
                    gate_px
                };
                if cost.get(r, c) <= gate {
                    let b = &mut builders[stage_tracks[r]];
                    b.observations.push((frame.frame_index, candidates[free[c]]));
                    b.matched_cost += cost.get(r, c);
                    b.matched_steps += 1;
                    b.consecutive_misses = 0;
                    track_matched[stage_tracks[r]] = true;
                    candidate_taken[free[c]] = true;
                }
            }
        }

        for (idx, b) in builders.iter_mut().enumerate() {
            if !b.dead && !track_matched[idx] {
                b.consecutive_misses += 1;
                if b.consecutive_misses > MAX_CONSECUTIVE_MISSES {
                    b.dead = true;
                }
            }
        }

        for (c, taken) in candidate_taken.iter().enumerate() {
            if !taken {
                builders.push(TrackBuilder {
                    id: next_id,
                    observations: vec![(frame.frame_index, candidates[c])],
                    matched_cost: 0.0,
                    matched_steps: 0,
                    consecutive_misses: 0,
                    dead: false,
                });
                next_id += 1;
            }
        }
    }

    builders
        .into_iter()
        .filter(|b| b.observations.len() >= MIN_TRACK_LEN)
        .map(|b| (b.observations.len(), b.mean_cost(), b))
        .filter(|(len, _, b)| {
            let span = (b.observations[*len - 1].0 - b.observations[0].0 + 1) as f64;
            (span - *len as f64) / span <= MAX_GAP_FRACTION
        })
        .max_by(|(la, ca, _), (lb, cb, _)| la.cmp(lb).then(cb.total_cmp(ca)))
        .map(|(_, _, b)| b.into_track())
        .ok_or(TrackingError::NoTrackFound)
}
