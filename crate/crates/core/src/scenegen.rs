//! Synthetic scene generation: world-coordinate trajectories plus a camera
//! path, rendered into noisy per-frame detection records. Substitutes for a
//! real detector front-end so the rest of the pipeline has labeled data with
//! known ground truth.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    project, relative_position_world, CameraIntrinsics, CameraPose, GeometryError, WorldPoint,
};
use crate::ingest::{BoundingBox, DetectionFrame, MarkingPoints, MarkingSide};

/// Camera height above the ground plane. World Y points down, the camera
/// sits at Y = 0, so the road surface is at Y = +1.5.
pub const CAMERA_HEIGHT_M: f64 = 1.5;

/// Assumed physical extent of an intruder (pedestrian/cyclist) for bounding
/// box synthesis.
const OBJECT_WIDTH_M: f64 = 0.6;
const OBJECT_HEIGHT_M: f64 = 1.7;

/// Marking points are sampled within this longitudinal spread around the
/// object's depth.
const MARKING_SPREAD_M: f64 = 8.0;

#[derive(Debug, Error)]
pub enum SceneGenError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("generated scene violates its label predicate: {0}")]
    LabelSoundness(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

/// Action class of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    LeftToRight,
    RightToLeft,
    NoIntrusion,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::LeftToRight, Label::RightToLeft, Label::NoIntrusion];

    pub fn index(self) -> usize {
        match self {
            Label::LeftToRight => 0,
            Label::RightToLeft => 1,
            Label::NoIntrusion => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Label::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::LeftToRight => "left_to_right",
            Label::RightToLeft => "right_to_left",
            Label::NoIntrusion => "no_intrusion",
        }
    }
}

/// Camera yaw over the clip, radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YawProfile {
    /// Fixed yaw for the whole clip.
    Constant(f64),
    /// Sinusoidal steering with a seeded random phase. The period is four
    /// clip lengths: gentle enough that the telephoto image does not slew
    /// faster than a tracker can coast through a missed detection, while
    /// the random phase still sweeps the full amplitude range across
    /// samples.
    Sine { amplitude: f64 },
    /// Explicit per-frame yaw values; length must equal `frame_count`.
    Sequence(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub label: Label,
    pub lane_width_m: f64,
    /// [min, max] initial distance of the object ahead of the camera.
    pub object_range_m: [f64; 2],
    pub ego_speed_mps: f64,
    pub object_lateral_speed_mps: f64,
    pub yaw: YawProfile,
    pub frame_count: usize,
    pub frame_rate_hz: f64,
    pub cam_lateral_offset_m: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            label: Label::NoIntrusion,
            lane_width_m: 3.5,
            object_range_m: [150.0, 250.0],
            ego_speed_mps: 20.0,
            object_lateral_speed_mps: 1.5,
            yaw: YawProfile::Sine {
                amplitude: 3.0_f64.to_radians(),
            },
            frame_count: 32,
            frame_rate_hz: 10.0,
            cam_lateral_offset_m: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn validate(&self) -> Result<(), SceneGenError> {
        if self.frame_count < 24 {
            return Err(SceneGenError::InvalidConfig(format!(
                "frame_count must be >= 24, got {}",
                self.frame_count
            )));
        }
        if !self.lane_width_m.is_finite() || self.lane_width_m <= 0.0 {
            return Err(SceneGenError::InvalidConfig(format!(
                "lane_width_m must be positive, got {}",
                self.lane_width_m
            )));
        }
        let [lo, hi] = self.object_range_m;
        if !(50.0..=400.0).contains(&lo) || !(50.0..=400.0).contains(&hi) || lo > hi {
            return Err(SceneGenError::InvalidConfig(format!(
                "object_range_m must be an ordered range within [50, 400], got [{lo}, {hi}]"
            )));
        }
        if !self.frame_rate_hz.is_finite() || self.frame_rate_hz <= 0.0 {
            return Err(SceneGenError::InvalidConfig(
                "frame_rate_hz must be positive".into(),
            ));
        }
        if self.label != Label::NoIntrusion && self.object_lateral_speed_mps <= 0.0 {
            return Err(SceneGenError::InvalidConfig(
                "intrusion labels need object_lateral_speed_mps > 0".into(),
            ));
        }
        if let YawProfile::Sequence(seq) = &self.yaw {
            if seq.len() != self.frame_count {
                return Err(SceneGenError::InvalidConfig(format!(
                    "yaw sequence has {} entries for {} frames",
                    seq.len(),
                    self.frame_count
                )));
            }
        }
        Ok(())
    }
}

/// Detector imperfection model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub intrinsics: CameraIntrinsics,
    pub pixel_noise_sigma: f64,
    /// Probability per frame that the object detection is dropped.
    pub miss_rate: f64,
    /// Expected spurious boxes per frame (Poisson).
    pub clutter_rate: f64,
    pub marking_points_per_frame: usize,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics {
                fx: 8000.0,
                fy: 8000.0,
                u0: 960.0,
                v0: 600.0,
            },
            pixel_noise_sigma: 2.0,
            miss_rate: 0.05,
            clutter_rate: 0.5,
            marking_points_per_frame: 8,
        }
    }
}

impl SensorConfig {
    /// Same geometry, zero noise, no misses, no clutter.
    pub fn noiseless() -> Self {
        Self {
            pixel_noise_sigma: 0.0,
            miss_rate: 0.0,
            clutter_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SceneGenError> {
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return Err(SceneGenError::InvalidConfig(format!(
                "miss_rate must be in [0,1], got {}",
                self.miss_rate
            )));
        }
        if self.pixel_noise_sigma < 0.0 || self.clutter_rate < 0.0 {
            return Err(SceneGenError::InvalidConfig(
                "pixel_noise_sigma and clutter_rate must be >= 0".into(),
            ));
        }
        if self.marking_points_per_frame < 2 {
            return Err(SceneGenError::InvalidConfig(
                "marking_points_per_frame must be >= 2".into(),
            ));
        }
        Ok(())
    }
}

/// A simulated scene in world coordinates, before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScene {
    pub label: Label,
    /// Object ground position per frame.
    pub object: Vec<WorldPoint>,
    /// Lateral positions of the left and right markings.
    pub marking_x: [f64; 2],
    pub poses: Vec<CameraPose>,
    pub timestamps_s: Vec<f64>,
    /// When the object crosses the relevant marking, for intrusion labels.
    pub crossing_time_s: Option<f64>,
}

impl LabeledScene {
    /// World-oracle relative position series.
    pub fn world_series(&self) -> Vec<f64> {
        self.object
            .iter()
            .map(|p| relative_position_world(p.x, self.marking_x[0], self.marking_x[1]).unwrap())
            .collect()
    }
}

/// Displacement at time `t` of a unit-speed profile whose velocity ramps up
/// with a cubic smoothstep of duration `ramp` starting at `t_on`.
fn ramped_displacement(t: f64, t_on: f64, ramp: f64) -> f64 {
    let tau = t - t_on;
    if tau <= 0.0 {
        0.0
    } else if tau < ramp {
        let x = tau / ramp;
        // integral of the smoothstep velocity 3x^2 - 2x^3
        ramp * (x.powi(3) - 0.5 * x.powi(4))
    } else {
        tau - 0.5 * ramp
    }
}

/// Derive an independent sub-seed from a base seed and an index (splitmix64).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulate one labeled scene. Deterministic in `seed`.
pub fn simulate_scene(cfg: &ScenarioConfig, seed: u64) -> Result<LabeledScene, SceneGenError> {
    cfg.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n = cfg.frame_count;
    let dt = 1.0 / cfg.frame_rate_hz;
    let total = (n - 1) as f64 * dt;
    let w = cfg.lane_width_m;
    let marking_x = [-w / 2.0, w / 2.0];

    let z_obj = rng.random_range(cfg.object_range_m[0]..=cfg.object_range_m[1]);
    let t_on = rng.random_range(0.3..0.8);
    let ramp = 0.5;

    // Lateral motion in lane-width units. Intrusion classes are built
    // backwards from a crossing time inside the final 24 frames, so the
    // evaluation window always contains the event.
    let (offsets, crossing_time): (Vec<f64>, Option<f64>) = match cfg.label {
        Label::LeftToRight | Label::RightToLeft => {
            let dir = if cfg.label == Label::LeftToRight {
                1.0
            } else {
                -1.0
            };
            let cross_back = rng.random_range(5.0..13.0) * dt;
            let t_c = (total - cross_back).max(t_on + ramp + 0.2);
            let mut speed = cfg.object_lateral_speed_mps * rng.random_range(0.75..1.25);
            // Cap the speed so the object cannot overshoot through the far
            // marking before the clip ends.
            let travel_after = ramped_displacement(total, t_on, ramp)
                - ramped_displacement(t_c, t_on, ramp);
            if travel_after > 0.0 {
                speed = speed.min(0.9 * w / travel_after);
            }
            let p_cross = -0.5 * dir;
            let p = (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    let g = ramped_displacement(t, t_on, ramp)
                        - ramped_displacement(t_c, t_on, ramp);
                    p_cross + dir * speed * g / w
                })
                .collect();
            (p, Some(t_c))
        }
        Label::NoIntrusion => {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let p_start = side * rng.random_range(0.65..1.55);
            // Optional slow drift away from the lane; zero lateral speed
            // gives a perfectly static object.
            let speed = cfg.object_lateral_speed_mps * rng.random_range(0.0..0.25);
            let p = (0..n)
                .map(|i| {
                    let t = i as f64 * dt;
                    p_start + side * speed * ramped_displacement(t, t_on, ramp) / w
                })
                .collect();
            (p, None)
        }
    };

    let yaw_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let yaw_at = |i: usize| -> f64 {
        let t = i as f64 * dt;
        match &cfg.yaw {
            YawProfile::Constant(a) => *a,
            YawProfile::Sine { amplitude } => {
                amplitude * (std::f64::consts::FRAC_PI_2 * t / total.max(dt) + yaw_phase).sin()
            }
            YawProfile::Sequence(seq) => seq[i],
        }
    };

    let timestamps_s: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let object: Vec<WorldPoint> = offsets
        .iter()
        .map(|p| WorldPoint::new(p * w, CAMERA_HEIGHT_M, z_obj))
        .collect();
    let poses: Vec<CameraPose> = (0..n)
        .map(|i| {
            CameraPose::new(
                [cfg.cam_lateral_offset_m, 0.0, cfg.ego_speed_mps * timestamps_s[i]],
                [0.0, yaw_at(i), 0.0],
            )
        })
        .collect();

    let scene = LabeledScene {
        label: cfg.label,
        object,
        marking_x,
        poses,
        timestamps_s,
        crossing_time_s: crossing_time,
    };
    check_label_soundness(&scene)?;
    Ok(scene)
}

/// Verify the world-oracle series satisfies the class predicate.
fn check_label_soundness(scene: &LabeledScene) -> Result<(), SceneGenError> {
    let p = scene.world_series();
    match scene.label {
        Label::NoIntrusion => {
            let min_abs = p.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            if min_abs < 0.55 {
                return Err(SceneGenError::LabelSoundness(format!(
                    "no-intrusion sample reaches |p_r| = {min_abs:.3} < 0.55"
                )));
            }
        }
        Label::LeftToRight => {
            let crossings = count_crossings(&p, -0.5, 1.0);
            let last = *p.last().unwrap();
            if crossings != 1 || !(-0.5..0.5).contains(&last) {
                return Err(SceneGenError::LabelSoundness(format!(
                    "left-to-right sample: {crossings} upward crossings, ends at {last:.3}"
                )));
            }
        }
        Label::RightToLeft => {
            let crossings = count_crossings(&p, 0.5, -1.0);
            let last = *p.last().unwrap();
            if crossings != 1 || !(-0.5..=0.5).contains(&last) {
                return Err(SceneGenError::LabelSoundness(format!(
                    "right-to-left sample: {crossings} downward crossings, ends at {last:.3}"
                )));
            }
        }
    }
    Ok(())
}

fn count_crossings(p: &[f64], threshold: f64, direction: f64) -> usize {
    p.windows(2)
        .filter(|pair| {
            direction * (pair[0] - threshold) < 0.0 && direction * (pair[1] - threshold) >= 0.0
        })
        .count()
}

/// Per-frame rendering truth retained alongside the noisy detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderTruth {
    pub marking_x: [f64; 2],
    /// Noise-free projected object coordinate per frame.
    pub u_o: Vec<f64>,
    /// Noise-free baseline row per frame.
    pub v_base: Vec<f64>,
    /// World-oracle relative position per frame.
    pub p_r_world: Vec<f64>,
    pub crossing_time_s: Option<f64>,
}

/// Render a scene into noisy detection frames. Deterministic in `seed`.
pub fn render_detections(
    scene: &LabeledScene,
    sensor: &SensorConfig,
    seed: u64,
) -> Result<(Vec<DetectionFrame>, RenderTruth), SceneGenError> {
    sensor.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let sigma = sensor.pixel_noise_sigma;
    let noise = if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).map_err(|e| SceneGenError::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let clutter = if sensor.clutter_rate > 0.0 {
        Some(
            Poisson::new(sensor.clutter_rate)
                .map_err(|e| SceneGenError::InvalidConfig(e.to_string()))?,
        )
    } else {
        None
    };
    let jitter = |rng: &mut ChaCha12Rng| noise.map(|n| n.sample(rng)).unwrap_or(0.0);

    let intr = &sensor.intrinsics;
    let mut frames = Vec::with_capacity(scene.object.len());
    let mut truth_u = Vec::with_capacity(scene.object.len());
    let mut truth_v = Vec::with_capacity(scene.object.len());

    for (i, (obj, pose)) in scene.object.iter().zip(&scene.poses).enumerate() {
        let ip = project(*obj, intr, pose)?;
        truth_u.push(ip.u);
        truth_v.push(ip.v);

        let mut boxes = Vec::new();
        let missed = sensor.miss_rate > 0.0 && rng.random_bool(sensor.miss_rate);
        if !missed {
            let half_w = 0.5 * intr.fx * OBJECT_WIDTH_M / ip.depth;
            let h = intr.fy * OBJECT_HEIGHT_M / ip.depth;
            let u_tl = ip.u - half_w + jitter(&mut rng);
            let v_tl = ip.v - h + jitter(&mut rng);
            let mut u_br = ip.u + half_w + jitter(&mut rng);
            let mut v_br = ip.v + jitter(&mut rng);
            // Noise can't plausibly invert a box at these sizes, but never
            // emit an invalid one.
            if u_br <= u_tl {
                u_br = u_tl + 1.0;
            }
            if v_br <= v_tl {
                v_br = v_tl + 1.0;
            }
            boxes.push(BoundingBox::new(u_tl, v_tl, u_br, v_br).unwrap());
        }

        let n_clutter = clutter
            .as_ref()
            .map(|p| p.sample(&mut rng).round() as usize)
            .unwrap_or(0);
        for _ in 0..n_clutter {
            let cu = intr.u0 + rng.random_range(-900.0..900.0);
            let cv = truth_v[i] + rng.random_range(-40.0..40.0);
            let cw = rng.random_range(15.0..35.0);
            let ch = rng.random_range(50.0..90.0);
            boxes.push(BoundingBox::new(cu - cw / 2.0, cv - ch, cu + cw / 2.0, cv).unwrap());
        }
        // The true detection must not be identifiable by position in the
        // list.
        if boxes.len() > 1 {
            for j in (1..boxes.len()).rev() {
                boxes.swap(j, rng.random_range(0..=j));
            }
        }

        let render_marking = |side: MarkingSide,
                              x: f64,
                              rng: &mut ChaCha12Rng|
         -> Result<MarkingPoints, SceneGenError> {
            let m = sensor.marking_points_per_frame;
            let mut points = Vec::with_capacity(m);
            for j in 0..m {
                let frac = if m == 1 { 0.5 } else { j as f64 / (m - 1) as f64 };
                let dz = (frac - 0.5) * 2.0 * MARKING_SPREAD_M + rng.random_range(-0.5..0.5);
                let p = project(WorldPoint::new(x, CAMERA_HEIGHT_M, obj.z + dz), intr, pose)?;
                points.push([p.u + jitter(rng), p.v + jitter(rng)]);
            }
            Ok(MarkingPoints { side, points })
        };
        let left_marking = render_marking(MarkingSide::Left, scene.marking_x[0], &mut rng)?;
        let right_marking = render_marking(MarkingSide::Right, scene.marking_x[1], &mut rng)?;

        frames.push(DetectionFrame {
            frame_index: i as i64,
            timestamp_s: scene.timestamps_s[i],
            boxes,
            left_marking,
            right_marking,
        });
    }

    let truth = RenderTruth {
        marking_x: scene.marking_x,
        u_o: truth_u,
        v_base: truth_v,
        p_r_world: scene.world_series(),
        crossing_time_s: scene.crossing_time_s,
    };
    Ok((frames, truth))
}

/// Provenance and ground truth stored with every generated sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub sample_index: usize,
    pub scene_seed: u64,
    pub render_seed: u64,
    pub scenario: ScenarioConfig,
    pub truth: RenderTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    pub label: Label,
    pub frames: Vec<DetectionFrame>,
    pub meta: SampleMeta,
}

/// Generate a class-balanced labeled dataset: `n_per_class` samples for each
/// of the three labels. Each sample draws from its own RNG stream derived
/// from `(seed, sample_index)`.
pub fn generate_dataset(
    n_per_class: usize,
    scenario: &ScenarioConfig,
    sensor: &SensorConfig,
    seed: u64,
) -> Result<Vec<DatasetSample>, SceneGenError> {
    if n_per_class < 1 {
        return Err(SceneGenError::InvalidConfig(
            "n_per_class must be >= 1".into(),
        ));
    }
    let mut samples = Vec::with_capacity(3 * n_per_class);
    for (ci, label) in Label::ALL.iter().enumerate() {
        for j in 0..n_per_class {
            let sample_index = ci * n_per_class + j;
            let scene_seed = derive_seed(seed, 2 * sample_index as u64);
            let render_seed = derive_seed(seed, 2 * sample_index as u64 + 1);
            let cfg = scenario.clone().with_label(*label);
            let scene = simulate_scene(&cfg, scene_seed)?;
            let (frames, truth) = render_detections(&scene, sensor, render_seed)?;
            samples.push(DatasetSample {
                label: *label,
                frames,
                meta: SampleMeta {
                    sample_index,
                    scene_seed,
                    render_seed,
                    scenario: cfg,
                    truth,
                },
            });
        }
    }
    Ok(samples)
}

/// One sample per line: `{"label": ..., "frames": [...], "meta": {...}}`.
pub fn write_dataset_jsonl<W: Write>(
    mut w: W,
    samples: &[DatasetSample],
) -> Result<(), SceneGenError> {
    for s in samples {
        serde_json::to_writer(&mut w, s).map_err(|e| SceneGenError::BadRecord {
            line: s.meta.sample_index + 1,
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_dataset_jsonl<R: BufRead>(r: R) -> Result<Vec<DatasetSample>, SceneGenError> {
    let mut samples = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample: DatasetSample =
            serde_json::from_str(&line).map_err(|e| SceneGenError::BadRecord {
                line: idx + 1,
                message: e.to_string(),
            })?;
        samples.push(sample);
    }
    Ok(samples)
}
