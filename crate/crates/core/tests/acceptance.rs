//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (run with `--nocapture` to see them). The tests share a
//! lock so the timed criteria are not distorted by each other's load.
//!
//! Expect the full suite to take on the order of 20 minutes on a 2-core
//! desktop; criterion 7 retrains the model 99 times.

use std::sync::Mutex;
use std::time::Instant;

use laneintrude::geometry::relative_position_world;
use laneintrude::harness::{
    ablation_orders, ablation_preproc, crossval, evaluate, orders_csv, prepare_dataset,
    preproc_csv, train, PipelineConfig, PreprocVariant, TrainConfig,
};
use laneintrude::ingest::{baseline_position, marking_intercept};
use laneintrude::normalize::{normalize_frame, MotionSeries};
use laneintrude::psrnet::{PsrNet, PsrNetConfig};
use laneintrude::scenegen::{
    generate_dataset, render_detections, simulate_scene, Label, ScenarioConfig, SensorConfig,
    YawProfile,
};
use laneintrude::smoothing::{kalman_init, kalman_smooth, KalmanConfig};
use laneintrude::tracking::{assignment_cost, hungarian, CostMatrix};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// The default synthetic dataset named by the criteria: 150 samples, 50 per
/// class, sigma = 2 px, 5% misses, 0.5 clutter boxes per frame.
fn default_dataset() -> Vec<laneintrude::scenegen::DatasetSample> {
    generate_dataset(50, &ScenarioConfig::default(), &SensorConfig::default(), 7).unwrap()
}

#[test]
fn criterion_01_crossval_accuracy_on_default_dataset() {
    let _guard = serial();
    let started = Instant::now();
    let samples = default_dataset();
    let report = crossval(
        &samples,
        3,
        &PsrNetConfig::default(),
        &TrainConfig::default(),
        &PipelineConfig::default(),
    )
    .unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        report.mean_accuracy >= 95.0,
        "criterion 1 FAIL: mean accuracy {:.2}% < 95%",
        report.mean_accuracy
    );
    assert!(
        report.std_accuracy <= 4.0,
        "criterion 1 FAIL: std {:.2} pp > 4 pp",
        report.std_accuracy
    );
    assert!(
        elapsed <= 600.0,
        "criterion 1 FAIL: run took {elapsed:.0} s > 600 s"
    );
    println!(
        "[acceptance] criterion 1 (3-fold accuracy on the default dataset): PASS \
         ({:.1} +- {:.1} %, {} pipeline failures, {elapsed:.0} s)",
        report.mean_accuracy, report.std_accuracy, report.failed_samples
    );
}

#[test]
fn criterion_02_gradients_match_finite_differences() {
    use rayon::prelude::*;

    let _guard = serial();
    let started = Instant::now();
    let reports: Vec<_> = (0..5u64)
        .into_par_iter()
        .map(|seed| {
            let model = PsrNet::new_random(PsrNetConfig::default(), 1000 + seed).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(2000 + seed);
            let window: Vec<f64> = (0..24).map(|_| rng.random_range(-1.5..1.5)).collect();
            let label = (seed % 3) as usize;
            (seed, model.gradient_check(&window, label, 1e-5).unwrap())
        })
        .collect();
    let mut worst_overall: f64 = 0.0;
    let mut skipped_total = 0usize;
    for (seed, report) in &reports {
        assert!(
            report.worst_relative_error < 1e-4,
            "criterion 2 FAIL: seed {seed}: worst relative error {:.3e}",
            report.worst_relative_error
        );
        worst_overall = worst_overall.max(report.worst_relative_error);
        skipped_total += report.skipped_nonsmooth;
    }
    let elapsed = started.elapsed().as_secs_f64();
    assert!(
        elapsed <= 60.0,
        "criterion 2 FAIL: gradient check took {elapsed:.1} s > 60 s"
    );
    println!(
        "[acceptance] criterion 2 (gradient vs central differences, 5 seeds): PASS \
         (worst rel err {worst_overall:.2e}, {skipped_total} kink-straddling params excluded, {elapsed:.1} s)"
    );
}

/// Exhaustive minimum over all injective row-to-column maps.
fn brute_force_min(c: &CostMatrix) -> f64 {
    fn rec(c: &CostMatrix, row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == c.rows() {
            *best = best.min(acc);
            return;
        }
        for col in 0..c.cols() {
            if !used[col] {
                used[col] = true;
                rec(c, row + 1, used, acc + c.get(row, col), best);
                used[col] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(c, 0, &mut vec![false; c.cols()], 0.0, &mut best);
    best
}

#[test]
fn criterion_03_hungarian_equals_exhaustive_minimum() {
    let _guard = serial();
    let mut rng = ChaCha12Rng::seed_from_u64(33);
    for trial in 0..1000 {
        let c = CostMatrix::from_fn(6, 6, |_, _| rng.random_range(0.0..100.0)).unwrap();
        let pairs = hungarian(&c).unwrap();
        let got = assignment_cost(&c, &pairs);
        let want = brute_force_min(&c);
        assert_eq!(got, want, "criterion 3 FAIL: 6x6 trial {trial}");
    }
    for trial in 0..500 {
        let c = CostMatrix::from_fn(5, 7, |_, _| rng.random_range(0.0..50.0)).unwrap();
        let pairs = hungarian(&c).unwrap();
        assert_eq!(pairs.len(), 5);
        let got = assignment_cost(&c, &pairs);
        let want = brute_force_min(&c);
        assert_eq!(got, want, "criterion 3 FAIL: 5x7 trial {trial}");
    }
    println!(
        "[acceptance] criterion 3 (Hungarian vs exhaustive minimum, 1000x 6x6 + 500x 5x7): PASS"
    );
}

#[test]
fn criterion_04_kalman_properties() {
    let _guard = serial();
    let cfg = KalmanConfig::default();

    // initialization rule, exact
    assert_eq!(kalman_init([3.0, 9.0, 4.0], &cfg).state[0], 4.0);
    assert_eq!(kalman_init([5.0, 5.0, 5.0], &cfg).state[0], 5.0);
    assert_eq!(kalman_init([-1.0, 0.0, 100.0], &cfg).state[0], 0.0);

    // noiseless constant input
    let constant: Vec<(i64, f64)> = (0..120).map(|f| (f, 42.0)).collect();
    let out = kalman_smooth(&constant, &cfg).unwrap();
    let const_err = out
        .iter()
        .skip(3)
        .map(|(_, v)| (v - 42.0).abs())
        .fold(0.0f64, f64::max);
    assert!(
        const_err < 1e-6,
        "criterion 4 FAIL: constant recovery error {const_err:e}"
    );

    // noiseless ramp input
    let ramp: Vec<(i64, f64)> = (0..300).map(|f| (f, 2.0 * f as f64)).collect();
    let out = kalman_smooth(&ramp, &cfg).unwrap();
    let ramp_err = (out[299].1 - 2.0 * 299.0).abs();
    assert!(
        ramp_err < 1e-6,
        "criterion 4 FAIL: ramp recovery error {ramp_err:e}"
    );
    println!(
        "[acceptance] criterion 4 (Kalman init + noiseless recovery): PASS \
         (constant {const_err:.1e}, ramp {ramp_err:.1e})"
    );
}

#[test]
fn criterion_05_normalization_matches_world_oracle_across_views() {
    let _guard = serial();
    let sensor = SensorConfig::noiseless();
    let mut sq_sum = 0.0;
    let mut count = 0usize;
    // 20 yaws x 10 lateral offsets; identical trajectory seed throughout,
    // so the scenes differ only in camera view.
    for i in 0..200usize {
        let yaw_deg = -5.0 + 10.0 * (i % 20) as f64 / 19.0;
        let offset = -1.0 + 2.0 * (i / 20) as f64 / 9.0;
        let cfg = ScenarioConfig {
            yaw: YawProfile::Constant(yaw_deg.to_radians()),
            cam_lateral_offset_m: offset,
            ..ScenarioConfig::default().with_label(Label::LeftToRight)
        };
        let scene = simulate_scene(&cfg, 12345).unwrap();
        let (frames, truth) = render_detections(&scene, &sensor, 999).unwrap();
        for (frame, p_true) in frames.iter().zip(&truth.p_r_world) {
            let (u_o, v_base) = baseline_position(&frame.boxes[0]);
            let u1 = marking_intercept(&frame.left_marking, v_base).unwrap();
            let u2 = marking_intercept(&frame.right_marking, v_base).unwrap();
            let p = normalize_frame(u_o, u1.min(u2), u1.max(u2)).unwrap();
            sq_sum += (p - p_true) * (p - p_true);
            count += 1;
        }
    }
    let rms = (sq_sum / count as f64).sqrt();
    assert!(
        rms <= 0.02,
        "criterion 5 FAIL: RMS deviation {rms:.4} > 0.02"
    );
    println!(
        "[acceptance] criterion 5 (view-invariant normalization, 200 scenes): PASS \
         (RMS {rms:.2e} over {count} frames)"
    );
}

#[test]
fn criterion_06_loss_identity_on_every_logged_step() {
    let _guard = serial();
    // identity on per-sample losses
    let model = PsrNet::new_random(PsrNetConfig::default(), 6).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(66);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let window: Vec<f64> = (0..24).map(|_| rng.random_range(-1.5..1.5)).collect();
        let (_, loss) = model.evaluate_loss(&window, rng.random_range(0..3)).unwrap();
        let recomposed = loss.lambda * loss.recon.iter().sum::<f64>() + loss.cross_entropy;
        worst = worst.max((loss.total - recomposed).abs());
    }

    // identity on every logged training step
    let windows: Vec<_> = (0..30)
        .map(|i| {
            let label = Label::ALL[i % 3];
            let values: Vec<f64> = (0..24)
                .map(|t| match label {
                    Label::LeftToRight => -1.0 + 1.2 * t as f64 / 23.0,
                    Label::RightToLeft => 1.0 - 1.2 * t as f64 / 23.0,
                    Label::NoIntrusion => 0.8 + 0.001 * i as f64,
                })
                .collect();
            let series = MotionSeries {
                frames: (0..24).collect(),
                values,
                label: Some(label),
            };
            laneintrude::normalize::last_window(&series).unwrap()
        })
        .collect();
    let (_, curve) = train(
        &windows,
        &PsrNetConfig::default(),
        &TrainConfig {
            epochs: 20,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    for (epoch, loss) in curve.iter().enumerate() {
        assert!((loss.lambda - 0.5).abs() < 1e-15, "lambda must default to 0.5");
        let recomposed = loss.lambda * loss.recon.iter().sum::<f64>() + loss.cross_entropy;
        let err = (loss.total - recomposed).abs();
        assert!(
            err <= 1e-12,
            "criterion 6 FAIL: epoch {epoch} identity off by {err:e}"
        );
        worst = worst.max(err);
    }
    println!(
        "[acceptance] criterion 6 (loss identity, lambda = 0.5): PASS (worst deviation {worst:.1e})"
    );
}

#[test]
fn criterion_07_order_ablation_trend_and_grid() {
    let _guard = serial();
    let samples = default_dataset();
    let model_cfg = PsrNetConfig::default();
    let pipeline = PipelineConfig::default();

    // the full 5x3 order/fold grid at the default protocol
    let grid = ablation_orders(
        &samples,
        &[0, 1, 2, 3, 4],
        &[3, 5, 7],
        &model_cfg,
        &TrainConfig::default(),
        &pipeline,
    )
    .unwrap();
    let csv = orders_csv(&grid);
    let path = std::env::temp_dir().join("laneintrude_orders_grid.csv");
    std::fs::write(&path, &csv).unwrap();
    println!("{csv}");

    // trend averaged over 5 seeds: order 4 must not trail order 0 by more
    // than 1 pp at 3-fold
    let mut order0 = Vec::new();
    let mut order4 = Vec::new();
    // the grid already holds the default-seed run
    order0.push(grid[0].cells[0].1.mean_accuracy);
    order4.push(grid[4].cells[0].1.mean_accuracy);
    for extra_seed in [1007u64, 2007, 3007, 4007] {
        let cfg = TrainConfig {
            seed: extra_seed,
            ..TrainConfig::default()
        };
        let rows = ablation_orders(&samples, &[0, 4], &[3], &model_cfg, &cfg, &pipeline).unwrap();
        order0.push(rows[0].cells[0].1.mean_accuracy);
        order4.push(rows[1].cells[0].1.mean_accuracy);
    }
    let mean0 = order0.iter().sum::<f64>() / order0.len() as f64;
    let mean4 = order4.iter().sum::<f64>() / order4.len() as f64;
    assert!(
        mean4 >= mean0 - 1.0,
        "criterion 7 FAIL: order-4 mean {mean4:.2} trails order-0 mean {mean0:.2} by more than 1 pp"
    );
    println!(
        "[acceptance] criterion 7 (order ablation): PASS \
         (5-seed 3-fold means: order 0 {mean0:.2}%, order 4 {mean4:.2}%; grid at {})",
        path.display()
    );
}

#[test]
fn criterion_08_preproc_ablation_ordering() {
    let _guard = serial();
    // yaw-randomized noisy dataset: 5 degree steering sweeps with random
    // phase on top of the default sensor noise
    let scenario = ScenarioConfig {
        yaw: YawProfile::Sine {
            amplitude: 5.0_f64.to_radians(),
        },
        ..ScenarioConfig::default()
    };
    let samples = generate_dataset(50, &scenario, &SensorConfig::default(), 99).unwrap();
    let rows = ablation_preproc(
        &samples,
        &[3],
        &PsrNetConfig::default(),
        &TrainConfig::default(),
        &PipelineConfig::default(),
    )
    .unwrap();
    let lookup = |variant: PreprocVariant| {
        rows.iter()
            .find(|r| r.variant == variant)
            .unwrap()
            .cells[0]
            .1
            .mean_accuracy
    };
    let raw = lookup(PreprocVariant::Raw);
    let normalized = lookup(PreprocVariant::Normalized);
    let filtered = lookup(PreprocVariant::NormalizedFiltered);
    let csv = preproc_csv(&rows);
    let path = std::env::temp_dir().join("laneintrude_preproc_grid.csv");
    std::fs::write(&path, &csv).unwrap();
    println!("{csv}");

    assert!(
        filtered >= normalized - 1.0,
        "criterion 8 FAIL: filtered {filtered:.2} < normalized {normalized:.2} - 1 pp"
    );
    assert!(
        normalized >= raw - 1.0,
        "criterion 8 FAIL: normalized {normalized:.2} < raw {raw:.2} - 1 pp"
    );
    assert!(
        normalized - raw >= 10.0,
        "criterion 8 FAIL: raw {raw:.2} trails normalized {normalized:.2} by less than 10 pp"
    );
    println!(
        "[acceptance] criterion 8 (preprocessing ablation under yaw): PASS \
         (raw {raw:.1}%, normalized {normalized:.1}%, filtered {filtered:.1}%)"
    );
}

#[test]
fn criterion_09_crossval_is_byte_deterministic() {
    let _guard = serial();
    let dir = std::env::temp_dir().join(format!("laneintrude_det_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bin = env!("CARGO_BIN_EXE_laneintrude");
    let data = dir.join("data.jsonl");
    let status = std::process::Command::new(bin)
        .args([
            "generate",
            "--out",
            data.to_str().unwrap(),
            "--n-per-class",
            "6",
            "--dataset-seed",
            "13",
        ])
        .status()
        .unwrap();
    assert!(status.success());

    let run = |tag: &str| {
        let metrics = dir.join(format!("metrics_{tag}.csv"));
        let confusion = dir.join(format!("confusion_{tag}.csv"));
        let loss = dir.join(format!("loss_{tag}.csv"));
        let status = std::process::Command::new(bin)
            .args([
                "crossval",
                "--data",
                data.to_str().unwrap(),
                "--k",
                "3",
                "--epochs",
                "8",
                "--metrics-out",
                metrics.to_str().unwrap(),
                "--confusion-out",
                confusion.to_str().unwrap(),
                "--loss-out",
                loss.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        (
            std::fs::read(metrics).unwrap(),
            std::fs::read(confusion).unwrap(),
            std::fs::read(loss).unwrap(),
        )
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first.0, second.0, "criterion 9 FAIL: metrics CSVs differ");
    assert_eq!(first.1, second.1, "criterion 9 FAIL: confusion CSVs differ");
    assert_eq!(first.2, second.2, "criterion 9 FAIL: loss CSVs differ");
    std::fs::remove_dir_all(&dir).ok();
    println!(
        "[acceptance] criterion 9 (byte-identical crossval reruns): PASS \
         ({} + {} + {} bytes compared)",
        first.0.len(),
        first.1.len(),
        first.2.len()
    );
}

#[test]
fn criterion_10_checkpoint_round_trip_reproduces_predictions() {
    let _guard = serial();
    let samples = generate_dataset(4, &ScenarioConfig::default(), &SensorConfig::default(), 17)
        .unwrap();
    let (prepared, failed) = prepare_dataset(&samples, &PipelineConfig::default());
    let windows: Vec<_> = prepared.iter().flat_map(|p| p.windows.iter().cloned()).collect();
    let (model, _) = train(
        &windows,
        &PsrNetConfig::default(),
        &TrainConfig {
            epochs: 15,
            ..TrainConfig::default()
        },
    )
    .unwrap();

    let mut bytes_first = Vec::new();
    model.save_checkpoint(&mut bytes_first).unwrap();
    let reloaded = PsrNet::load_checkpoint(bytes_first.as_slice()).unwrap();
    let mut bytes_second = Vec::new();
    reloaded.save_checkpoint(&mut bytes_second).unwrap();
    assert_eq!(
        bytes_first, bytes_second,
        "criterion 10 FAIL: save-load-save changed bytes"
    );

    // identical predictions on 1000 windows
    let mut rng = ChaCha12Rng::seed_from_u64(1010);
    for _ in 0..1000 {
        let window: Vec<f64> = (0..24).map(|_| rng.random_range(-2.0..2.0)).collect();
        let a = model.forward(&window).unwrap();
        let b = reloaded.forward(&window).unwrap();
        assert_eq!(a.probs, b.probs, "criterion 10 FAIL: probabilities diverge");
    }
    // and on the real evaluation path
    let out_a = evaluate(&model, &prepared, failed.len()).unwrap();
    let out_b = evaluate(&reloaded, &prepared, failed.len()).unwrap();
    assert_eq!(out_a, out_b);
    println!(
        "[acceptance] criterion 10 (checkpoint round trip, 1000 windows): PASS"
    );
}

#[test]
fn world_oracle_spot_checks() {
    // cheap cross-check that the oracle the suite leans on is sane
    let _guard = serial();
    assert_eq!(relative_position_world(0.0, -1.75, 1.75).unwrap(), 0.0);
    assert_eq!(relative_position_world(1.75, -1.75, 1.75).unwrap(), 0.5);
    println!("[acceptance] world-oracle spot checks: PASS");
}
