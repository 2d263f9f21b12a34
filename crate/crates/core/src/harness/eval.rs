//! Sample-level evaluation and k-fold cross-validation.

use serde::{Deserialize, Serialize};

use super::kfold::kfold_split;
use super::train::{train, TrainConfig};
use super::{HarnessError, PipelineConfig, PreparedSample};
use crate::normalize::Window;
use crate::psrnet::{LossBreakdown, PsrNet, PsrNetConfig};
use crate::scenegen::DatasetSample;

/// Outcome of evaluating a model on a set of samples. Samples the pipeline
/// could not process count as errors in the accuracy but cannot appear in
/// the confusion matrix (there is no prediction to tabulate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub n: usize,
    pub correct: usize,
    pub failed: usize,
    pub accuracy_pct: f64,
    /// `confusion[truth][prediction]`, classes in label order.
    pub confusion: [[usize; 3]; 3],
}

/// Predict the class of one prepared sample from its last window.
pub fn predict_sample(model: &PsrNet, sample: &PreparedSample) -> Result<usize, HarnessError> {
    let fwd = model.forward(sample.last.values())?;
    Ok(argmax(&fwd.probs))
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Sample-level accuracy via last-window prediction. `failed` is the number
/// of dataset samples in this evaluation set that never produced windows.
pub fn evaluate(
    model: &PsrNet,
    samples: &[PreparedSample],
    failed: usize,
) -> Result<EvalOutcome, HarnessError> {
    evaluate_with(|s| predict_sample(model, s), samples, failed)
}

/// Same accounting with an arbitrary predictor.
pub fn evaluate_with(
    mut predict: impl FnMut(&PreparedSample) -> Result<usize, HarnessError>,
    samples: &[PreparedSample],
    failed: usize,
) -> Result<EvalOutcome, HarnessError> {
    let mut confusion = [[0usize; 3]; 3];
    let mut correct = 0usize;
    for s in samples {
        let pred = predict(s)?;
        let truth = s.label.index();
        confusion[truth][pred] += 1;
        if pred == truth {
            correct += 1;
        }
    }
    let n = samples.len() + failed;
    let accuracy_pct = if n == 0 {
        0.0
    } else {
        100.0 * correct as f64 / n as f64
    };
    Ok(EvalOutcome {
        n,
        correct,
        failed,
        accuracy_pct,
        confusion,
    })
}

/// Aggregated cross-validation metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub k: usize,
    pub seed: u64,
    pub per_fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    /// Population standard deviation over folds.
    pub std_accuracy: f64,
    pub confusion: [[usize; 3]; 3],
    pub failed_samples: usize,
    /// Per-fold, per-epoch mean training loss.
    pub fold_curves: Vec<Vec<LossBreakdown>>,
}

pub(crate) fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// k-fold cross-validation: a fresh model per fold, trained on the training
/// folds' stride windows, evaluated sample-level on the held-out fold.
pub fn crossval(
    samples: &[DatasetSample],
    k: usize,
    model_cfg: &PsrNetConfig,
    train_cfg: &TrainConfig,
    pipeline_cfg: &PipelineConfig,
) -> Result<MetricsReport, HarnessError> {
    let (prepared, failures) = super::prepare_dataset(samples, pipeline_cfg);
    crossval_prepared(samples.len(), &prepared, failures.len(), k, model_cfg, train_cfg)
}

/// Cross-validation over an already-prepared dataset (lets ablations share
/// one pipeline pass).
pub(crate) fn crossval_prepared(
    n_total: usize,
    prepared: &[PreparedSample],
    n_failed: usize,
    k: usize,
    model_cfg: &PsrNetConfig,
    train_cfg: &TrainConfig,
) -> Result<MetricsReport, HarnessError> {
    use rayon::prelude::*;

    let split = kfold_split(n_total, k, train_cfg.seed)?;
    let prepared_idx: std::collections::HashSet<usize> =
        prepared.iter().map(|p| p.index).collect();

    // Folds are independent; results are collected in fold order, so the
    // parallelism cannot change any reported number.
    let fold_results: Vec<(EvalOutcome, Vec<LossBreakdown>)> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_windows: Vec<Window> = prepared
                .iter()
                .filter(|p| split.fold_of(p.index) != fold)
                .flat_map(|p| p.windows.iter().cloned())
                .collect();
            let fold_cfg = TrainConfig {
                seed: crate::scenegen::derive_seed(train_cfg.seed, fold as u64 + 1),
                ..*train_cfg
            };
            let (model, curve) = train(&train_windows, model_cfg, &fold_cfg)?;

            let test_samples: Vec<PreparedSample> = prepared
                .iter()
                .filter(|p| split.fold_of(p.index) == fold)
                .cloned()
                .collect();
            // failures assigned to this fold count against its accuracy
            let (_, test_idx) = split.train_test(fold);
            let fold_failed = test_idx
                .iter()
                .filter(|i| !prepared_idx.contains(i))
                .count();
            let outcome = evaluate(&model, &test_samples, fold_failed)?;
            Ok((outcome, curve))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut per_fold = Vec::with_capacity(k);
    let mut fold_curves = Vec::with_capacity(k);
    let mut confusion = [[0usize; 3]; 3];
    let mut failed_total = 0usize;
    for (outcome, curve) in fold_results {
        per_fold.push(outcome.accuracy_pct);
        failed_total += outcome.failed;
        for t in 0..3 {
            for p in 0..3 {
                confusion[t][p] += outcome.confusion[t][p];
            }
        }
        fold_curves.push(curve);
    }
    debug_assert_eq!(failed_total, n_failed);
    let (mean_accuracy, std_accuracy) = mean_and_population_std(&per_fold);
    Ok(MetricsReport {
        k,
        seed: train_cfg.seed,
        per_fold_accuracy: per_fold,
        mean_accuracy,
        std_accuracy,
        confusion,
        failed_samples: failed_total,
        fold_curves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normalize::MotionSeries;
    use crate::scenegen::Label;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn prepared(label: Label, index: usize, seed: u64) -> PreparedSample {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..24)
            .map(|t| {
                let x = t as f64 / 23.0;
                match label {
                    Label::LeftToRight => -1.0 + 1.3 * x + rng.random_range(-0.02..0.02),
                    Label::RightToLeft => 1.0 - 1.3 * x + rng.random_range(-0.02..0.02),
                    Label::NoIntrusion => 0.8 + rng.random_range(-0.02..0.02),
                }
            })
            .collect();
        let series = MotionSeries {
            frames: (0..24).collect(),
            values,
            label: Some(label),
        };
        let windows = crate::normalize::make_windows(&series, 8).unwrap();
        let last = crate::normalize::last_window(&series).unwrap();
        PreparedSample {
            index,
            label,
            rows: Vec::new(),
            series,
            windows,
            last,
        }
    }

    #[test]
    fn uniform_random_predictor_scores_near_chance() {
        // Monte Carlo: a predictor drawing classes uniformly at random on
        // balanced data lands at 33.3% over 10k samples.
        let samples: Vec<PreparedSample> = (0..10_002)
            .map(|i| prepared(Label::ALL[i % 3], i, i as u64))
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let out = super::evaluate_with(|_| Ok(rng.random_range(0..3)), &samples, 0).unwrap();
        assert!(
            (out.accuracy_pct - 33.33).abs() < 2.0,
            "chance-level accuracy expected, got {:.1}%",
            out.accuracy_pct
        );
    }

    #[test]
    fn perfect_predictions_give_diagonal_confusion() {
        // Train on the toy separable distribution, then evaluate on fresh
        // draws from it.
        let train_windows: Vec<Window> = (0..30)
            .map(|i| prepared(Label::ALL[i % 3], i, i as u64).last.clone())
            .collect();
        let cfg = TrainConfig {
            epochs: 40,
            ..TrainConfig::default()
        };
        let (model, _) = train(&train_windows, &PsrNetConfig::default(), &cfg).unwrap();
        let samples: Vec<PreparedSample> = (100..130)
            .map(|i| prepared(Label::ALL[i % 3], i, i as u64))
            .collect();
        let out = evaluate(&model, &samples, 0).unwrap();
        assert_eq!(out.accuracy_pct, 100.0);
        for t in 0..3 {
            for p in 0..3 {
                if t != p {
                    assert_eq!(out.confusion[t][p], 0);
                }
            }
        }
    }

    #[test]
    fn empty_class_in_test_fold_leaves_zero_row() {
        let model = PsrNet::new_random(PsrNetConfig::default(), 0).unwrap();
        let samples: Vec<PreparedSample> = (0..10)
            .map(|i| prepared(Label::LeftToRight, i, i as u64))
            .collect();
        let out = evaluate(&model, &samples, 0).unwrap();
        assert_eq!(out.confusion[Label::RightToLeft.index()], [0, 0, 0]);
        assert_eq!(out.confusion[Label::NoIntrusion.index()], [0, 0, 0]);
    }

    #[test]
    fn failed_samples_count_against_accuracy() {
        let model = PsrNet::new_random(PsrNetConfig::default(), 0).unwrap();
        let samples: Vec<PreparedSample> = Vec::new();
        let out = evaluate(&model, &samples, 5).unwrap();
        assert_eq!(out.n, 5);
        assert_eq!(out.accuracy_pct, 0.0);
    }

    #[test]
    fn mean_std_are_recomputable() {
        let (mean, std) = mean_and_population_std(&[98.0, 96.0, 100.0]);
        assert!((mean - 98.0).abs() < 1e-9);
        let expected = ((4.0 + 0.0 + 4.0) / 3.0_f64).sqrt();
        assert!((std - expected).abs() < 1e-9);
    }
}
