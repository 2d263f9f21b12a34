//! Ablation runners: reconstructor order sweep and preprocessing variants,
//! all under identical fold assignments so the comparisons are controlled.

use super::eval::{crossval_prepared, MetricsReport};
use super::train::TrainConfig;
use super::{prepare_dataset, HarnessError, PipelineConfig, PreprocVariant};
use crate::psrnet::PsrNetConfig;
use crate::scenegen::DatasetSample;

#[derive(Debug, Clone)]
pub struct OrdersRow {
    pub order: usize,
    /// One report per fold count, in the order requested.
    pub cells: Vec<(usize, MetricsReport)>,
}

/// Cross-validate one model per reconstructor order. The fold split depends
/// only on (n_samples, k, seed), so every order sees identical folds.
pub fn ablation_orders(
    samples: &[DatasetSample],
    orders: &[usize],
    folds: &[usize],
    model_cfg: &PsrNetConfig,
    train_cfg: &TrainConfig,
    pipeline_cfg: &PipelineConfig,
) -> Result<Vec<OrdersRow>, HarnessError> {
    let (prepared, failures) = prepare_dataset(samples, pipeline_cfg);
    let mut rows = Vec::with_capacity(orders.len());
    for &order in orders {
        let cfg = PsrNetConfig {
            max_order: order,
            ..model_cfg.clone()
        };
        let mut cells = Vec::with_capacity(folds.len());
        for &k in folds {
            let report = crossval_prepared(
                samples.len(),
                &prepared,
                failures.len(),
                k,
                &cfg,
                train_cfg,
            )?;
            cells.push((k, report));
        }
        rows.push(OrdersRow { order, cells });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct PreprocRow {
    pub variant: PreprocVariant,
    pub cells: Vec<(usize, MetricsReport)>,
}

/// Cross-validate the three preprocessing variants (raw pixels, normalized,
/// normalized + filtered) under identical folds.
pub fn ablation_preproc(
    samples: &[DatasetSample],
    folds: &[usize],
    model_cfg: &PsrNetConfig,
    train_cfg: &TrainConfig,
    base_pipeline: &PipelineConfig,
) -> Result<Vec<PreprocRow>, HarnessError> {
    let variants = [
        PreprocVariant::Raw,
        PreprocVariant::Normalized,
        PreprocVariant::NormalizedFiltered,
    ];
    let mut rows = Vec::with_capacity(variants.len());
    for variant in variants {
        let pipeline = PipelineConfig {
            variant,
            ..base_pipeline.clone()
        };
        let (prepared, failures) = prepare_dataset(samples, &pipeline);
        let mut cells = Vec::with_capacity(folds.len());
        for &k in folds {
            let report = crossval_prepared(
                samples.len(),
                &prepared,
                failures.len(),
                k,
                model_cfg,
                train_cfg,
            )?;
            cells.push((k, report));
        }
        rows.push(PreprocRow { variant, cells });
    }
    Ok(rows)
}
