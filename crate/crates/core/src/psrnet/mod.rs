//! The phase-space reconstruction network.
//!
//! A bank of k-order 1D-convolutional reconstructors (k = 1..n) embeds the
//! motion time series into latent phase spaces; linear heads predict each
//! observation from its own lags (MSE-supervised); the raw series plus all
//! phase-space maps are stacked into one 2D feature map and classified by a
//! small 2-conv network. Training is plain reverse-mode gradients plus Adam,
//! all in f64 — the model is tiny and the gradient tests are strict.

mod adam;
mod backward;
mod forward;

pub use adam::{adam_step, AdamParams, AdamState};
pub use backward::GradientCheckReport;
pub use forward::{classifier_dims, ClassifierDims, Forward, PhaseSpaceMap, ReconForward};

use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PsrNetError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsrNetConfig {
    /// Maximum reconstructor order n; 0 disables the reconstructor bank
    /// entirely and classifies the raw series.
    pub max_order: usize,
    /// Latent channels per reconstructor.
    pub recon_channels: usize,
    /// Channels of the two classifier conv layers.
    pub classifier_channels: (usize, usize),
    /// Input window length in frames.
    pub window_len: usize,
    /// Number of action classes.
    pub classes: usize,
    /// Weight of the reconstruction losses in the joint loss.
    pub lambda: f64,
}

impl Default for PsrNetConfig {
    fn default() -> Self {
        Self {
            max_order: 4,
            recon_channels: 8,
            classifier_channels: (16, 32),
            window_len: 24,
            classes: 3,
            lambda: 0.5,
        }
    }
}

impl PsrNetConfig {
    pub fn validate(&self) -> Result<(), PsrNetError> {
        if self.window_len <= self.max_order {
            return Err(PsrNetError::InvalidConfig(format!(
                "window_len {} must exceed max_order {}",
                self.window_len, self.max_order
            )));
        }
        if self.recon_channels == 0 && self.max_order > 0 {
            return Err(PsrNetError::InvalidConfig("recon_channels must be > 0".into()));
        }
        if self.classifier_channels.0 == 0 || self.classifier_channels.1 == 0 {
            return Err(PsrNetError::InvalidConfig("classifier channels must be > 0".into()));
        }
        if self.classes < 2 {
            return Err(PsrNetError::InvalidConfig("need at least 2 classes".into()));
        }
        if self.lambda < 0.0 {
            return Err(PsrNetError::InvalidConfig("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

/// Offsets of every parameter tensor inside the flat parameter vector.
/// The order here is the documented checkpoint order.
#[derive(Debug, Clone)]
pub(crate) struct ParamLayout {
    /// Per order k (0-based index k-1): kernel, recon_channels x k.
    pub gamma_w: Vec<Range<usize>>,
    pub gamma_b: Vec<Range<usize>>,
    /// Per order: linear head recon_channels -> 1 plus bias.
    pub head_w: Vec<Range<usize>>,
    pub head_b: Vec<Range<usize>>,
    pub conv1_w: Range<usize>,
    pub conv1_b: Range<usize>,
    pub conv2_w: Range<usize>,
    pub conv2_b: Range<usize>,
    pub fc_w: Range<usize>,
    pub fc_b: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &PsrNetConfig) -> Self {
        let rc = cfg.recon_channels;
        let (c1, c2) = cfg.classifier_channels;
        let dims = classifier_dims(cfg);
        let mut off = 0usize;
        let mut take = |len: usize| {
            let r = off..off + len;
            off += len;
            r
        };
        let mut gamma_w = Vec::new();
        let mut gamma_b = Vec::new();
        let mut head_w = Vec::new();
        let mut head_b = Vec::new();
        for k in 1..=cfg.max_order {
            gamma_w.push(take(rc * k));
            gamma_b.push(take(rc));
        }
        for _ in 1..=cfg.max_order {
            head_w.push(take(rc));
            head_b.push(take(1));
        }
        let conv1_w = take(c1 * 9);
        let conv1_b = take(c1);
        let conv2_w = take(c2 * c1 * 9);
        let conv2_b = take(c2);
        let fc_w = take(cfg.classes * dims.flat_len);
        let fc_b = take(cfg.classes);
        ParamLayout {
            gamma_w,
            gamma_b,
            head_w,
            head_b,
            conv1_w,
            conv1_b,
            conv2_w,
            conv2_b,
            fc_w,
            fc_b,
            total: off,
        }
    }
}

/// The model: config plus one flat parameter vector.
#[derive(Debug, Clone)]
pub struct PsrNet {
    config: PsrNetConfig,
    pub(crate) layout: ParamLayout,
    params: Vec<f64>,
}

impl PsrNet {
    /// Fresh model with Xavier-uniform weights and zero biases.
    pub fn new_random(config: PsrNetConfig, seed: u64) -> Result<Self, PsrNetError> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut init = |range: &Range<usize>, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range.clone()] {
                *p = rng.random_range(-limit..limit);
            }
        };
        let rc = config.recon_channels;
        let (c1, c2) = config.classifier_channels;
        let dims = classifier_dims(&config);
        for (i, r) in layout.gamma_w.iter().enumerate() {
            init(r, i + 1, rc);
        }
        for r in &layout.head_w {
            init(r, rc, 1);
        }
        init(&layout.conv1_w, 9, c1 * 9);
        init(&layout.conv2_w, c1 * 9, c2 * 9);
        init(&layout.fc_w, dims.flat_len, config.classes);
        Ok(Self { config, layout, params })
    }

    /// All-zero parameters; useful for the degenerate-behavior tests.
    pub fn new_zeroed(config: PsrNetConfig) -> Result<Self, PsrNetError> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let params = vec![0.0; layout.total];
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &PsrNetConfig {
        &self.config
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub(crate) fn slice(&self, r: &Range<usize>) -> &[f64] {
        &self.params[r.clone()]
    }

    /// Serialize as versioned JSON: config plus the flat parameter vector in
    /// layout order. The encoding round-trips byte-stably.
    pub fn save_checkpoint<W: Write>(&self, mut w: W) -> Result<(), PsrNetError> {
        let file = CheckpointFile {
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            params: self.params.clone(),
        };
        serde_json::to_writer(&mut w, &file).map_err(|e| PsrNetError::Checkpoint(e.to_string()))?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn load_checkpoint<R: Read>(r: R) -> Result<Self, PsrNetError> {
        let file: CheckpointFile =
            serde_json::from_reader(r).map_err(|e| PsrNetError::Checkpoint(e.to_string()))?;
        if file.version != CHECKPOINT_VERSION {
            return Err(PsrNetError::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                file.version
            )));
        }
        file.config.validate()?;
        let layout = ParamLayout::new(&file.config);
        if file.params.len() != layout.total {
            return Err(PsrNetError::Checkpoint(format!(
                "parameter count {} does not match config ({})",
                file.params.len(),
                layout.total
            )));
        }
        if file.params.iter().any(|p| !p.is_finite()) {
            return Err(PsrNetError::Checkpoint("non-finite parameter".into()));
        }
        Ok(Self {
            config: file.config,
            layout,
            params: file.params,
        })
    }
}

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    version: u32,
    config: PsrNetConfig,
    params: Vec<f64>,
}

/// Per-sample loss terms. `total` is always `lambda * sum(recon) + cross_entropy`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// MSE of each k-order head, k = 1..n.
    pub recon: Vec<f64>,
    pub cross_entropy: f64,
    pub lambda: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(recon: Vec<f64>, cross_entropy: f64, lambda: f64) -> Self {
        let total = lambda * recon.iter().sum::<f64>() + cross_entropy;
        Self {
            recon,
            cross_entropy,
            lambda,
            total,
        }
    }

    /// Elementwise mean of several breakdowns (e.g. across an epoch).
    pub fn mean(items: &[LossBreakdown]) -> Option<LossBreakdown> {
        let first = items.first()?;
        let n = items.len() as f64;
        let mut recon = vec![0.0; first.recon.len()];
        let mut ce = 0.0;
        for it in items {
            for (acc, r) in recon.iter_mut().zip(&it.recon) {
                *acc += r / n;
            }
            ce += it.cross_entropy / n;
        }
        Some(LossBreakdown::new(recon, ce, first.lambda))
    }
}
