//! Forward pass: reconstructor bank, phase-space assembly, classifier.
//! Everything the backward pass needs is cached in [`Forward`].

use super::{LossBreakdown, PsrNet, PsrNetConfig, PsrNetError};

/// Spatial sizes through the classifier. Pooling windows are 2x2 stride 2
/// with edges clipped (ceil semantics), so a 1-row map (order 0) survives
/// the stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierDims {
    pub map_h: usize,
    pub map_w: usize,
    pub pool1_h: usize,
    pub pool1_w: usize,
    pub pool2_h: usize,
    pub pool2_w: usize,
    pub flat_len: usize,
}

pub fn classifier_dims(cfg: &PsrNetConfig) -> ClassifierDims {
    let map_h = 1 + cfg.max_order * cfg.recon_channels;
    let map_w = cfg.window_len;
    let pool1_h = map_h.div_ceil(2);
    let pool1_w = map_w.div_ceil(2);
    let pool2_h = pool1_h.div_ceil(2);
    let pool2_w = pool1_w.div_ceil(2);
    ClassifierDims {
        map_h,
        map_w,
        pool1_h,
        pool1_w,
        pool2_h,
        pool2_w,
        flat_len: cfg.classifier_channels.1 * pool2_h * pool2_w,
    }
}

/// Latent phase-space maps and per-order predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconForward {
    /// Per order k: recon_channels x window_len, row-major `[c][t]`.
    pub ps: Vec<Vec<f64>>,
    /// Per order k: predicted observation at every t.
    pub predictions: Vec<Vec<f64>>,
}

/// The stacked classifier input: raw series in channel 0, then the n
/// phase-space maps. Stored row-major `[channel][t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceMap {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl PhaseSpaceMap {
    pub fn row(&self, channel: usize) -> &[f64] {
        &self.data[channel * self.len..(channel + 1) * self.len]
    }
}

/// Full cached forward pass for one window.
#[derive(Debug, Clone)]
pub struct Forward {
    pub window: Vec<f64>,
    pub recon: ReconForward,
    pub map: PhaseSpaceMap,
    /// Pre-activation conv outputs (ReLU is recomputed from these).
    pub conv1_pre: Vec<f64>,
    pub pool1: Vec<f64>,
    pub pool1_argmax: Vec<usize>,
    pub conv2_pre: Vec<f64>,
    pub pool2: Vec<f64>,
    pub pool2_argmax: Vec<usize>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Unrolled 3x3 patches of a zero-padded ic x h x w image: row q = (i, ky, kx)
/// holds `in[i][y+ky-1][x+kx-1]` for every output position p = (y, x).
/// Turns the convolutions into long-row matrix products.
pub(crate) fn im2col3x3(input: &[f64], ic: usize, h: usize, w: usize, cols: &mut Vec<f64>) {
    let n = h * w;
    cols.clear();
    cols.resize(ic * 9 * n, 0.0);
    for i in 0..ic {
        let in_plane = i * n;
        for ky in 0..3usize {
            for kx in 0..3usize {
                let row = ((i * 3 + ky) * 3 + kx) * n;
                let y_lo = 1usize.saturating_sub(ky);
                let y_hi = (h + 1 - ky).min(h);
                let x_lo = 1usize.saturating_sub(kx);
                let x_hi = (w + 1 - kx).min(w);
                let src_off = x_lo + kx - 1;
                let len = x_hi - x_lo;
                for y in y_lo..y_hi {
                    let iy = y + ky - 1;
                    let dst = row + y * w + x_lo;
                    let src = in_plane + iy * w + src_off;
                    cols[dst..dst + len].copy_from_slice(&input[src..src + len]);
                }
            }
        }
    }
}

/// `out[o] = bias[o] + sum_q weights[o][q] * cols[q]`, accumulated in
/// ascending q so the result is bit-identical to the nested-loop form.
pub(crate) fn gemm_bias(
    weights: &[f64],
    biases: &[f64],
    oc: usize,
    kdim: usize,
    cols: &[f64],
    n: usize,
    out: &mut [f64],
) {
    for o in 0..oc {
        let out_row = &mut out[o * n..(o + 1) * n];
        out_row.fill(biases[o]);
        for q in 0..kdim {
            let a = weights[o * kdim + q];
            let col_row = &cols[q * n..(q + 1) * n];
            for (dst, src) in out_row.iter_mut().zip(col_row) {
                *dst += a * src;
            }
        }
    }
}

/// 3x3 same-padding convolution: `input` is ic x h x w, `out` oc x h x w.
/// Weights are `[oc][ic][ky][kx]`, flattened.
pub(crate) fn conv3x3_forward(
    input: &[f64],
    ic: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    biases: &[f64],
    oc: usize,
    out: &mut [f64],
) {
    let mut cols = Vec::new();
    im2col3x3(input, ic, h, w, &mut cols);
    gemm_bias(weights, biases, oc, ic * 9, &cols, h * w, out);
}

/// 2x2 stride-2 max pooling with edge-clipped windows over ReLU(input).
/// Records the argmax source index (within the channel plane) per output.
fn maxpool2_relu(
    input: &[f64],
    channels: usize,
    h: usize,
    w: usize,
    out: &mut [f64],
    argmax: &mut [usize],
) {
    let ph = h.div_ceil(2);
    let pw = w.div_ceil(2);
    let plane = h * w;
    let out_plane = ph * pw;
    for c in 0..channels {
        for oy in 0..ph {
            for ox in 0..pw {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0usize;
                for y in (2 * oy)..(2 * oy + 2).min(h) {
                    for x in (2 * ox)..(2 * ox + 2).min(w) {
                        let idx = y * w + x;
                        let v = input[c * plane + idx].max(0.0);
                        if v > best {
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                out[c * out_plane + oy * pw + ox] = best;
                argmax[c * out_plane + oy * pw + ox] = best_idx;
            }
        }
    }
}

impl PsrNet {
    /// Run the reconstructor bank: for each order k, the latent map
    /// `PS[c][t] = tanh(b_c + sum_j W[c][j] * p_{t-1-j})` over zero-padded
    /// lags, and the head prediction for every t.
    pub fn reconstructor_forward(&self, window: &[f64]) -> ReconForward {
        let cfg = &self.config;
        let t_len = cfg.window_len;
        debug_assert_eq!(window.len(), t_len);
        let rc = cfg.recon_channels;
        let mut ps = Vec::with_capacity(cfg.max_order);
        let mut predictions = Vec::with_capacity(cfg.max_order);
        let lag = |t: usize, j: usize| -> f64 {
            // p_{t-1-j}, zero before the window start
            let idx = t as isize - 1 - j as isize;
            if idx >= 0 {
                window[idx as usize]
            } else {
                0.0
            }
        };
        for k in 1..=cfg.max_order {
            let w = self.slice(&self.layout.gamma_w[k - 1]);
            let b = self.slice(&self.layout.gamma_b[k - 1]);
            let hw = self.slice(&self.layout.head_w[k - 1]);
            let hb = self.slice(&self.layout.head_b[k - 1])[0];
            let mut map = vec![0.0; rc * t_len];
            let mut pred = vec![0.0; t_len];
            for t in 0..t_len {
                let mut p_hat = hb;
                for c in 0..rc {
                    let mut z = b[c];
                    for j in 0..k {
                        z += w[c * k + j] * lag(t, j);
                    }
                    let a = z.tanh();
                    map[c * t_len + t] = a;
                    p_hat += hw[c] * a;
                }
                pred[t] = p_hat;
            }
            ps.push(map);
            predictions.push(pred);
        }
        ReconForward { ps, predictions }
    }

    /// Stack the raw series and the latent maps into the classifier input.
    /// Channel 0 is the window itself, bit-exact; predictions are not part
    /// of the map.
    pub fn assemble_phase_space(
        &self,
        window: &[f64],
        recon: &ReconForward,
    ) -> Result<PhaseSpaceMap, PsrNetError> {
        let cfg = &self.config;
        let t_len = cfg.window_len;
        if window.len() != t_len {
            return Err(PsrNetError::ShapeMismatch {
                expected: format!("window of {t_len}"),
                got: format!("{}", window.len()),
            });
        }
        if recon.ps.len() != cfg.max_order {
            return Err(PsrNetError::ShapeMismatch {
                expected: format!("{} phase-space maps", cfg.max_order),
                got: format!("{}", recon.ps.len()),
            });
        }
        let channels = 1 + cfg.max_order * cfg.recon_channels;
        let mut data = Vec::with_capacity(channels * t_len);
        data.extend_from_slice(window);
        for map in &recon.ps {
            if map.len() != cfg.recon_channels * t_len {
                return Err(PsrNetError::ShapeMismatch {
                    expected: format!("{} x {t_len} map", cfg.recon_channels),
                    got: format!("{} values", map.len()),
                });
            }
            data.extend_from_slice(map);
        }
        Ok(PhaseSpaceMap {
            channels,
            len: t_len,
            data,
        })
    }

    /// Classifier probabilities for a phase-space map.
    pub fn classifier_forward(&self, map: &PhaseSpaceMap) -> Result<Vec<f64>, PsrNetError> {
        let (_, _, probs) = self.classifier_with_caches(map)?.into_probs();
        Ok(probs)
    }

    fn classifier_with_caches(&self, map: &PhaseSpaceMap) -> Result<ClassifierCaches, PsrNetError> {
        let cfg = &self.config;
        let dims = classifier_dims(cfg);
        if map.channels != dims.map_h || map.len != dims.map_w {
            return Err(PsrNetError::ShapeMismatch {
                expected: format!("{} x {} map", dims.map_h, dims.map_w),
                got: format!("{} x {}", map.channels, map.len),
            });
        }
        let (c1, c2) = cfg.classifier_channels;
        let (h, w) = (dims.map_h, dims.map_w);

        let mut conv1_pre = vec![0.0; c1 * h * w];
        conv3x3_forward(
            &map.data,
            1,
            h,
            w,
            self.slice(&self.layout.conv1_w),
            self.slice(&self.layout.conv1_b),
            c1,
            &mut conv1_pre,
        );
        let (p1h, p1w) = (dims.pool1_h, dims.pool1_w);
        let mut pool1 = vec![0.0; c1 * p1h * p1w];
        let mut pool1_argmax = vec![0usize; c1 * p1h * p1w];
        maxpool2_relu(&conv1_pre, c1, h, w, &mut pool1, &mut pool1_argmax);

        let mut conv2_pre = vec![0.0; c2 * p1h * p1w];
        conv3x3_forward(
            &pool1,
            c1,
            p1h,
            p1w,
            self.slice(&self.layout.conv2_w),
            self.slice(&self.layout.conv2_b),
            c2,
            &mut conv2_pre,
        );
        let (p2h, p2w) = (dims.pool2_h, dims.pool2_w);
        let mut pool2 = vec![0.0; c2 * p2h * p2w];
        let mut pool2_argmax = vec![0usize; c2 * p2h * p2w];
        maxpool2_relu(&conv2_pre, c2, p1h, p1w, &mut pool2, &mut pool2_argmax);

        let fc_w = self.slice(&self.layout.fc_w);
        let fc_b = self.slice(&self.layout.fc_b);
        let mut logits = vec![0.0; cfg.classes];
        for (j, logit) in logits.iter_mut().enumerate() {
            let row = &fc_w[j * dims.flat_len..(j + 1) * dims.flat_len];
            *logit = fc_b[j]
                + row
                    .iter()
                    .zip(&pool2)
                    .map(|(w, x)| w * x)
                    .sum::<f64>();
        }
        let probs = softmax(&logits);
        Ok(ClassifierCaches {
            conv1_pre,
            pool1,
            pool1_argmax,
            conv2_pre,
            pool2,
            pool2_argmax,
            logits,
            probs,
        })
    }

    /// Full forward pass with caches for the backward pass.
    pub fn forward(&self, window: &[f64]) -> Result<Forward, PsrNetError> {
        if window.len() != self.config.window_len {
            return Err(PsrNetError::ShapeMismatch {
                expected: format!("window of {}", self.config.window_len),
                got: format!("{}", window.len()),
            });
        }
        let recon = self.reconstructor_forward(window);
        let map = self.assemble_phase_space(window, &recon)?;
        let caches = self.classifier_with_caches(&map)?;
        Ok(Forward {
            window: window.to_vec(),
            recon,
            map,
            conv1_pre: caches.conv1_pre,
            pool1: caches.pool1,
            pool1_argmax: caches.pool1_argmax,
            conv2_pre: caches.conv2_pre,
            pool2: caches.pool2,
            pool2_argmax: caches.pool2_argmax,
            logits: caches.logits,
            probs: caches.probs,
        })
    }

    /// Joint loss of a forward pass against the true label.
    pub fn loss(&self, fwd: &Forward, label: usize) -> LossBreakdown {
        let t_len = self.config.window_len as f64;
        let recon: Vec<f64> = fwd
            .recon
            .predictions
            .iter()
            .map(|pred| {
                pred.iter()
                    .zip(&fwd.window)
                    .map(|(p_hat, p)| (p_hat - p) * (p_hat - p))
                    .sum::<f64>()
                    / t_len
            })
            .collect();
        let ce = -fwd.probs[label].max(f64::MIN_POSITIVE).ln();
        LossBreakdown::new(recon, ce, self.config.lambda)
    }

    /// Convenience: forward + loss.
    pub fn evaluate_loss(&self, window: &[f64], label: usize) -> Result<(Forward, LossBreakdown), PsrNetError> {
        let fwd = self.forward(window)?;
        let loss = self.loss(&fwd, label);
        Ok((fwd, loss))
    }
}

struct ClassifierCaches {
    conv1_pre: Vec<f64>,
    pool1: Vec<f64>,
    pool1_argmax: Vec<usize>,
    conv2_pre: Vec<f64>,
    pool2: Vec<f64>,
    pool2_argmax: Vec<usize>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

impl ClassifierCaches {
    fn into_probs(self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (self.pool2, self.logits, self.probs)
    }
}
