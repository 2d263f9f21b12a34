//! Reverse-mode gradients of the joint loss with respect to every
//! parameter. The reconstructor parameters receive both the weighted MSE
//! path through the heads and the classifier path through the phase-space
//! map.

use super::forward::{classifier_dims, Forward};
use super::{PsrNet, PsrNetError};

impl PsrNet {
    /// Gradient of the joint loss for one (window, label) sample, as a flat
    /// vector aligned with the parameter layout.
    pub fn backward(&self, fwd: &Forward, label: usize) -> Result<Vec<f64>, PsrNetError> {
        let cfg = &self.config;
        if label >= cfg.classes {
            return Err(PsrNetError::ShapeMismatch {
                expected: format!("label < {}", cfg.classes),
                got: format!("{label}"),
            });
        }
        let dims = classifier_dims(cfg);
        let (c1, c2) = cfg.classifier_channels;
        let t_len = cfg.window_len;
        let mut grads = vec![0.0; self.layout.total];

        // softmax + cross-entropy
        let mut dlogits = fwd.probs.clone();
        dlogits[label] -= 1.0;

        // fully connected
        let fc_w = self.slice(&self.layout.fc_w);
        let mut dpool2 = vec![0.0; dims.flat_len];
        {
            let fc_w_g = &mut grads[self.layout.fc_w.clone()];
            for (j, &dl) in dlogits.iter().enumerate() {
                let row = j * dims.flat_len;
                for (i, &x) in fwd.pool2.iter().enumerate() {
                    fc_w_g[row + i] += dl * x;
                }
            }
        }
        {
            let fc_b_g = &mut grads[self.layout.fc_b.clone()];
            for (j, &dl) in dlogits.iter().enumerate() {
                fc_b_g[j] += dl;
            }
        }
        for (i, d) in dpool2.iter_mut().enumerate() {
            *d = dlogits
                .iter()
                .enumerate()
                .map(|(j, &dl)| fc_w[j * dims.flat_len + i] * dl)
                .sum();
        }

        // pool2 + ReLU -> conv2 pre-activations
        let mut dconv2 = vec![0.0; c2 * dims.pool1_h * dims.pool1_w];
        unpool_relu(
            &dpool2,
            &fwd.pool2_argmax,
            &fwd.conv2_pre,
            c2,
            dims.pool1_h * dims.pool1_w,
            dims.pool2_h * dims.pool2_w,
            &mut dconv2,
        );

        // conv2 backward
        let mut dpool1 = vec![0.0; c1 * dims.pool1_h * dims.pool1_w];
        conv3x3_input_grads(
            &dconv2,
            c1,
            dims.pool1_h,
            dims.pool1_w,
            self.slice(&self.layout.conv2_w),
            c2,
            &mut dpool1,
        );
        {
            let mut wgrads = vec![0.0; self.layout.conv2_w.len()];
            let mut bgrads = vec![0.0; self.layout.conv2_b.len()];
            conv3x3_param_grads(
                &fwd.pool1,
                &dconv2,
                c1,
                dims.pool1_h,
                dims.pool1_w,
                c2,
                &mut wgrads,
                &mut bgrads,
            );
            grads[self.layout.conv2_w.clone()].copy_from_slice(&wgrads);
            grads[self.layout.conv2_b.clone()].copy_from_slice(&bgrads);
        }

        // pool1 + ReLU -> conv1 pre-activations
        let mut dconv1 = vec![0.0; c1 * dims.map_h * dims.map_w];
        unpool_relu(
            &dpool1,
            &fwd.pool1_argmax,
            &fwd.conv1_pre,
            c1,
            dims.map_h * dims.map_w,
            dims.pool1_h * dims.pool1_w,
            &mut dconv1,
        );

        // conv1 backward: parameter grads and the map gradient
        let mut dmap = vec![0.0; dims.map_h * dims.map_w];
        conv3x3_input_grads(
            &dconv1,
            1,
            dims.map_h,
            dims.map_w,
            self.slice(&self.layout.conv1_w),
            c1,
            &mut dmap,
        );
        {
            let mut wgrads = vec![0.0; self.layout.conv1_w.len()];
            let mut bgrads = vec![0.0; self.layout.conv1_b.len()];
            conv3x3_param_grads(
                &fwd.map.data,
                &dconv1,
                1,
                dims.map_h,
                dims.map_w,
                c1,
                &mut wgrads,
                &mut bgrads,
            );
            grads[self.layout.conv1_w.clone()].copy_from_slice(&wgrads);
            grads[self.layout.conv1_b.clone()].copy_from_slice(&bgrads);
        }

        // Reconstructor bank: classifier path (through the map rows) plus
        // the weighted MSE path (through the heads).
        let rc = cfg.recon_channels;
        let lag = |t: usize, j: usize| -> f64 {
            let idx = t as isize - 1 - j as isize;
            if idx >= 0 {
                fwd.window[idx as usize]
            } else {
                0.0
            }
        };
        for k in 1..=cfg.max_order {
            let ps = &fwd.recon.ps[k - 1];
            let pred = &fwd.recon.predictions[k - 1];
            let head_w = self.slice(&self.layout.head_w[k - 1]);

            // d(lambda * L1k)/d(pred_t)
            let dpred: Vec<f64> = pred
                .iter()
                .zip(&fwd.window)
                .map(|(p_hat, p)| cfg.lambda * 2.0 / t_len as f64 * (p_hat - p))
                .collect();

            {
                let hw_g = &mut grads[self.layout.head_w[k - 1].clone()];
                for c in 0..rc {
                    hw_g[c] += dpred
                        .iter()
                        .enumerate()
                        .map(|(t, &d)| d * ps[c * t_len + t])
                        .sum::<f64>();
                }
            }
            grads[self.layout.head_b[k - 1].clone()][0] += dpred.iter().sum::<f64>();

            // combined gradient on the tanh outputs
            let map_row0 = 1 + (k - 1) * rc;
            let gw = self.layout.gamma_w[k - 1].clone();
            let gb = self.layout.gamma_b[k - 1].clone();
            let mut gw_grads = vec![0.0; gw.len()];
            let mut gb_grads = vec![0.0; gb.len()];
            for c in 0..rc {
                let map_row = &dmap[(map_row0 + c) * t_len..(map_row0 + c + 1) * t_len];
                for t in 0..t_len {
                    let a = ps[c * t_len + t];
                    let dps = map_row[t] + dpred[t] * head_w[c];
                    let dz = dps * (1.0 - a * a);
                    for j in 0..k {
                        gw_grads[c * k + j] += dz * lag(t, j);
                    }
                    gb_grads[c] += dz;
                }
            }
            grads[gw].copy_from_slice(&gw_grads);
            grads[gb].copy_from_slice(&gb_grads);
        }

        Ok(grads)
    }
}

/// Result of a finite-difference sweep over every parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckReport {
    pub checked: usize,
    /// Parameters whose +-eps perturbation flips a pooling argmax or a ReLU
    /// sign. The loss has a kink there, the two-sided difference straddles
    /// it, and no single gradient value is correct; they are excluded.
    pub skipped_nonsmooth: usize,
    pub worst_relative_error: f64,
}

impl PsrNet {
    /// Compare the backward gradients against central finite differences of
    /// the joint loss, parameter by parameter. The probe only evaluates the
    /// forward pass, so it is an independent oracle for `backward`.
    pub fn gradient_check(
        &self,
        window: &[f64],
        label: usize,
        eps: f64,
    ) -> Result<GradientCheckReport, PsrNetError> {
        let fwd = self.forward(window)?;
        let grads = self.backward(&fwd, label)?;
        let mut probe = self.clone();
        let mut worst: f64 = 0.0;
        let mut skipped = 0usize;
        for idx in 0..self.param_count() {
            let original = probe.params()[idx];
            probe.params_mut()[idx] = original + eps;
            let (fwd_p, loss_p) = probe.evaluate_loss(window, label)?;
            probe.params_mut()[idx] = original - eps;
            let (fwd_m, loss_m) = probe.evaluate_loss(window, label)?;
            probe.params_mut()[idx] = original;

            if !same_activation_structure(&fwd_p, &fwd_m) {
                skipped += 1;
                continue;
            }
            let fd = (loss_p.total - loss_m.total) / (2.0 * eps);
            let g = grads[idx];
            let err = (g - fd).abs();
            let denom = g.abs().max(fd.abs());
            if err > 1e-8 && denom > 0.0 {
                worst = worst.max(err / denom);
            }
        }
        Ok(GradientCheckReport {
            checked: self.param_count() - skipped,
            skipped_nonsmooth: skipped,
            worst_relative_error: worst,
        })
    }
}

/// True when two forward passes share every pooling argmax and every ReLU
/// activation sign, i.e. the loss is smooth between them.
fn same_activation_structure(a: &Forward, b: &Forward) -> bool {
    a.pool1_argmax == b.pool1_argmax
        && a.pool2_argmax == b.pool2_argmax
        && a.conv1_pre
            .iter()
            .zip(&b.conv1_pre)
            .all(|(x, y)| (*x > 0.0) == (*y > 0.0))
        && a.conv2_pre
            .iter()
            .zip(&b.conv2_pre)
            .all(|(x, y)| (*x > 0.0) == (*y > 0.0))
}

/// Route pooled gradients back through argmax and the ReLU mask.
fn unpool_relu(
    dpooled: &[f64],
    argmax: &[usize],
    pre: &[f64],
    channels: usize,
    in_plane: usize,
    out_plane: usize,
    dinput: &mut [f64],
) {
    for c in 0..channels {
        for o in 0..out_plane {
            let d = dpooled[c * out_plane + o];
            if d == 0.0 {
                continue;
            }
            let src = c * in_plane + argmax[c * out_plane + o];
            if pre[src] > 0.0 {
                dinput[src] += d;
            }
        }
    }
}

/// Dot product with four independent accumulators so the loop vectorizes;
/// summation order is fixed, so results stay deterministic per build.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// Input gradient of the 3x3 same-padding convolution:
/// column gradients `dcols[q] = sum_o w[o][q] * dz[o]` scattered back
/// through the im2col mapping.
fn conv3x3_input_grads(
    dz: &[f64],
    ic: usize,
    h: usize,
    w: usize,
    weights: &[f64],
    oc: usize,
    dinput: &mut [f64],
) {
    let n = h * w;
    let kdim = ic * 9;
    let mut dcols = vec![0.0; kdim * n];
    for o in 0..oc {
        let dz_row = &dz[o * n..(o + 1) * n];
        for q in 0..kdim {
            let weight = weights[o * kdim + q];
            if weight == 0.0 {
                continue;
            }
            let drow = &mut dcols[q * n..(q + 1) * n];
            for (d, z) in drow.iter_mut().zip(dz_row) {
                *d += weight * z;
            }
        }
    }
    // col2im: accumulate each unrolled row back into the padded image.
    for i in 0..ic {
        let din_plane = i * n;
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
                    let src = row + y * w + x_lo;
                    let dst = din_plane + iy * w + src_off;
                    let dst_slice = &mut dinput[dst..dst + len];
                    let src_slice = &dcols[src..src + len];
                    for (d, s) in dst_slice.iter_mut().zip(src_slice) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// Weight and bias gradients of the 3x3 same-padding convolution.
fn conv3x3_param_grads(
    input: &[f64],
    dz: &[f64],
    ic: usize,
    h: usize,
    w: usize,
    oc: usize,
    dweights: &mut [f64],
    dbiases: &mut [f64],
) {
    let n = h * w;
    let kdim = ic * 9;
    let mut cols = Vec::new();
    super::forward::im2col3x3(input, ic, h, w, &mut cols);
    for o in 0..oc {
        let dz_row = &dz[o * n..(o + 1) * n];
        dbiases[o] += dz_row.iter().sum::<f64>();
        for q in 0..kdim {
            dweights[o * kdim + q] += dot(dz_row, &cols[q * n..(q + 1) * n]);
        }
    }
}
