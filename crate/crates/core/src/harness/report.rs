//! Deterministic emission of metrics: CSV, human-readable tables, run
//! manifests, and a small SVG line chart for the plot subcommand.

use std::fmt::Write as _;
use std::io::Write;

use sha2::{Digest, Sha256};

use super::ablation::{OrdersRow, PreprocRow};
use super::eval::MetricsReport;
use super::PreprocVariant;
use crate::scenegen::Label;

/// Per-fold accuracies plus summary rows. Fixed formatting keeps repeated
/// runs byte-identical.
pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut out = String::from("fold,accuracy_pct\n");
    for (i, acc) in report.per_fold_accuracy.iter().enumerate() {
        let _ = writeln!(out, "{i},{acc:.6}");
    }
    let _ = writeln!(out, "mean,{:.6}", report.mean_accuracy);
    let _ = writeln!(out, "std,{:.6}", report.std_accuracy);
    let _ = writeln!(out, "failed_samples,{}", report.failed_samples);
    out
}

pub fn confusion_csv(confusion: &[[usize; 3]; 3]) -> String {
    let mut out = String::from("truth\\prediction");
    for label in Label::ALL {
        let _ = write!(out, ",{}", label.as_str());
    }
    out.push('\n');
    for (t, label) in Label::ALL.iter().enumerate() {
        let _ = write!(out, "{}", label.as_str());
        for p in 0..3 {
            let _ = write!(out, ",{}", confusion[t][p]);
        }
        out.push('\n');
    }
    out
}

/// Per-fold, per-epoch training loss terms.
pub fn loss_curves_csv(fold_curves: &[Vec<crate::psrnet::LossBreakdown>]) -> String {
    let n_recon = fold_curves
        .first()
        .and_then(|c| c.first())
        .map(|l| l.recon.len())
        .unwrap_or(0);
    let mut out = String::from("fold,epoch,total,cross_entropy");
    for k in 1..=n_recon {
        let _ = write!(out, ",recon_{k}");
    }
    out.push('\n');
    for (fold, curve) in fold_curves.iter().enumerate() {
        for (epoch, loss) in curve.iter().enumerate() {
            let _ = write!(
                out,
                "{fold},{epoch},{:.9},{:.9}",
                loss.total, loss.cross_entropy
            );
            for r in &loss.recon {
                let _ = write!(out, ",{r:.9}");
            }
            out.push('\n');
        }
    }
    out
}

/// Reconstructor-order grid in mean +- std per fold count.
pub fn orders_csv(rows: &[OrdersRow]) -> String {
    let mut out = String::from("order");
    if let Some(first) = rows.first() {
        for (k, _) in &first.cells {
            let _ = write!(out, ",mean_{k}fold,std_{k}fold");
        }
    }
    out.push('\n');
    for row in rows {
        let _ = write!(out, "{}", row.order);
        for (_, report) in &row.cells {
            let _ = write!(out, ",{:.6},{:.6}", report.mean_accuracy, report.std_accuracy);
        }
        out.push('\n');
    }
    out
}

/// Preprocessing grid with the normalization/filtering flags spelled out.
pub fn preproc_csv(rows: &[PreprocRow]) -> String {
    let mut out = String::from("normalization,filtering");
    if let Some(first) = rows.first() {
        for (k, _) in &first.cells {
            let _ = write!(out, ",mean_{k}fold,std_{k}fold");
        }
    }
    out.push('\n');
    for row in rows {
        let (norm, filt) = match row.variant {
            PreprocVariant::Raw => ("no", "no"),
            PreprocVariant::Normalized => ("yes", "no"),
            PreprocVariant::NormalizedFiltered => ("yes", "yes"),
        };
        let _ = write!(out, "{norm},{filt}");
        for (_, report) in &row.cells {
            let _ = write!(out, ",{:.6},{:.6}", report.mean_accuracy, report.std_accuracy);
        }
        out.push('\n');
    }
    out
}

pub fn render_metrics_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}-fold cross-validation (seed {})", report.k, report.seed);
    for (i, acc) in report.per_fold_accuracy.iter().enumerate() {
        let _ = writeln!(out, "  fold {i}: {acc:6.2}%");
    }
    let _ = writeln!(
        out,
        "  mean {:.1} +- {:.1} %  ({} samples failed the pipeline)",
        report.mean_accuracy, report.std_accuracy, report.failed_samples
    );
    let _ = writeln!(out, "  confusion (rows = truth):");
    for (t, label) in Label::ALL.iter().enumerate() {
        let _ = writeln!(
            out,
            "    {:>13} {:5} {:5} {:5}",
            label.as_str(),
            report.confusion[t][0],
            report.confusion[t][1],
            report.confusion[t][2]
        );
    }
    out
}

/// Hash of a file's bytes in git blob form: `sha256("blob <len>\0" + bytes)`.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Write a run manifest: the resolved config plus seeds and input hashes.
pub fn write_manifest<W: Write, T: serde::Serialize>(
    mut w: W,
    manifest: &T,
) -> std::io::Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
    w.write_all(json.as_bytes())?;
    w.write_all(b"\n")
}

/// Minimal SVG polyline chart.
pub fn svg_line_chart(points: &[(f64, f64)], title: &str, x_label: &str, y_label: &str) -> String {
    let (width, height, margin) = (800.0, 480.0, 60.0);
    let (x_min, x_max) = bounds(points.iter().map(|p| p.0));
    let (y_min, y_max) = bounds(points.iter().map(|p| p.1));
    let x_span = (x_max - x_min).max(1e-12);
    let y_span = (y_max - y_min).max(1e-12);
    let sx = |x: f64| margin + (x - x_min) / x_span * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - y_min) / y_span * (height - 2.0 * margin);

    let mut path = String::new();
    for (i, (x, y)) in points.iter().enumerate() {
        let _ = write!(path, "{}{:.2},{:.2}", if i == 0 { "" } else { " " }, sx(*x), sy(*y));
    }
    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" ",
            "font-size=\"16\">{title}</text>\n",
            "<line x1=\"{m}\" y1=\"{ybase}\" x2=\"{xend}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{ybase}\" stroke=\"black\"/>\n",
            "<text x=\"{tx}\" y=\"{xlab_y}\" text-anchor=\"middle\" font-family=\"monospace\" ",
            "font-size=\"12\">{x_label}</text>\n",
            "<text x=\"16\" y=\"{ty}\" text-anchor=\"middle\" font-family=\"monospace\" ",
            "font-size=\"12\" transform=\"rotate(-90 16 {ty})\">{y_label}</text>\n",
            "<text x=\"{m}\" y=\"{xlab_y}\" font-family=\"monospace\" font-size=\"10\">{x_min:.2}</text>\n",
            "<text x=\"{xend}\" y=\"{xlab_y}\" text-anchor=\"end\" font-family=\"monospace\" ",
            "font-size=\"10\">{x_max:.2}</text>\n",
            "<text x=\"{m}\" y=\"{ybase}\" text-anchor=\"end\" font-family=\"monospace\" ",
            "font-size=\"10\" dx=\"-4\">{y_min:.3}</text>\n",
            "<text x=\"{m}\" y=\"{m}\" text-anchor=\"end\" font-family=\"monospace\" ",
            "font-size=\"10\" dx=\"-4\">{y_max:.3}</text>\n",
            "<polyline points=\"{path}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"1.5\"/>\n",
            "</svg>\n"
        ),
        w = width,
        h = height,
        m = margin,
        tx = width / 2.0,
        ty = height / 2.0,
        ybase = height - margin,
        xend = width - margin,
        xlab_y = height - margin / 2.0,
        title = title,
        x_label = x_label,
        y_label = y_label,
        x_min = x_min,
        x_max = x_max,
        y_min = y_min,
        y_max = y_max,
        path = path,
    )
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else {
        (lo, hi)
    }
}
