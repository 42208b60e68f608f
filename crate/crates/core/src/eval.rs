//! Frame-level ROC evaluation and the single-GAN vs hierarchy comparison.

use serde::Serialize;

use crate::detector::{abnormality_signal, AbnormalitySignal, DetectOptions};
use crate::error::{Error, Result};
use crate::gan::CoupleSet;
use crate::hierarchy::{build_hierarchy, BuildConfig, BuildEvent, Hierarchy, ThetaPolicy};
use crate::scene::ActivityLabel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// From the +∞ sentinel (nothing flagged) down to −∞ (everything flagged).
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub eer: f64,
    /// Threshold of the vertex closest to the equal-error point.
    pub eer_threshold: f64,
}

/// ROC of `scores` against `labels` (true = abnormal); a frame is flagged
/// when its score is strictly above the threshold.
pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::shape("roc", format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Range { op: "roc", detail: "NaN score".into() });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Range {
            op: "roc",
            detail: format!("need both classes, got {pos} abnormal and {neg} normal frames"),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let t = scores[order[k]];
        // the threshold t itself flags everything strictly above it, i.e.
        // the frames already counted
        points.push(RocPoint { threshold: t, fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64 });
        while k < order.len() && scores[order[k]] == t {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
    }
    points.push(RocPoint { threshold: f64::NEG_INFINITY, fpr: 1.0, tpr: 1.0 });

    let auc = points.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum();
    let gap = |p: &RocPoint| p.fpr - (1.0 - p.tpr);
    let mut eer = 0.5;
    for w in points.windows(2) {
        let (g0, g1) = (gap(&w[0]), gap(&w[1]));
        if g0 <= 0.0 && g1 >= 0.0 {
            let t = if g1 > g0 { -g0 / (g1 - g0) } else { 0.0 };
            eer = w[0].fpr + t * (w[1].fpr - w[0].fpr);
            break;
        }
    }
    let eer_threshold = points
        .iter()
        .min_by(|a, b| gap(a).abs().total_cmp(&gap(b).abs()))
        .map(|p| p.threshold)
        .expect("curve has sentinels");
    Ok(RocCurve { points, auc, eer, eer_threshold })
}

impl RocCurve {
    pub const CSV_HEADER: &'static str = "threshold,fpr,tpr";

    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for p in &self.points {
            s += &format!("{},{:?},{:?}\n", fmt_threshold(p.threshold), p.fpr, p.tpr);
        }
        s
    }

    pub fn summary(&self) -> Metrics {
        Metrics { auc: self.auc, eer: self.eer, eer_threshold: finite_or_none(self.eer_threshold) }
    }
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t:?}")
    }
}

fn finite_or_none(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub auc: f64,
    pub eer: f64,
    pub eer_threshold: Option<f64>,
}

/// Frames of one label flagged at `threshold`.
pub fn false_positives(signal: &[f64], labels: &[ActivityLabel], of: ActivityLabel, threshold: f64) -> usize {
    signal.iter().zip(labels).filter(|(&s, &l)| l == of && s > threshold).count()
}

/// Evaluation of one model's signal on a labelled test sequence.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub signal: AbnormalitySignal,
    pub roc: RocCurve,
    pub curve_false_positives: usize,
}

/// ROC of the normalised signal against the anomaly labels.
pub fn evaluate(h: &Hierarchy, test: &CoupleSet, labels: &[ActivityLabel], opts: DetectOptions) -> Result<Evaluation> {
    let signal = abnormality_signal(h, test, opts)?;
    evaluate_signal(signal, labels)
}

pub fn evaluate_signal(signal: AbnormalitySignal, labels: &[ActivityLabel]) -> Result<Evaluation> {
    let truth: Vec<bool> = labels.iter().map(|l| l.is_anomalous()).collect();
    let roc = roc(&signal.normalized, &truth)?;
    let curve_false_positives = false_positives(&signal.normalized, labels, ActivityLabel::Curve, roc.eer_threshold);
    Ok(Evaluation { signal, roc, curve_false_positives })
}

/// A one-level model trained on the whole sequence; with θ = ∞ every
/// cluster is normal and the signal is that level's Ỹ.
pub fn train_single(x: &CoupleSet, cfg: &BuildConfig, on_event: impl FnMut(&BuildEvent)) -> Result<Hierarchy> {
    let single = BuildConfig { theta: ThetaPolicy::Fixed(f64::INFINITY), max_levels: 1, ..cfg.clone() };
    build_hierarchy(x, &(0..x.len()).collect::<Vec<_>>(), &single, on_event)
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub single: Evaluation,
    pub hierarchy: Evaluation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonMetrics {
    pub single: Metrics,
    pub hierarchy: Metrics,
    pub single_curve_false_positives: usize,
    pub hierarchy_curve_false_positives: usize,
    pub hierarchy_levels: usize,
}

impl Comparison {
    pub fn metrics(&self, levels: usize) -> ComparisonMetrics {
        ComparisonMetrics {
            single: self.single.roc.summary(),
            hierarchy: self.hierarchy.roc.summary(),
            single_curve_false_positives: self.single.curve_false_positives,
            hierarchy_curve_false_positives: self.hierarchy.curve_false_positives,
            hierarchy_levels: levels,
        }
    }
}

pub fn compare(
    single: &Hierarchy,
    hierarchy: &Hierarchy,
    test: &CoupleSet,
    labels: &[ActivityLabel],
    opts: DetectOptions,
) -> Result<Comparison> {
    Ok(Comparison {
        single: evaluate(single, test, labels, opts)?,
        hierarchy: evaluate(hierarchy, test, labels, opts)?,
    })
}

/// Trains both models on `train` and evaluates them on `test`.
pub fn compare_single_vs_hierarchy(
    train: &CoupleSet,
    train_labels: &[ActivityLabel],
    test: &CoupleSet,
    test_labels: &[ActivityLabel],
    cfg: &BuildConfig,
    mut on_event: impl FnMut(&str, &BuildEvent),
) -> Result<(Hierarchy, Hierarchy, Comparison)> {
    let v0: Vec<usize> = (0..train_labels.len()).filter(|&i| train_labels[i] == ActivityLabel::Straight).collect();
    let hier = build_hierarchy(train, &v0, cfg, |e| on_event("hierarchy", e))?;
    let single = train_single(train, cfg, |e| on_event("single", e))?;
    let cmp = compare(&single, &hier, test, test_labels, DetectOptions::default())?;
    Ok((single, hier, cmp))
}

/// Self-contained SVG with one polyline per named curve and the chance diagonal.
pub fn roc_svg(curves: &[(&str, &RocCurve)]) -> String {
    const SIZE: f64 = 360.0;
    const PAD: f64 = 48.0;
    const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
    let px = |fpr: f64| PAD + fpr * SIZE;
    let py = |tpr: f64| PAD + (1.0 - tpr) * SIZE;
    let total = SIZE + 2.0 * PAD;
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{total}\" height=\"{total}\" viewBox=\"0 0 {total} {total}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s += &format!("<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\" stroke=\"black\"/>\n");
    s += &format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n",
        px(0.0),
        py(0.0),
        px(1.0),
        py(1.0)
    );
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{v:.2}</text>\n", px(v), PAD + SIZE + 16.0);
        s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v:.2}</text>\n", PAD - 6.0, py(v) + 4.0);
    }
    s += &format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">false positive rate</text>\n",
        PAD + SIZE / 2.0,
        PAD + SIZE + 36.0
    );
    s += &format!(
        "<text transform=\"translate(14 {}) rotate(-90)\" text-anchor=\"middle\">true positive rate</text>\n",
        PAD + SIZE / 2.0
    );
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = c.points.iter().map(|p| format!("{:.2},{:.2}", px(p.fpr), py(p.tpr))).collect();
        s += &format!("<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n", pts.join(" "));
        s += &format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{} (AUC {:.3}, EER {:.3})</text>\n",
            PAD + SIZE - 190.0,
            PAD + SIZE - 14.0 - 16.0 * i as f64,
            escape(name),
            c.auc,
            c.eer
        );
    }
    s += "</svg>\n";
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
