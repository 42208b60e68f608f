use hsaw::eval::{false_positives, roc, roc_svg};
use hsaw::rng::SplitMix64;
use hsaw::scene::ActivityLabel;
use proptest::prelude::*;

/// Pairwise concordance: P(score_pos > score_neg) + ½ P(tie).
fn wmw(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                den += 1.0;
                num += if si > sj { 1.0 } else if si == sj { 0.5 } else { 0.0 };
            }
        }
    }
    num / den
}

fn instance(seed: u64, n: usize, levels: u64) -> (Vec<f64>, Vec<bool>) {
    let mut rng = SplitMix64::new(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.next_f64() < 0.3).collect();
    labels[0] = true;
    labels[1] = false;
    // coarse scores so ties are common
    let scores = labels
        .iter()
        .map(|&l| (rng.below(levels as usize) as f64 + if l { 2.0 } else { 0.0 }) / levels as f64)
        .collect();
    (scores, labels)
}

proptest! {
    #[test]
    fn auc_matches_pairwise_concordance(seed in 0u64..100_000, n in 2usize..200, levels in 1u64..30) {
        let (s, l) = instance(seed, n, levels);
        let r = roc(&s, &l).unwrap();
        prop_assert!((r.auc - wmw(&s, &l)).abs() < 1e-9, "{} vs {}", r.auc, wmw(&s, &l));
        prop_assert!(r.points.windows(2).all(|w| w[0].fpr <= w[1].fpr && w[0].tpr <= w[1].tpr));
        prop_assert!(r.points.windows(2).all(|w| w[0].threshold > w[1].threshold));
        prop_assert!((0.0..=1.0).contains(&r.eer));
    }

    #[test]
    fn increasing_transform_leaves_roc_unchanged(seed in 0u64..100_000, n in 2usize..120) {
        let (s, l) = instance(seed, n, 10);
        let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
        let (a, b) = (roc(&s, &l).unwrap(), roc(&t, &l).unwrap());
        prop_assert_eq!(a.points.len(), b.points.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            prop_assert_eq!((p.fpr, p.tpr), (q.fpr, q.tpr));
        }
        prop_assert_eq!(a.auc, b.auc);
        prop_assert_eq!(a.eer, b.eer);
    }

    #[test]
    fn flipping_labels_and_negating_scores_keeps_auc(seed in 0u64..100_000, n in 2usize..120) {
        let (s, l) = instance(seed, n, 7);
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        let flip: Vec<bool> = l.iter().map(|v| !v).collect();
        prop_assert!((roc(&s, &l).unwrap().auc - roc(&neg, &flip).unwrap().auc).abs() < 1e-12);
    }

    #[test]
    fn eer_sits_where_the_error_rates_cross(seed in 0u64..100_000, n in 4usize..150) {
        let (s, l) = instance(seed, n, 50);
        let r = roc(&s, &l).unwrap();
        // the nearest vertex is no farther from balance than one ROC step
        let p = r.points.iter().find(|p| p.threshold == r.eer_threshold).unwrap();
        let pos = l.iter().filter(|&&v| v).count() as f64;
        let neg = l.len() as f64 - pos;
        let step = r.points.windows(2).map(|w| (w[1].fpr - w[0].fpr) + (w[1].tpr - w[0].tpr)).fold(0.0, f64::max);
        prop_assert!((p.fpr - (1.0 - p.tpr)).abs() <= step + 1e-12);
        prop_assert!(step >= 1.0 / pos.max(neg) - 1e-12);
    }
}

#[test]
fn hand_examples() {
    let r = roc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
    assert_eq!((r.auc, r.eer), (1.0, 0.0));
    assert_eq!(roc(&[0.5, 0.5], &[false, true]).unwrap().auc, 0.5);
    // fully inverted scores
    let r = roc(&[0.9, 0.8, 0.2, 0.1], &[false, false, true, true]).unwrap();
    assert_eq!((r.auc, r.eer), (0.0, 1.0));
    // one crossing inside a segment: fpr goes 0 → 0.5 while fnr goes 0.5 → 0
    let r = roc(&[0.3, 0.6, 0.2, 0.7], &[false, false, true, true]).unwrap();
    assert!((r.eer - 0.5).abs() < 1e-12, "{}", r.eer);
    let err = roc(&[0.1, 0.2], &[false, false]).unwrap_err().to_string();
    assert!(err.contains("both classes"), "{err}");
    assert!(roc(&[0.1, f64::NAN], &[false, true]).is_err());
}

#[test]
fn false_positives_count_one_label_above_threshold() {
    use ActivityLabel::*;
    let labels = [Straight, Curve, Curve, AbnormalPedestrian, Curve];
    assert_eq!(false_positives(&[0.9, 0.9, 0.1, 0.9, 0.5], &labels, Curve, 0.4), 2);
    assert_eq!(false_positives(&[0.9, 0.9, 0.1, 0.9, 0.5], &labels, Straight, 0.95), 0);
}

#[test]
fn svg_has_axes_both_curves_and_diagonal() {
    let a = roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
    let b = roc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap();
    let svg = roc_svg(&[("single <GAN>", &a), ("hierarchy", &b)]);
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polyline").count(), 2);
    assert!(svg.contains("stroke-dasharray"));
    assert!(svg.contains("false positive rate") && svg.contains("true positive rate"));
    assert!(svg.contains("single &lt;GAN&gt;"));
}
