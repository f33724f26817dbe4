#![allow(clippy::needless_range_loop)]

mod common;

use m3s_core::metrics::{compute_metrics, confusion};
use m3s_core::spectra::SubtypeLabel;
use rand::Rng;

#[test]
fn metrics_match_brute_force_tally() {
    for seed in 0..200u64 {
        let mut r = common::rng(seed);
        let n = r.gen_range(1..60);
        // a skewed predictor so some classes are never predicted
        let bias = r.gen_range(0..4);
        let truths: Vec<SubtypeLabel> = (0..n)
            .map(|_| SubtypeLabel::ALL[r.gen_range(0..4)])
            .collect();
        let preds: Vec<SubtypeLabel> = truths
            .iter()
            .map(|t| match r.gen_range(0..3) {
                0 => *t,
                1 => SubtypeLabel::ALL[bias],
                _ => SubtypeLabel::ALL[r.gen_range(0..4)],
            })
            .collect();
        let rep = compute_metrics(&confusion(&preds, &truths).unwrap()).unwrap();
        let bf = common::brute_force_metrics(&preds, &truths);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
        assert!(close(rep.accuracy, bf.accuracy));
        let macro_ours = [rep.precision, rep.recall, rep.specificity, rep.f1];
        let w = rep.weighted;
        let weighted_ours = [w.precision, w.recall, w.specificity, w.f1];
        for k in 0..4 {
            assert!(
                close(macro_ours[k], bf.macro_avg[k]),
                "seed {seed} macro {k}"
            );
            assert!(
                close(weighted_ours[k], bf.weighted_avg[k]),
                "seed {seed} weighted {k}"
            );
        }
        for (c, m) in rep.per_class.iter().enumerate() {
            let ours = [m.precision, m.recall, m.specificity, m.f1];
            for k in 0..4 {
                assert!(
                    close(ours[k], bf.per_class[c][k]),
                    "seed {seed} class {c} metric {k}"
                );
            }
        }
        assert_eq!(rep.confusion.total(), n as u64);
    }
}
