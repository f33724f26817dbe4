//! Multiclass evaluation: confusion matrix, one-vs-rest precision, recall,
//! specificity and F1 (macro and support-weighted), plus model complexity.
//!
//! Rows of the confusion matrix are ground truth, columns are predictions.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{M3sError, Result};
use crate::exec::Execution;
use crate::model::M3sModel;
use crate::spectra::{Dataset, SubtypeLabel, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[truth][prediction]`.
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    /// `(tp, fp, fn, tn)` for class `c` against the rest.
    pub fn one_vs_rest(&self, c: usize) -> (u64, u64, u64, u64) {
        let tp = self.counts[c][c];
        let fp = self.col_sum(c) - tp;
        let fn_ = self.row_sum(c) - tp;
        let tn = self.total() - tp - fp - fn_;
        (tp, fp, fn_, tn)
    }

    /// CSV with a header row of predicted labels and one row per true label.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("truth\\pred");
        for l in SubtypeLabel::ALL {
            let _ = write!(s, ",{l}");
        }
        s.push('\n');
        for l in SubtypeLabel::ALL {
            s.push_str(l.as_str());
            for v in self.counts[l.index()] {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Tallies `(truth, prediction)` pairs.
pub fn confusion(preds: &[SubtypeLabel], truths: &[SubtypeLabel]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(M3sError::LengthMismatch {
            left: preds.len(),
            right: truths.len(),
        });
    }
    if preds.is_empty() {
        return Err(M3sError::Empty("label lists"));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in preds.iter().zip(truths) {
        cm.counts[t.index()][p.index()] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Number of samples whose true label is this class.
    pub support: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averaged {
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
}

/// A ratio that was 0/0 and therefore reported as 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegenerateRatio {
    pub class: SubtypeLabel,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub accuracy: f64,
    /// Unweighted means over the four classes.
    pub precision: f64,
    pub recall: f64,
    pub specificity: f64,
    pub f1: f64,
    /// Support-weighted means, reported alongside the macro figures.
    pub weighted: Averaged,
    /// Indexed by class.
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub degenerate: Vec<DegenerateRatio>,
    pub confusion: ConfusionMatrix,
    pub flops: u64,
    pub params: u64,
}

fn ratio(num: u64, den: u64, class: usize, metric: &str, flags: &mut Vec<DegenerateRatio>) -> f64 {
    if den == 0 {
        flags.push(DegenerateRatio {
            class: SubtypeLabel::ALL[class],
            metric: metric.to_string(),
        });
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Derives all metrics from a confusion matrix. Any 0/0 ratio is 0 and is
/// listed in [`MetricReport::degenerate`].
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricReport> {
    let total = cm.total();
    if total == 0 {
        return Err(M3sError::EmptyMatrix);
    }
    let mut degenerate = Vec::new();
    let mut per_class = [ClassMetrics::default(); NUM_CLASSES];
    for (c, m) in per_class.iter_mut().enumerate() {
        let (tp, fp, fn_, tn) = cm.one_vs_rest(c);
        let precision = ratio(tp, tp + fp, c, "precision", &mut degenerate);
        let recall = ratio(tp, tp + fn_, c, "recall", &mut degenerate);
        let specificity = ratio(tn, tn + fp, c, "specificity", &mut degenerate);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            degenerate.push(DegenerateRatio {
                class: SubtypeLabel::ALL[c],
                metric: "f1".into(),
            });
            0.0
        };
        *m = ClassMetrics {
            precision,
            recall,
            specificity,
            f1,
            support: tp + fn_,
        };
    }
    let k = NUM_CLASSES as f64;
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
    let wmean = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| f(m) * m.support as f64)
            .sum::<f64>()
            / total as f64
    };
    Ok(MetricReport {
        accuracy: cm.trace() as f64 / total as f64,
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        specificity: mean(|m| m.specificity),
        f1: mean(|m| m.f1),
        weighted: Averaged {
            precision: wmean(|m| m.precision),
            recall: wmean(|m| m.recall),
            specificity: wmean(|m| m.specificity),
            f1: wmean(|m| m.f1),
        },
        per_class,
        degenerate,
        confusion: cm.clone(),
        flops: 0,
        params: 0,
    })
}

/// Trainable scalars of a model (extractor, head and adaptive weights).
pub fn count_params(model: &M3sModel) -> u64 {
    model.param_count() as u64
}

/// Forward FLOPs per sample at the model's configured scales.
pub fn count_flops(model: &M3sModel) -> Result<u64> {
    model.flops()
}

/// Predicts every sample of a labeled dataset and reports metrics together
/// with the model's complexity counters.
pub fn evaluate(model: &M3sModel, data: &Dataset, exec: Execution) -> Result<MetricReport> {
    let truths = data.labels()?;
    let preds: Vec<SubtypeLabel> = model
        .predict_dataset(data, exec)?
        .into_iter()
        .map(|p| p.label)
        .collect();
    let mut report = compute_metrics(&confusion(&preds, &truths)?)?;
    report.flops = count_flops(model)?;
    report.params = count_params(model);
    Ok(report)
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text table of summary and per-class figures.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "", "ACC", "P", "R", "S", "F1"
        );
        let _ = writeln!(
            s,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "macro", self.accuracy, self.precision, self.recall, self.specificity, self.f1
        );
        let w = &self.weighted;
        let _ = writeln!(
            s,
            "{:<10} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "weighted", self.accuracy, w.precision, w.recall, w.specificity, w.f1
        );
        for (l, m) in SubtypeLabel::ALL.iter().zip(&self.per_class) {
            let _ = writeln!(
                s,
                "{:<10} {:>8} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                l.as_str(),
                m.support,
                m.precision,
                m.recall,
                m.specificity,
                m.f1
            );
        }
        let _ = writeln!(s, "FLOPs {}  Params {}", self.flops, self.params);
        s
    }

    pub fn write_confusion_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.confusion.to_csv()).map_err(|e| M3sError::io(path, e))
    }
}
