//! History probability matrix, weight matrix and the fusion decision.

use serde::{Deserialize, Serialize};

use super::config::FusionPolicy;
use crate::error::{M3sError, Result};
use crate::nn::softmax;
use crate::spectra::{Dataset, HistoryVector, NUM_CLASSES, NUM_FLAGS};

/// Rows of the fusion stack: the spectral prediction plus one per flag.
pub const FUSION_ROWS: usize = 1 + NUM_FLAGS;

/// P(subtype | history flag) estimated by counting, one row per flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityMatrix {
    pub rows: [[f64; NUM_CLASSES]; NUM_FLAGS],
    /// Number of samples carrying each flag.
    pub support: [usize; NUM_FLAGS],
}

impl ProbabilityMatrix {
    /// A flag no training sample carries; its row is filled uniformly.
    pub fn is_zero_support(&self, flag: usize) -> bool {
        self.support[flag] == 0
    }

    pub fn zero_support_flags(&self) -> Vec<usize> {
        (0..NUM_FLAGS)
            .filter(|&h| self.is_zero_support(h))
            .collect()
    }
}

/// Builds the probability matrix from labeled (training) samples:
/// `entry[h][c] = #{flag h and label c} / #{flag h}`.
pub fn build_probability_matrix(train: &Dataset) -> Result<ProbabilityMatrix> {
    let mut counts = [[0usize; NUM_CLASSES]; NUM_FLAGS];
    for s in train.samples() {
        let label = s
            .label
            .ok_or_else(|| M3sError::UnlabeledSample { id: s.id.clone() })?;
        for (h, on) in s.history.iter().enumerate() {
            if on {
                counts[h][label.index()] += 1;
            }
        }
    }
    let mut rows = [[0.0; NUM_CLASSES]; NUM_FLAGS];
    let mut support = [0; NUM_FLAGS];
    for h in 0..NUM_FLAGS {
        let total: usize = counts[h].iter().sum();
        support[h] = total;
        for c in 0..NUM_CLASSES {
            rows[h][c] = if total == 0 {
                1.0 / NUM_CLASSES as f64
            } else {
                counts[h][c] as f64 / total as f64
            };
        }
    }
    Ok(ProbabilityMatrix { rows, support })
}

/// Elementwise mixing weights: row 0 scales the spectral prediction, rows
/// 1..=5 scale the history rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub rows: [[f64; NUM_CLASSES]; FUSION_ROWS],
}

impl WeightMatrix {
    pub fn ones() -> Self {
        Self {
            rows: [[1.0; NUM_CLASSES]; FUSION_ROWS],
        }
    }

    /// `ratio` on every spectral entry, `(1 - ratio) / 5` on every history
    /// entry, so the history rows carry `1 - ratio` in total.
    pub fn fixed(ratio: f64) -> Self {
        let mut rows = [[(1.0 - ratio) / NUM_FLAGS as f64; NUM_CLASSES]; FUSION_ROWS];
        rows[0] = [ratio; NUM_CLASSES];
        Self { rows }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionOutput {
    /// Spectral prediction stacked on the (possibly masked) history rows.
    pub feature_group: [[f64; NUM_CLASSES]; FUSION_ROWS],
    /// `feature_group ⊙ weights`.
    pub prediction_matrix: [[f64; NUM_CLASSES]; FUSION_ROWS],
    /// Column sums of the prediction matrix.
    pub class_scores: [f64; NUM_CLASSES],
    pub probabilities: [f64; NUM_CLASSES],
}

/// Stacks `e_r` on the history rows, weights the stack elementwise, sums over
/// rows and applies softmax over classes.
pub fn fuse(
    e_r: &[f64; NUM_CLASSES],
    matrix: &ProbabilityMatrix,
    history: &HistoryVector,
    weights: &WeightMatrix,
    policy: FusionPolicy,
) -> FusionOutput {
    let mut feature_group = [[0.0; NUM_CLASSES]; FUSION_ROWS];
    feature_group[0] = *e_r;
    for h in 0..NUM_FLAGS {
        let keep = match policy {
            FusionPolicy::Global => true,
            FusionPolicy::Masked => history.0[h],
        };
        if keep {
            feature_group[1 + h] = matrix.rows[h];
        }
    }
    let mut prediction_matrix = [[0.0; NUM_CLASSES]; FUSION_ROWS];
    let mut class_scores = [0.0; NUM_CLASSES];
    for r in 0..FUSION_ROWS {
        for c in 0..NUM_CLASSES {
            prediction_matrix[r][c] = feature_group[r][c] * weights.rows[r][c];
            class_scores[c] += prediction_matrix[r][c];
        }
    }
    let p = softmax(&class_scores);
    FusionOutput {
        feature_group,
        prediction_matrix,
        class_scores,
        probabilities: [p[0], p[1], p[2], p[3]],
    }
}

/// Gradients of the fusion step given `dL/dclass_scores`: returns
/// `(dL/de_r, dL/dweights)`.
pub fn fuse_backward(
    output: &FusionOutput,
    weights: &WeightMatrix,
    grad_scores: &[f64; NUM_CLASSES],
) -> ([f64; NUM_CLASSES], [[f64; NUM_CLASSES]; FUSION_ROWS]) {
    let mut d_weights = [[0.0; NUM_CLASSES]; FUSION_ROWS];
    for (row, features) in d_weights.iter_mut().zip(&output.feature_group) {
        for c in 0..NUM_CLASSES {
            row[c] = features[c] * grad_scores[c];
        }
    }
    let mut d_er = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        d_er[c] = weights.rows[0][c] * grad_scores[c];
    }
    (d_er, d_weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::{DatasetMeta, RamanSpectrum, SubtypeLabel};

    fn sample(label: SubtypeLabel, flags: [u8; 5]) -> RamanSpectrum {
        RamanSpectrum::new("s", vec![0.0, 1.0], Some(label), HistoryVector::from(flags)).unwrap()
    }

    #[test]
    fn counting_definition() {
        use SubtypeLabel::*;
        let samples = vec![
            sample(Ami, [1, 0, 0, 0, 0]),
            sample(Ami, [1, 0, 0, 0, 0]),
            sample(Cad, [1, 0, 0, 0, 0]),
            sample(Af, [1, 1, 0, 0, 0]),
            sample(Con, [0, 1, 0, 0, 0]),
        ];
        let d = Dataset::new(samples, DatasetMeta::default()).unwrap();
        let m = build_probability_matrix(&d).unwrap();
        assert_eq!(m.rows[0], [0.5, 0.25, 0.25, 0.0]);
        assert_eq!(m.rows[1], [0.0, 0.0, 0.5, 0.5]);
        assert_eq!(m.support, [4, 2, 0, 0, 0]);
        assert_eq!(m.rows[3], [0.25; 4]);
        assert_eq!(m.zero_support_flags(), vec![2, 3, 4]);
    }

    #[test]
    fn unlabeled_rejected() {
        let mut s = sample(SubtypeLabel::Ami, [0; 5]);
        s.label = None;
        let d = Dataset::new(vec![s], DatasetMeta::default()).unwrap();
        assert!(matches!(
            build_probability_matrix(&d),
            Err(M3sError::UnlabeledSample { .. })
        ));
    }

    fn some_matrix() -> ProbabilityMatrix {
        ProbabilityMatrix {
            rows: [
                [0.0, 1.0, 0.0, 0.0],
                [0.4, 0.3, 0.2, 0.1],
                [0.25; 4],
                [0.1, 0.1, 0.1, 0.7],
                [0.5, 0.5, 0.0, 0.0],
            ],
            support: [3, 10, 0, 4, 2],
        }
    }

    #[test]
    fn identity_fusion() {
        let e_r = [0.1, 0.6, 0.2, 0.1];
        let out = fuse(
            &e_r,
            &some_matrix(),
            &HistoryVector::NONE,
            &WeightMatrix::ones(),
            FusionPolicy::Masked,
        );
        assert_eq!(out.class_scores, e_r);
    }

    #[test]
    fn fixed_nine_to_one() {
        let w = WeightMatrix::fixed(0.9);
        assert_eq!(w.rows[0], [0.9; 4]);
        assert!((w.rows[3][2] - 0.02).abs() < 1e-15);
        let history = HistoryVector::from([1, 0, 0, 0, 0]);
        let out = fuse(
            &[1.0, 0.0, 0.0, 0.0],
            &some_matrix(),
            &history,
            &w,
            FusionPolicy::Masked,
        );
        let want = [0.9, 0.02, 0.0, 0.0];
        for (a, b) in out.class_scores.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn global_policy_uses_every_row() {
        let m = some_matrix();
        let out = fuse(
            &[0.0; 4],
            &m,
            &HistoryVector::NONE,
            &WeightMatrix::ones(),
            FusionPolicy::Global,
        );
        for c in 0..4 {
            let col: f64 = m.rows.iter().map(|r| r[c]).sum();
            assert!((out.class_scores[c] - col).abs() < 1e-15);
        }
        let s: f64 = out.probabilities.iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backward_shapes() {
        let w = WeightMatrix::fixed(0.9);
        let out = fuse(
            &[0.2, 0.3, 0.4, 0.1],
            &some_matrix(),
            &HistoryVector::from([0, 1, 0, 0, 0]),
            &w,
            FusionPolicy::Masked,
        );
        let g = [1.0, 0.0, -1.0, 0.5];
        let (d_er, d_w) = fuse_backward(&out, &w, &g);
        assert_eq!(d_er, [0.9, 0.0, -0.9, 0.45]);
        assert_eq!(d_w[0], [0.2, 0.0, -0.4, 0.05]);
        assert_eq!(d_w[2], [0.4, 0.0, -0.2, 0.05]);
        assert_eq!(d_w[1], [0.0; 4]);
    }
}
