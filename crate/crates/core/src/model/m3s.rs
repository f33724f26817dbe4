use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{TrainConfig, WeightMode};
use super::extractor::{image_tensor, ExtractorGrads, ExtractorTrace, MultiScaleExtractor};
use super::fusion::{
    fuse, fuse_backward, FusionOutput, ProbabilityMatrix, WeightMatrix, FUSION_ROWS,
};
use crate::error::{M3sError, Result};
use crate::exec::Execution;
use crate::gaf::encode_scales;
use crate::nn::{argmax, softmax_cross_entropy, ParamBlock, Tensor};
use crate::spectra::{Dataset, HistoryVector, RamanSpectrum, SubtypeLabel, NUM_CLASSES};

/// RNG stream used for parameter initialisation.
pub(crate) const INIT_STREAM: u64 = 1;

/// The complete trainable system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct M3sModel {
    pub config: TrainConfig,
    pub extractor: MultiScaleExtractor,
    /// Built from the training split only.
    pub probability_matrix: ProbabilityMatrix,
    pub weight_matrix: WeightMatrix,
    /// Length of the spectra the model was trained on, once known.
    #[serde(default)]
    pub sequence_len: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: SubtypeLabel,
    pub probabilities: [f64; NUM_CLASSES],
    /// Preliminary spectral prediction before fusion.
    pub e_r: [f64; NUM_CLASSES],
}

/// Result of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub trace: ExtractorTrace,
    /// `None` when the model runs spectral-only.
    pub fusion: Option<FusionOutput>,
    pub probabilities: [f64; NUM_CLASSES],
}

/// Gradients of every trainable quantity, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub extractor: ExtractorGrads,
    pub weight_matrix: [[f64; NUM_CLASSES]; FUSION_ROWS],
}

impl ModelGrads {
    pub fn add_assign(&mut self, other: &ModelGrads) -> Result<()> {
        self.extractor.add_assign(&other.extractor)?;
        for (a, b) in self.weight_matrix.iter_mut().zip(&other.weight_matrix) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Flattened gradient blocks in [`M3sModel::param_blocks`] order.
    pub fn blocks(&self) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self
            .extractor
            .tensors()
            .map(|t| t.data().to_vec())
            .collect();
        out.push(self.weight_matrix.iter().flatten().copied().collect());
        out
    }
}

impl M3sModel {
    /// Fresh model: extractor initialised from `config.seed`, weight matrix
    /// all ones (adaptive) or at the fixed ratio.
    pub fn init(config: &TrainConfig, probability_matrix: ProbabilityMatrix) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(INIT_STREAM);
        let extractor = MultiScaleExtractor::init(config, &mut rng)?;
        let weight_matrix = match config.weights {
            WeightMode::Fixed => WeightMatrix::fixed(config.fixed_ratio),
            WeightMode::Adaptive | WeightMode::None => WeightMatrix::ones(),
        };
        Ok(Self {
            config: config.clone(),
            extractor,
            probability_matrix,
            weight_matrix,
            sequence_len: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.extractor.scales != self.config.scales {
            return Err(M3sError::Shape(
                "extractor scales differ from config".into(),
            ));
        }
        self.extractor.validate()
    }

    pub fn scales(&self) -> &[usize] {
        &self.extractor.scales
    }

    /// Encodes a spectrum at every configured scale.
    pub fn encode(&self, spec: &RamanSpectrum) -> Result<Vec<Tensor>> {
        if let Some(len) = self.sequence_len {
            if spec.values.len() != len {
                return Err(M3sError::LengthMismatch {
                    left: spec.values.len(),
                    right: len,
                });
            }
        }
        Ok(encode_scales(spec, self.scales())?
            .iter()
            .map(image_tensor)
            .collect())
    }

    pub fn forward(&self, images: &[Tensor], history: &HistoryVector) -> Result<ForwardPass> {
        let trace = self.extractor.forward(images)?;
        if self.config.weights == WeightMode::None {
            let probabilities = trace.e_r;
            return Ok(ForwardPass {
                trace,
                fusion: None,
                probabilities,
            });
        }
        let out = fuse(
            &trace.e_r,
            &self.probability_matrix,
            history,
            &self.weight_matrix,
            self.config.fusion,
        );
        let probabilities = out.probabilities;
        Ok(ForwardPass {
            trace,
            fusion: Some(out),
            probabilities,
        })
    }

    /// Cross-entropy loss of one sample and the gradients of every parameter.
    /// The weight-matrix gradient is zero unless the weights are adaptive.
    pub fn sample_gradients(
        &self,
        images: &[Tensor],
        history: &HistoryVector,
        target: SubtypeLabel,
    ) -> Result<(f64, ForwardPass, ModelGrads)> {
        let pass = self.forward(images, history)?;
        let t = target.index();
        let mut weight_grad = [[0.0; NUM_CLASSES]; FUSION_ROWS];
        let (loss, extractor) = match &pass.fusion {
            None => {
                let (loss, d_logits) = softmax_cross_entropy(&pass.trace.logits, t)?;
                let d_logits = [d_logits[0], d_logits[1], d_logits[2], d_logits[3]];
                (
                    loss,
                    self.extractor.backward_logits(&pass.trace, &d_logits)?,
                )
            }
            Some(out) => {
                let (loss, d_scores) = softmax_cross_entropy(&out.class_scores, t)?;
                let d_scores = [d_scores[0], d_scores[1], d_scores[2], d_scores[3]];
                let (d_er, d_w) = fuse_backward(out, &self.weight_matrix, &d_scores);
                if self.config.weights == WeightMode::Adaptive {
                    weight_grad = d_w;
                }
                (loss, self.extractor.backward_probs(&pass.trace, &d_er)?)
            }
        };
        Ok((
            loss,
            pass,
            ModelGrads {
                extractor,
                weight_matrix: weight_grad,
            },
        ))
    }

    pub fn zero_grads(&self) -> ModelGrads {
        ModelGrads {
            extractor: self.extractor.zero_grads(),
            weight_matrix: [[0.0; NUM_CLASSES]; FUSION_ROWS],
        }
    }

    /// One SGD update; the weight matrix only moves in adaptive mode.
    pub fn apply_gradients(&mut self, grads: &ModelGrads, lr: f64) -> Result<()> {
        let params = self
            .extractor
            .branches
            .iter_mut()
            .flat_map(|b| b.params_mut())
            .chain(self.extractor.head.params.iter_mut());
        crate::nn::sgd_step(params, grads.extractor.tensors(), lr)?;
        if self.config.weights == WeightMode::Adaptive {
            for (row, g) in self.weight_matrix.rows.iter_mut().zip(&grads.weight_matrix) {
                for (w, d) in row.iter_mut().zip(g) {
                    *w -= lr * d;
                }
            }
        }
        Ok(())
    }

    pub fn predict_images(&self, images: &[Tensor], history: &HistoryVector) -> Result<Prediction> {
        let pass = self.forward(images, history)?;
        let label = SubtypeLabel::from_index(argmax(&pass.probabilities)).expect("4 classes");
        Ok(Prediction {
            label,
            probabilities: pass.probabilities,
            e_r: pass.trace.e_r,
        })
    }

    /// Full pipeline for one spectrum; ties go to the lowest class index.
    pub fn predict(&self, spec: &RamanSpectrum) -> Result<Prediction> {
        self.predict_images(&self.encode(spec)?, &spec.history)
    }

    pub fn predict_dataset(&self, dataset: &Dataset, exec: Execution) -> Result<Vec<Prediction>> {
        exec.try_map(dataset.samples(), |s| self.predict(s))
    }

    /// Trainable scalars: extractor parameters, plus the weight matrix when
    /// it is adaptive.
    pub fn param_count(&self) -> usize {
        let w = if self.config.weights == WeightMode::Adaptive {
            NUM_CLASSES * FUSION_ROWS
        } else {
            0
        };
        self.extractor.param_count() + w
    }

    /// Forward FLOPs (2 x MACs of conv and dense layers) for one sample.
    pub fn flops(&self) -> Result<u64> {
        self.extractor.flops()
    }

    /// Every parameter tensor as a named flat block, weight matrix last.
    pub fn param_blocks(&self) -> Vec<ParamBlock> {
        let mut blocks = Vec::new();
        for (b, branch) in self.extractor.branches.iter().enumerate() {
            for (l, layer) in branch.layers.iter().enumerate() {
                for (k, p) in layer.params.iter().enumerate() {
                    let kind = if k == 0 { "weight" } else { "bias" };
                    blocks.push(ParamBlock::new(
                        format!("branch{b}.layer{l}.{kind}"),
                        p.data().to_vec(),
                    ));
                }
            }
        }
        for (k, p) in self.extractor.head.params.iter().enumerate() {
            let kind = if k == 0 { "weight" } else { "bias" };
            blocks.push(ParamBlock::new(format!("head.{kind}"), p.data().to_vec()));
        }
        blocks.push(ParamBlock::new(
            "weight_matrix",
            self.weight_matrix.rows.iter().flatten().copied().collect(),
        ));
        blocks
    }

    /// Inverse of [`M3sModel::param_blocks`].
    pub fn set_param_blocks(&mut self, blocks: &[ParamBlock]) -> Result<()> {
        let mut it = blocks.iter();
        let mut next = |len: usize| -> Result<&[f64]> {
            let b = it
                .next()
                .ok_or_else(|| M3sError::Shape("too few parameter blocks".into()))?;
            if b.values.len() != len {
                return Err(M3sError::Shape(format!(
                    "block {} has {} values, expected {len}",
                    b.name,
                    b.values.len()
                )));
            }
            Ok(&b.values)
        };
        for p in self
            .extractor
            .branches
            .iter_mut()
            .flat_map(|b| b.params_mut())
            .chain(self.extractor.head.params.iter_mut())
        {
            let src = next(p.len())?;
            p.data_mut().copy_from_slice(src);
        }
        let w = next(NUM_CLASSES * FUSION_ROWS)?;
        for (r, row) in self.weight_matrix.rows.iter_mut().enumerate() {
            row.copy_from_slice(&w[r * NUM_CLASSES..(r + 1) * NUM_CLASSES]);
        }
        Ok(())
    }
}
