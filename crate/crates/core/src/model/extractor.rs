//! Multi-scale feature extractor: one convolutional branch per image scale,
//! concatenated embeddings and a dense head producing class logits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use crate::error::{M3sError, Result};
use crate::gaf::GafImage;
use crate::nn::{
    softmax, softmax_backward, Layer, LayerCache, LayerSpec, Sequential, SequentialGrads, Tensor,
};
use crate::spectra::NUM_CLASSES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiScaleExtractor {
    pub scales: Vec<usize>,
    pub branches: Vec<Sequential>,
    /// Dense layer from the concatenated embedding to class logits.
    pub head: Layer,
}

/// Intermediate state of one extractor forward pass.
#[derive(Debug, Clone)]
pub struct ExtractorTrace {
    branch_caches: Vec<Vec<LayerCache>>,
    embedding_lens: Vec<usize>,
    head_cache: LayerCache,
    pub logits: [f64; NUM_CLASSES],
    /// Softmax of the logits: the preliminary spectral prediction.
    pub e_r: [f64; NUM_CLASSES],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorGrads {
    pub branches: Vec<SequentialGrads>,
    pub head: Vec<Tensor>,
}

/// Converts an image to the `[1, scale, scale]` tensor a branch consumes.
pub fn image_tensor(image: &GafImage) -> Tensor {
    Tensor::new(vec![1, image.scale, image.scale], image.pixels.clone())
        .expect("GAF image is square")
}

fn to_array(v: &[f64]) -> [f64; NUM_CLASSES] {
    let mut a = [0.0; NUM_CLASSES];
    a.copy_from_slice(v);
    a
}

impl MultiScaleExtractor {
    pub fn init<R: Rng>(config: &TrainConfig, rng: &mut R) -> Result<Self> {
        let mut branches = Vec::with_capacity(config.scales.len());
        let mut total = 0;
        for (&scale, &kernel) in config.scales.iter().zip(&config.kernels()) {
            let branch = Sequential::init(&config.branch_specs(kernel), rng)?;
            let out = branch.output_shape(&[1, scale, scale]).map_err(|e| {
                M3sError::config(
                    "scales",
                    format!("scale {scale} too small for the branch: {e}"),
                )
            })?;
            total += out[0];
            branches.push(branch);
        }
        let head = Layer::init(
            LayerSpec::Dense {
                inputs: total,
                units: NUM_CLASSES,
            },
            rng,
        )?;
        Ok(Self {
            scales: config.scales.clone(),
            branches,
            head,
        })
    }

    /// Checks that every parameter tensor matches the layer specs, the head
    /// width matches the concatenated embedding, and branches fit their scale.
    pub fn validate(&self) -> Result<()> {
        if self.branches.len() != self.scales.len() {
            return Err(M3sError::Shape("one branch per scale required".into()));
        }
        let mut total = 0;
        for (branch, &scale) in self.branches.iter().zip(&self.scales) {
            for l in &branch.layers {
                Layer::with_params(l.spec.clone(), l.params.clone())?;
            }
            total += branch.output_shape(&[1, scale, scale])?[0];
        }
        Layer::with_params(self.head.spec.clone(), self.head.params.clone())?;
        if self.head.spec
            != (LayerSpec::Dense {
                inputs: total,
                units: NUM_CLASSES,
            })
        {
            return Err(M3sError::Shape(format!(
                "head {:?} does not match embedding length {total}",
                self.head.spec
            )));
        }
        Ok(())
    }

    pub fn embedding_len(&self) -> usize {
        match self.head.spec {
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }

    fn check_inputs(&self, images: &[Tensor]) -> Result<()> {
        if images.len() != self.scales.len() {
            return Err(M3sError::Shape(format!(
                "expected images at scales {:?}, got {} images",
                self.scales,
                images.len()
            )));
        }
        for (img, &s) in images.iter().zip(&self.scales) {
            img.expect_shape(&[1, s, s], "extractor input")?;
        }
        Ok(())
    }

    pub fn forward(&self, images: &[Tensor]) -> Result<ExtractorTrace> {
        self.check_inputs(images)?;
        let mut branch_caches = Vec::with_capacity(self.branches.len());
        let mut embedding_lens = Vec::with_capacity(self.branches.len());
        let mut embedding = Vec::with_capacity(self.embedding_len());
        for (branch, img) in self.branches.iter().zip(images) {
            let (e, caches) = branch.forward(img)?;
            embedding_lens.push(e.len());
            embedding.extend_from_slice(e.data());
            branch_caches.push(caches);
        }
        let (logits, head_cache) = self.head.forward(&Tensor::from_vec(embedding))?;
        let logits = to_array(logits.data());
        let e_r = to_array(&softmax(&logits));
        Ok(ExtractorTrace {
            branch_caches,
            embedding_lens,
            head_cache,
            logits,
            e_r,
        })
    }

    /// Backpropagates `dL/dlogits` into every branch and the head.
    pub fn backward_logits(
        &self,
        trace: &ExtractorTrace,
        d_logits: &[f64; NUM_CLASSES],
    ) -> Result<ExtractorGrads> {
        let (d_embed, head) = self.head.backward(
            &trace.head_cache,
            &Tensor::from_vec(d_logits.to_vec()),
            true,
        )?;
        let d_embed = d_embed.expect("dense always yields an input gradient");
        let mut offset = 0;
        let mut branches = Vec::with_capacity(self.branches.len());
        for ((branch, caches), &len) in self
            .branches
            .iter()
            .zip(&trace.branch_caches)
            .zip(&trace.embedding_lens)
        {
            let g = Tensor::from_vec(d_embed.data()[offset..offset + len].to_vec());
            offset += len;
            let (_, grads) = branch.backward(caches, &g, false)?;
            branches.push(grads);
        }
        Ok(ExtractorGrads { branches, head })
    }

    /// Backpropagates a gradient with respect to the softmax output `e_r`.
    pub fn backward_probs(
        &self,
        trace: &ExtractorTrace,
        d_er: &[f64; NUM_CLASSES],
    ) -> Result<ExtractorGrads> {
        let d_logits = to_array(&softmax_backward(&trace.e_r, d_er));
        self.backward_logits(trace, &d_logits)
    }

    pub fn zero_grads(&self) -> ExtractorGrads {
        ExtractorGrads {
            branches: self.branches.iter().map(|b| b.zero_grads()).collect(),
            head: self
                .head
                .params
                .iter()
                .map(|p| Tensor::zeros(p.shape()))
                .collect(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.branches.iter().map(|b| b.param_count()).sum::<usize>() + self.head.spec.param_count()
    }

    pub fn flops(&self) -> Result<u64> {
        let mut total = 0;
        for (b, &s) in self.branches.iter().zip(&self.scales) {
            total += b.flops(&[1, s, s])?;
        }
        Ok(total + self.head.spec.flops(&[self.embedding_len()])?)
    }
}

impl ExtractorGrads {
    pub fn add_assign(&mut self, other: &ExtractorGrads) -> Result<()> {
        for (a, b) in self.branches.iter_mut().zip(&other.branches) {
            for (la, lb) in a.iter_mut().zip(b) {
                for (ta, tb) in la.iter_mut().zip(lb) {
                    ta.add_assign(tb)?;
                }
            }
        }
        for (a, b) in self.head.iter_mut().zip(&other.head) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.branches
            .iter()
            .flat_map(|b| b.iter().flat_map(|l| l.iter()))
            .chain(self.head.iter())
    }
}
