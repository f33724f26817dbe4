//! Layer specifications, parameterised layers and sequential stacks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::conv::{conv2d_backward, conv2d_forward, conv_output_size, ConvCache};
use super::dense::{dense_backward, dense_forward};
use super::pool::{maxpool2d_backward, maxpool2d_forward, PoolCache};
use super::Tensor;
use crate::error::{M3sError, Result};

/// Architecture of a single layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    Maxpool2d {
        kernel: usize,
        stride: usize,
    },
    Relu,
    Dense {
        inputs: usize,
        units: usize,
    },
    Flatten,
}

impl LayerSpec {
    pub fn conv(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    ) -> Self {
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(M3sError::Shape(msg));
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                ..
            } => {
                if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 {
                    return bad(format!("invalid conv spec {self:?}"));
                }
            }
            LayerSpec::Maxpool2d { kernel, stride } => {
                if kernel == 0 || stride == 0 {
                    return bad(format!("invalid maxpool spec {self:?}"));
                }
            }
            LayerSpec::Dense { inputs, units } => {
                if inputs == 0 || units == 0 {
                    return bad(format!("invalid dense spec {self:?}"));
                }
            }
            LayerSpec::Relu | LayerSpec::Flatten => {}
        }
        Ok(())
    }

    /// Trainable scalars: weights plus biases.
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => out_channels * in_channels * kernel * kernel + out_channels,
            LayerSpec::Dense { inputs, units } => units * inputs + units,
            _ => 0,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
            } => {
                let &[c, h, w] = input else {
                    return Err(M3sError::Shape(format!(
                        "conv expects 3-D input, got {input:?}"
                    )));
                };
                if c != in_channels {
                    return Err(M3sError::Shape(format!(
                        "conv expects {in_channels} channels, got {c}"
                    )));
                }
                match (
                    conv_output_size(h, kernel, stride, padding),
                    conv_output_size(w, kernel, stride, padding),
                ) {
                    (Some(ho), Some(wo)) => Ok(vec![out_channels, ho, wo]),
                    _ => Err(M3sError::Shape(format!(
                        "conv {self:?} does not fit {input:?}"
                    ))),
                }
            }
            LayerSpec::Maxpool2d { kernel, stride } => {
                let &[c, h, w] = input else {
                    return Err(M3sError::Shape(format!(
                        "maxpool expects 3-D input, got {input:?}"
                    )));
                };
                match (
                    conv_output_size(h, kernel, stride, 0),
                    conv_output_size(w, kernel, stride, 0),
                ) {
                    (Some(ho), Some(wo)) => Ok(vec![c, ho, wo]),
                    _ => Err(M3sError::Shape(format!(
                        "maxpool {self:?} does not fit {input:?}"
                    ))),
                }
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, units } => {
                let n: usize = input.iter().product();
                if n != inputs {
                    return Err(M3sError::Shape(format!(
                        "dense expects {inputs} inputs, got {n}"
                    )));
                }
                Ok(vec![units])
            }
        }
    }

    /// Forward FLOPs as 2 x multiply-accumulates; only conv and dense count.
    pub fn flops(&self, input: &[usize]) -> Result<u64> {
        let out = self.output_shape(input)?;
        Ok(match *self {
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                ..
            } => {
                let outputs: usize = out.iter().product();
                2 * (outputs * in_channels * kernel * kernel) as u64
            }
            LayerSpec::Dense { inputs, units } => 2 * (inputs * units) as u64,
            _ => 0,
        })
    }

    fn param_shapes(&self) -> Vec<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
                ..
            } => vec![
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            ],
            LayerSpec::Dense { inputs, units } => vec![vec![units, inputs], vec![units]],
            _ => Vec::new(),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                kernel,
                ..
            } => in_channels * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }
}

/// A layer with its parameters (`[weights, bias]` for conv and dense, empty
/// otherwise).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub spec: LayerSpec,
    pub params: Vec<Tensor>,
}

/// Forward-pass state needed by [`Layer::backward`].
#[derive(Debug, Clone)]
pub enum LayerCache {
    Conv(ConvCache),
    Pool(PoolCache),
    Relu(Vec<bool>),
    Dense(Tensor),
    Flatten(Vec<usize>),
}

impl Layer {
    /// Weights drawn from U(-b, b) with `b = sqrt(6 / fan_in)`; zero biases.
    pub fn init<R: Rng>(spec: LayerSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let fan_in = spec.fan_in();
        let params = spec
            .param_shapes()
            .into_iter()
            .enumerate()
            .map(|(i, shape)| {
                let mut t = Tensor::zeros(&shape);
                if i == 0 {
                    let bound = (6.0 / fan_in as f64).sqrt();
                    for v in t.data_mut() {
                        *v = rng.gen_range(-bound..bound);
                    }
                }
                t
            })
            .collect();
        Ok(Self { spec, params })
    }

    /// Builds a layer from explicit parameters, checking their shapes.
    pub fn with_params(spec: LayerSpec, params: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let shapes = spec.param_shapes();
        if shapes.len() != params.len() {
            return Err(M3sError::Shape(format!(
                "{spec:?} takes {} parameter tensors, got {}",
                shapes.len(),
                params.len()
            )));
        }
        for (shape, p) in shapes.iter().zip(&params) {
            p.expect_shape(shape, "layer parameter")?;
        }
        Ok(Self { spec, params })
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, LayerCache)> {
        match self.spec {
            LayerSpec::Conv2d {
                stride, padding, ..
            } => {
                let (y, cache) =
                    conv2d_forward(input, &self.params[0], &self.params[1], stride, padding)?;
                Ok((y, LayerCache::Conv(cache)))
            }
            LayerSpec::Maxpool2d { kernel, stride } => {
                let (y, cache) = maxpool2d_forward(input, kernel, stride)?;
                Ok((y, LayerCache::Pool(cache)))
            }
            LayerSpec::Relu => {
                let mask: Vec<bool> = input.data().iter().map(|&v| v > 0.0).collect();
                let data = input.data().iter().map(|&v| v.max(0.0)).collect();
                Ok((
                    Tensor::new(input.shape().to_vec(), data)?,
                    LayerCache::Relu(mask),
                ))
            }
            LayerSpec::Dense { .. } => {
                let y = dense_forward(input, &self.params[0], &self.params[1])?;
                Ok((y, LayerCache::Dense(input.clone())))
            }
            LayerSpec::Flatten => {
                let shape = input.shape().to_vec();
                Ok((
                    Tensor::from_vec(input.data().to_vec()),
                    LayerCache::Flatten(shape),
                ))
            }
        }
    }

    /// Returns the input gradient (when requested or needed) and one gradient
    /// tensor per parameter.
    pub fn backward(
        &self,
        cache: &LayerCache,
        grad_out: &Tensor,
        need_input: bool,
    ) -> Result<(Option<Tensor>, Vec<Tensor>)> {
        match (cache, &self.spec) {
            (LayerCache::Conv(c), LayerSpec::Conv2d { .. }) => {
                let g = conv2d_backward(c, &self.params[0], grad_out, need_input)?;
                Ok((g.input, vec![g.weights, g.bias]))
            }
            (LayerCache::Pool(c), LayerSpec::Maxpool2d { .. }) => {
                Ok((Some(maxpool2d_backward(c, grad_out)?), Vec::new()))
            }
            (LayerCache::Relu(mask), LayerSpec::Relu) => {
                if mask.len() != grad_out.len() {
                    return Err(M3sError::Shape("relu upstream gradient size".into()));
                }
                let data = grad_out
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&g, &m)| if m { g } else { 0.0 })
                    .collect();
                Ok((
                    Some(Tensor::new(grad_out.shape().to_vec(), data)?),
                    Vec::new(),
                ))
            }
            (LayerCache::Dense(x), LayerSpec::Dense { .. }) => {
                let g = dense_backward(x, &self.params[0], grad_out)?;
                Ok((Some(g.input), vec![g.weights, g.bias]))
            }
            (LayerCache::Flatten(shape), LayerSpec::Flatten) => {
                Ok((Some(grad_out.clone().reshape(shape.clone())?), Vec::new()))
            }
            _ => Err(M3sError::Shape(format!(
                "cache does not belong to layer {:?}",
                self.spec
            ))),
        }
    }
}

/// Parameter gradients of a [`Sequential`], laid out like its parameters.
pub type SequentialGrads = Vec<Vec<Tensor>>;

/// A stack of layers applied in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    pub layers: Vec<Layer>,
}

impl Sequential {
    pub fn init<R: Rng>(specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|s| Layer::init(s.clone(), rng))
            .collect::<Result<_>>()?;
        Ok(Self { layers })
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.layers
            .iter()
            .try_fold(input.to_vec(), |shape, l| l.spec.output_shape(&shape))
    }

    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Vec<LayerCache>)> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Backpropagates `grad_out` through the stack. The gradient with respect
    /// to the stack input is returned only when `need_input` is set.
    pub fn backward(
        &self,
        caches: &[LayerCache],
        grad_out: &Tensor,
        need_input: bool,
    ) -> Result<(Option<Tensor>, SequentialGrads)> {
        if caches.len() != self.layers.len() {
            return Err(M3sError::Shape(
                "cache count does not match layer count".into(),
            ));
        }
        let mut grads: SequentialGrads = vec![Vec::new(); self.layers.len()];
        let mut g = grad_out.clone();
        for (i, (layer, cache)) in self.layers.iter().zip(caches).enumerate().rev() {
            let want_input = i > 0 || need_input;
            let (dx, dp) = layer.backward(cache, &g, want_input)?;
            grads[i] = dp;
            match dx {
                Some(dx) => g = dx,
                None => return Ok((None, grads)),
            }
        }
        Ok((need_input.then_some(g), grads))
    }

    pub fn zero_grads(&self) -> SequentialGrads {
        self.layers
            .iter()
            .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
            .collect()
    }

    pub fn params(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| l.params.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.spec.param_count()).sum()
    }

    pub fn flops(&self, input: &[usize]) -> Result<u64> {
        let mut shape = input.to_vec();
        let mut total = 0;
        for l in &self.layers {
            total += l.spec.flops(&shape)?;
            shape = l.spec.output_shape(&shape)?;
        }
        Ok(total)
    }
}
