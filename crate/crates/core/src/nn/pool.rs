use super::conv::conv_output_size;
use super::Tensor;
use crate::error::{M3sError, Result};

#[derive(Debug, Clone)]
pub struct PoolCache {
    in_shape: [usize; 3],
    /// Flat input index of each output's winner.
    argmax: Vec<usize>,
}

/// Max pooling without padding. Ties go to the first element of the window
/// in row-major order.
pub fn maxpool2d_forward(
    input: &Tensor,
    kernel: usize,
    stride: usize,
) -> Result<(Tensor, PoolCache)> {
    let &[c, h, w] = input.shape() else {
        return Err(M3sError::Shape(format!(
            "maxpool input must be 3-D, got {:?}",
            input.shape()
        )));
    };
    let (Some(ho), Some(wo)) = (
        conv_output_size(h, kernel, stride, 0),
        conv_output_size(w, kernel, stride, 0),
    ) else {
        return Err(M3sError::Shape(format!(
            "pool window {kernel} stride {stride} does not fit {h}x{w}"
        )));
    };
    let x = input.data();
    let mut out = Vec::with_capacity(c * ho * wo);
    let mut argmax = Vec::with_capacity(c * ho * wo);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..ho {
            for ox in 0..wo {
                let mut best = base + oy * stride * w + ox * stride;
                for ky in 0..kernel {
                    let row = base + (oy * stride + ky) * w + ox * stride;
                    for idx in row..row + kernel {
                        if x[idx] > x[best] {
                            best = idx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((
        Tensor::new(vec![c, ho, wo], out)?,
        PoolCache {
            in_shape: [c, h, w],
            argmax,
        },
    ))
}

/// Routes each upstream gradient to its window's winner.
pub fn maxpool2d_backward(cache: &PoolCache, grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != cache.argmax.len() {
        return Err(M3sError::Shape(format!(
            "maxpool upstream gradient has {} elements, expected {}",
            grad_out.len(),
            cache.argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(&cache.in_shape);
    let d = dx.data_mut();
    for (&idx, &g) in cache.argmax.iter().zip(grad_out.data()) {
        d[idx] += g;
    }
    Ok(dx)
}
