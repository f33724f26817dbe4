//! 2-D cross-correlation with zero padding, lowered to GEMM via im2col.

use super::gemm::gemm;
use super::Tensor;
use crate::error::{M3sError, Result};

/// Output side length `floor((size + 2p - f) / s) + 1`, or `None` when the
/// kernel does not fit.
pub fn conv_output_size(
    size: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Option<usize> {
    if kernel == 0 || stride == 0 || size + 2 * padding < kernel {
        return None;
    }
    Some((size + 2 * padding - kernel) / stride + 1)
}

/// State saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ConvCache {
    in_shape: [usize; 3],
    out_hw: (usize, usize),
    kernel: usize,
    stride: usize,
    padding: usize,
    /// im2col matrix, `(C_in * f * f) x (H' * W')`.
    cols: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weights: Tensor,
    pub bias: Tensor,
}

#[allow(clippy::too_many_arguments)]
fn im2col(
    input: &[f64],
    (c_in, h, w): (usize, usize, usize),
    f: usize,
    s: usize,
    p: usize,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let npos = ho * wo;
    let mut cols = vec![0.0; c_in * f * f * npos];
    for c in 0..c_in {
        let plane = &input[c * h * w..(c + 1) * h * w];
        for ki in 0..f {
            for kj in 0..f {
                let row = (c * f + ki) * f + kj;
                let dst = &mut cols[row * npos..(row + 1) * npos];
                for oy in 0..ho {
                    let iy = (oy * s + ki) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                    for ox in 0..wo {
                        let ix = (ox * s + kj) as isize - p as isize;
                        if ix >= 0 && ix < w as isize {
                            dst[oy * wo + ox] = src[ix as usize];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(
    cols: &[f64],
    (c_in, h, w): (usize, usize, usize),
    f: usize,
    s: usize,
    p: usize,
    (ho, wo): (usize, usize),
) -> Vec<f64> {
    let npos = ho * wo;
    let mut out = vec![0.0; c_in * h * w];
    for c in 0..c_in {
        let plane = &mut out[c * h * w..(c + 1) * h * w];
        for ki in 0..f {
            for kj in 0..f {
                let row = (c * f + ki) * f + kj;
                let src = &cols[row * npos..(row + 1) * npos];
                for oy in 0..ho {
                    let iy = (oy * s + ki) as isize - p as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for ox in 0..wo {
                        let ix = (ox * s + kj) as isize - p as isize;
                        if ix >= 0 && ix < w as isize {
                            plane[iy as usize * w + ix as usize] += src[oy * wo + ox];
                        }
                    }
                }
            }
        }
    }
    out
}

/// `input [C_in, H, W]`, `weights [C_out, C_in, f, f]`, `bias [C_out]` ->
/// `[C_out, H', W']`.
pub fn conv2d_forward(
    input: &Tensor,
    weights: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<(Tensor, ConvCache)> {
    let &[c_in, h, w] = input.shape() else {
        return Err(M3sError::Shape(format!(
            "conv input must be 3-D, got {:?}",
            input.shape()
        )));
    };
    let &[c_out, wc_in, f, f2] = weights.shape() else {
        return Err(M3sError::Shape(format!(
            "conv weights must be 4-D, got {:?}",
            weights.shape()
        )));
    };
    if wc_in != c_in || f != f2 {
        return Err(M3sError::Shape(format!(
            "weights {:?} incompatible with input {:?}",
            weights.shape(),
            input.shape()
        )));
    }
    bias.expect_shape(&[c_out], "conv bias")?;
    let (Some(ho), Some(wo)) = (
        conv_output_size(h, f, stride, padding),
        conv_output_size(w, f, stride, padding),
    ) else {
        return Err(M3sError::Shape(format!(
            "kernel {f} stride {stride} padding {padding} does not fit {h}x{w}"
        )));
    };

    let cols = im2col(input.data(), (c_in, h, w), f, stride, padding, (ho, wo));
    let npos = ho * wo;
    let mut out = vec![0.0; c_out * npos];
    for (co, row) in out.chunks_mut(npos).enumerate() {
        row.fill(bias.data()[co]);
    }
    gemm(
        c_out,
        c_in * f * f,
        npos,
        weights.data(),
        false,
        &cols,
        false,
        1.0,
        &mut out,
    );
    let cache = ConvCache {
        in_shape: [c_in, h, w],
        out_hw: (ho, wo),
        kernel: f,
        stride,
        padding,
        cols,
    };
    Ok((Tensor::new(vec![c_out, ho, wo], out)?, cache))
}

/// Exact reverse-mode gradients of [`conv2d_forward`]. The input gradient is
/// skipped unless `need_input` is set.
pub fn conv2d_backward(
    cache: &ConvCache,
    weights: &Tensor,
    grad_out: &Tensor,
    need_input: bool,
) -> Result<ConvGrads> {
    let c_out = weights.shape()[0];
    let (ho, wo) = cache.out_hw;
    grad_out.expect_shape(&[c_out, ho, wo], "conv upstream gradient")?;
    let [c_in, h, w] = cache.in_shape;
    let f = cache.kernel;
    let npos = ho * wo;
    let krows = c_in * f * f;

    let g = grad_out.data();
    let mut dw = vec![0.0; c_out * krows];
    gemm(
        c_out,
        npos,
        krows,
        g,
        false,
        &cache.cols,
        true,
        0.0,
        &mut dw,
    );
    let db: Vec<f64> = g.chunks(npos).map(|row| row.iter().sum()).collect();

    let input = if need_input {
        let mut dcols = vec![0.0; krows * npos];
        gemm(
            krows,
            c_out,
            npos,
            weights.data(),
            true,
            g,
            false,
            0.0,
            &mut dcols,
        );
        let dx = col2im(
            &dcols,
            (c_in, h, w),
            f,
            cache.stride,
            cache.padding,
            (ho, wo),
        );
        Some(Tensor::new(vec![c_in, h, w], dx)?)
    } else {
        None
    };
    Ok(ConvGrads {
        input,
        weights: Tensor::new(weights.shape().to_vec(), dw)?,
        bias: Tensor::new(vec![c_out], db)?,
    })
}
