use super::gemm::gemm;
use super::Tensor;
use crate::error::{M3sError, Result};

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub input: Tensor,
    pub weights: Tensor,
    pub bias: Tensor,
}

/// `weights [m, n] * input + bias`. The input may have any shape with `n`
/// elements; the output is `[m]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let &[m, n] = weights.shape() else {
        return Err(M3sError::Shape(format!(
            "dense weights must be 2-D, got {:?}",
            weights.shape()
        )));
    };
    if input.len() != n {
        return Err(M3sError::Shape(format!(
            "dense expects {n} inputs, got {}",
            input.len()
        )));
    }
    bias.expect_shape(&[m], "dense bias")?;
    let mut out = bias.data().to_vec();
    gemm(
        m,
        n,
        1,
        weights.data(),
        false,
        input.data(),
        false,
        1.0,
        &mut out,
    );
    Ok(Tensor::from_vec(out))
}

pub fn dense_backward(input: &Tensor, weights: &Tensor, grad_out: &Tensor) -> Result<DenseGrads> {
    let &[m, n] = weights.shape() else {
        return Err(M3sError::Shape(format!(
            "dense weights must be 2-D, got {:?}",
            weights.shape()
        )));
    };
    if grad_out.len() != m || input.len() != n {
        return Err(M3sError::Shape(format!(
            "dense backward: upstream {} / input {} vs weights {m}x{n}",
            grad_out.len(),
            input.len()
        )));
    }
    let g = grad_out.data();
    let x = input.data();
    let mut dw = vec![0.0; m * n];
    for (row, &gi) in dw.chunks_mut(n).zip(g) {
        for (d, &xj) in row.iter_mut().zip(x) {
            *d = gi * xj;
        }
    }
    let mut dx = vec![0.0; n];
    gemm(n, m, 1, weights.data(), true, g, false, 0.0, &mut dx);
    Ok(DenseGrads {
        input: Tensor::new(input.shape().to_vec(), dx)?,
        weights: Tensor::new(vec![m, n], dw)?,
        bias: Tensor::from_vec(g.to_vec()),
    })
}
