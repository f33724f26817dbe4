use super::Tensor;
use crate::error::{M3sError, Result};

/// Plain SGD: `p <- p - lr * g` for every parameter, no momentum or decay.
pub fn sgd_step<'a, P, G>(params: P, grads: G, lr: f64) -> Result<()>
where
    P: IntoIterator<Item = &'a mut Tensor>,
    G: IntoIterator<Item = &'a Tensor>,
{
    if lr.is_nan() || lr <= 0.0 {
        return Err(M3sError::config(
            "lr",
            format!("learning rate must be > 0, got {lr}"),
        ));
    }
    let mut grads = grads.into_iter();
    for p in params {
        let g = grads
            .next()
            .ok_or_else(|| M3sError::Shape("fewer gradients than parameters".into()))?;
        g.expect_shape(p.shape(), "sgd gradient")?;
        for (v, d) in p.data_mut().iter_mut().zip(g.data()) {
            *v -= lr * d;
        }
    }
    if grads.next().is_some() {
        return Err(M3sError::Shape("more gradients than parameters".into()));
    }
    Ok(())
}
