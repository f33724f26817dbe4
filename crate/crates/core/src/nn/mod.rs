//! Minimal CPU neural-network engine: conv2d, maxpool2d, ReLU, dense and
//! flatten layers with explicit reverse-mode gradients, softmax
//! cross-entropy, plain SGD and a finite-difference gradient checker.

mod conv;
mod dense;
mod gemm;
pub mod gradcheck;
mod layers;
mod loss;
mod pool;
mod sgd;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, conv_output_size, ConvCache, ConvGrads};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, ParamBlock};
pub use layers::{Layer, LayerCache, LayerSpec, Sequential, SequentialGrads};
pub use loss::{argmax, softmax, softmax_backward, softmax_cross_entropy};
pub use pool::{maxpool2d_backward, maxpool2d_forward, PoolCache};
pub use sgd::sgd_step;
pub use tensor::Tensor;
