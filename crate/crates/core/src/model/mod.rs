//! The M3S system: multi-scale extractor, history fusion, training and
//! prediction.

mod checkpoint;
mod config;
mod extractor;
mod fusion;
mod m3s;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT};
pub use config::{default_kernel, FusionPolicy, TrainConfig, WeightMode};
pub use extractor::{image_tensor, ExtractorGrads, ExtractorTrace, MultiScaleExtractor};
pub use fusion::{
    build_probability_matrix, fuse, fuse_backward, FusionOutput, ProbabilityMatrix, WeightMatrix,
    FUSION_ROWS,
};
pub use m3s::{ForwardPass, M3sModel, ModelGrads, Prediction};
pub use train::{train, train_with, write_loss_log, EpochLog, TrainOutcome};
