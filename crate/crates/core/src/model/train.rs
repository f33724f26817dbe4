//! End-to-end training loop.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::extractor::image_tensor;
use super::fusion::build_probability_matrix;
use super::m3s::M3sModel;
use crate::error::{M3sError, Result};
use crate::gaf::encode_dataset;
use crate::nn::{argmax, Tensor};
use crate::spectra::Dataset;

/// RNG stream used for the per-epoch sample order.
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sample cross-entropy over the epoch.
    pub loss: f64,
    /// Fraction of samples whose pre-update prediction was correct.
    pub train_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: M3sModel,
    pub log: Vec<EpochLog>,
}

/// Trains a model on `train` only. The probability matrix is built from
/// these samples; nothing outside this dataset is seen.
pub fn train(train: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    train_with(train, config, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with<F>(train: &Dataset, config: &TrainConfig, mut on_epoch: F) -> Result<TrainOutcome>
where
    F: FnMut(&EpochLog),
{
    config.validate()?;
    let labels = train.labels()?;
    let probability_matrix = build_probability_matrix(train)?;
    let mut model = M3sModel::init(config, probability_matrix)?;
    model.sequence_len = Some(train.sequence_len());

    let exec = config.execution;
    let images: Vec<Vec<Tensor>> = encode_dataset(train, &config.scales, exec)?
        .into_iter()
        .map(|imgs| imgs.iter().map(image_tensor).collect())
        .collect();
    let samples = train.samples();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            let results = exec.map(batch, |&i| {
                model
                    .sample_gradients(&images[i], &samples[i].history, labels[i])
                    .map(|(loss, pass, grads)| {
                        (
                            loss,
                            argmax(&pass.probabilities) == labels[i].index(),
                            grads,
                        )
                    })
            });
            let mut total = model.zero_grads();
            for r in results {
                let (loss, hit, grads) = r.map_err(|e| match e {
                    M3sError::NonFinite { .. } => M3sError::DivergedLoss { epoch },
                    other => other,
                })?;
                loss_sum += loss;
                correct += usize::from(hit);
                total.add_assign(&grads)?;
            }
            model.apply_gradients(&total, config.lr / batch.len() as f64)?;
        }
        let entry = EpochLog {
            epoch,
            loss: loss_sum / train.len() as f64,
            train_accuracy: correct as f64 / train.len() as f64,
        };
        if !entry.loss.is_finite() {
            return Err(M3sError::DivergedLoss { epoch });
        }
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(TrainOutcome { model, log })
}

/// Writes the per-epoch log as `epoch,loss,train_accuracy` CSV.
pub fn write_loss_log(log: &[EpochLog], path: &Path) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path).map_err(|e| M3sError::io(path, e.into()))?;
    for entry in log {
        wtr.serialize(entry)
            .map_err(|e| M3sError::io(path, e.into()))?;
    }
    wtr.flush().map_err(|e| M3sError::io(path, e))
}
