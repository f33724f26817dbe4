use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta};
use crate::error::{M3sError, Result};

/// Unit that is kept together when splitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Every spectrum is assigned independently.
    #[default]
    Record,
    /// All spectra sharing a [`patient_key`](super::RamanSpectrum::patient_key)
    /// land on the same side.
    Patient,
}

/// Seeded shuffle into `ceil(f * N)` training and `N - ceil(f * N)` test
/// records. Each side keeps the input's relative order.
pub fn split_dataset(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    split_dataset_grouped(d, train_fraction, seed, SplitMode::Record)
}

pub fn split_dataset_grouped(
    d: &Dataset,
    train_fraction: f64,
    seed: u64,
    mode: SplitMode,
) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(M3sError::config(
            "train_fraction",
            format!("must lie in (0, 1), got {train_fraction}"),
        ));
    }
    let n = d.len();
    // Guard against 0.7 * 10 = 7.000000000000001 style rounding.
    let target = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut in_train = vec![false; n];
    match mode {
        SplitMode::Record => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            for &i in order.iter().take(target) {
                in_train[i] = true;
            }
        }
        SplitMode::Patient => {
            let mut groups: Vec<Vec<usize>> = Vec::new();
            let mut index: HashMap<&str, usize> = HashMap::new();
            for (i, s) in d.samples().iter().enumerate() {
                let g = *index.entry(s.patient_key()).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].push(i);
            }
            groups.shuffle(&mut rng);
            let mut taken = 0;
            for g in &groups {
                if taken >= target {
                    break;
                }
                for &i in g {
                    in_train[i] = true;
                }
                taken += g.len();
            }
        }
    }

    let n_train = in_train.iter().filter(|&&b| b).count();
    if n_train == 0 || n_train == n {
        return Err(M3sError::EmptySplit {
            train: n_train,
            test: n - n_train,
        });
    }
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::with_capacity(n - n_train));
    for (s, &t) in d.samples().iter().zip(&in_train) {
        if t {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    let meta = |part: &str| DatasetMeta {
        source: format!("{} [{part}]", d.meta.source),
        split_seed: Some(seed),
    };
    Ok((
        Dataset::new(train, meta("train"))?,
        Dataset::new(test, meta("test"))?,
    ))
}
