//! Spectral data model: labels, history flags, spectra and datasets, plus
//! preprocessing, file ingestion, splitting and the synthetic generator.

mod io;
mod preprocess;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{M3sError, Result};

pub use io::{load_dataset, load_dataset_with_len, write_dataset, DataFormat};
pub use preprocess::{paa, rescale};
pub use split::{split_dataset, split_dataset_grouped, SplitMode};
pub use synth::{synth_generate, ClassTemplate, PeakTemplate, SynthConfig};

/// Sequence length of one spectrum unless configured otherwise.
pub const DEFAULT_SEQUENCE_LEN: usize = 1024;
pub const NUM_CLASSES: usize = 4;
pub const NUM_FLAGS: usize = 5;

/// Cardiovascular subtype. The discriminant is the class index used by every
/// matrix and metric in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SubtypeLabel {
    #[serde(rename = "AMI")]
    Ami = 0,
    #[serde(rename = "CAD")]
    Cad = 1,
    #[serde(rename = "AF")]
    Af = 2,
    #[serde(rename = "CON")]
    Con = 3,
}

impl SubtypeLabel {
    pub const ALL: [SubtypeLabel; NUM_CLASSES] = [
        SubtypeLabel::Ami,
        SubtypeLabel::Cad,
        SubtypeLabel::Af,
        SubtypeLabel::Con,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SubtypeLabel::Ami => "AMI",
            SubtypeLabel::Cad => "CAD",
            SubtypeLabel::Af => "AF",
            SubtypeLabel::Con => "CON",
        }
    }
}

impl fmt::Display for SubtypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SubtypeLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AMI" => Ok(SubtypeLabel::Ami),
            "CAD" => Ok(SubtypeLabel::Cad),
            "AF" => Ok(SubtypeLabel::Af),
            "CON" => Ok(SubtypeLabel::Con),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// One of the five medical-history indicators, in matrix row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistoryFlag {
    /// Percutaneous coronary intervention.
    Pci = 0,
    /// Essential hypertension.
    Eh = 1,
    /// Diabetes mellitus.
    Dm = 2,
    /// Acute cerebral infarct.
    Aci = 3,
    /// Smoking.
    Sm = 4,
}

impl HistoryFlag {
    pub const ALL: [HistoryFlag; NUM_FLAGS] = [
        HistoryFlag::Pci,
        HistoryFlag::Eh,
        HistoryFlag::Dm,
        HistoryFlag::Aci,
        HistoryFlag::Sm,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HistoryFlag::Pci => "PCI",
            HistoryFlag::Eh => "EH",
            HistoryFlag::Dm => "DM",
            HistoryFlag::Aci => "ACI",
            HistoryFlag::Sm => "SM",
        }
    }
}

/// Five history flags in the fixed order PCI, EH, DM, ACI, SM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(from = "[u8; NUM_FLAGS]", into = "[u8; NUM_FLAGS]")]
pub struct HistoryVector(pub [bool; NUM_FLAGS]);

impl HistoryVector {
    pub const NONE: HistoryVector = HistoryVector([false; NUM_FLAGS]);

    pub fn get(&self, flag: HistoryFlag) -> bool {
        self.0[flag.index()]
    }

    pub fn set(&mut self, flag: HistoryFlag, value: bool) {
        self.0[flag.index()] = value;
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl From<[u8; NUM_FLAGS]> for HistoryVector {
    fn from(v: [u8; NUM_FLAGS]) -> Self {
        HistoryVector(v.map(|x| x != 0))
    }
}

impl From<HistoryVector> for [u8; NUM_FLAGS] {
    fn from(h: HistoryVector) -> Self {
        h.0.map(u8::from)
    }
}

/// One spectrum with its optional label and the patient's history flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanSpectrum {
    pub id: String,
    pub values: Vec<f64>,
    pub label: Option<SubtypeLabel>,
    pub history: HistoryVector,
}

impl RamanSpectrum {
    /// Builds a spectrum, rejecting empty or non-finite sequences.
    pub fn new(
        id: impl Into<String>,
        values: Vec<f64>,
        label: Option<SubtypeLabel>,
        history: HistoryVector,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(M3sError::Empty("spectrum values"));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(M3sError::NonFinite { index });
        }
        Ok(Self {
            id: id.into(),
            values,
            label,
            history,
        })
    }

    /// Patient grouping key: the part of the id before the first `/`.
    pub fn patient_key(&self) -> &str {
        self.id.split('/').next().unwrap_or(&self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    /// Seed of the split that produced this dataset, if any.
    pub split_seed: Option<u64>,
}

/// A non-empty collection of equal-length spectra.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<RamanSpectrum>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(samples: Vec<RamanSpectrum>, meta: DatasetMeta) -> Result<Self> {
        let first = samples.first().ok_or(M3sError::Empty("dataset"))?;
        let len = first.values.len();
        for (row, s) in samples.iter().enumerate() {
            if s.values.len() != len {
                return Err(M3sError::Schema {
                    row: row + 1,
                    message: format!("expected {len} values, found {}", s.values.len()),
                });
            }
        }
        Ok(Self { samples, meta })
    }

    pub fn samples(&self) -> &[RamanSpectrum] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<RamanSpectrum> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sequence_len(&self) -> usize {
        self.samples[0].values.len()
    }

    /// Labels of all samples; fails on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<SubtypeLabel>> {
        self.samples
            .iter()
            .map(|s| {
                s.label
                    .ok_or_else(|| M3sError::UnlabeledSample { id: s.id.clone() })
            })
            .collect()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for s in &self.samples {
            if let Some(l) = s.label {
                counts[l.index()] += 1;
            }
        }
        counts
    }
}
