//! Synthetic spectra: Gaussian peak templates per class plus white noise, with
//! history flags drawn from per-class Bernoulli conditionals.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{
    Dataset, DatasetMeta, HistoryVector, RamanSpectrum, SubtypeLabel, DEFAULT_SEQUENCE_LEN,
    NUM_FLAGS,
};
use crate::error::{M3sError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakTemplate {
    /// Peak position in grid-index units.
    pub center: f64,
    /// Standard deviation in grid-index units.
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTemplate {
    pub label: SubtypeLabel,
    /// Number of spectra generated for this class.
    pub count: usize,
    pub peaks: Vec<PeakTemplate>,
    /// P(flag | class) in PCI, EH, DM, ACI, SM order.
    pub history_probs: [f64; NUM_FLAGS],
}

impl ClassTemplate {
    /// Noise-free template evaluated on a `len`-point grid.
    pub fn profile(&self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|x| {
                let x = x as f64;
                self.peaks
                    .iter()
                    .map(|p| {
                        let z = (x - p.center) / p.width;
                        p.amplitude * (-0.5 * z * z).exp()
                    })
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_length")]
    pub length: usize,
    /// Standard deviation of the additive Gaussian noise.
    pub noise_sigma: f64,
    /// Spectra sharing one patient id (and one history vector).
    #[serde(default = "default_spectra_per_patient")]
    pub spectra_per_patient: usize,
    pub classes: Vec<ClassTemplate>,
}

fn default_length() -> usize {
    DEFAULT_SEQUENCE_LEN
}

fn default_spectra_per_patient() -> usize {
    1
}

fn peak(center: f64, width: f64, amplitude: f64) -> PeakTemplate {
    PeakTemplate {
        center,
        width,
        amplitude,
    }
}

/// Peaks common to every default class.
fn shared_peaks() -> Vec<PeakTemplate> {
    vec![
        peak(200.0, 25.0, 1.0),
        peak(520.0, 40.0, 0.8),
        peak(850.0, 30.0, 0.6),
    ]
}

impl Default for SynthConfig {
    /// Four classes of 100 spectra each. All classes share three broad peaks
    /// and differ by one marker peak; history flags are class-correlated but
    /// never decisive on their own.
    fn default() -> Self {
        let class = |label, marker: f64, history_probs| {
            let mut peaks = shared_peaks();
            peaks.push(peak(marker, 15.0, 0.5));
            ClassTemplate {
                label,
                count: 100,
                peaks,
                history_probs,
            }
        };
        SynthConfig {
            length: DEFAULT_SEQUENCE_LEN,
            noise_sigma: 0.05,
            spectra_per_patient: 1,
            classes: vec![
                class(SubtypeLabel::Ami, 330.0, [0.6, 0.5, 0.3, 0.1, 0.7]),
                class(SubtypeLabel::Cad, 420.0, [0.5, 0.6, 0.4, 0.1, 0.4]),
                class(SubtypeLabel::Af, 650.0, [0.1, 0.5, 0.3, 0.4, 0.3]),
                class(SubtypeLabel::Con, 740.0, [0.02, 0.2, 0.1, 0.05, 0.2]),
            ],
        }
    }
}

impl SynthConfig {
    /// AF and CON share one spectral template, so spectra alone cannot tell
    /// them apart; DM occurs only in AF and ACI only in CON.
    pub fn confounded_history() -> Self {
        let mut cfg = SynthConfig::default();
        let af_peaks = cfg.classes[SubtypeLabel::Af.index()].peaks.clone();
        cfg.classes[SubtypeLabel::Con.index()].peaks = af_peaks;
        cfg.classes[SubtypeLabel::Ami.index()].history_probs = [0.6, 0.5, 0.0, 0.0, 0.7];
        cfg.classes[SubtypeLabel::Cad.index()].history_probs = [0.5, 0.6, 0.0, 0.0, 0.4];
        cfg.classes[SubtypeLabel::Af.index()].history_probs = [0.0, 0.0, 1.0, 0.0, 0.0];
        cfg.classes[SubtypeLabel::Con.index()].history_probs = [0.0, 0.0, 0.0, 1.0, 0.0];
        cfg
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| M3sError::io(path, e))?;
        let cfg: SynthConfig = serde_json::from_str(&text).map_err(|e| M3sError::Parse {
            row: e.line(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn total_count(&self) -> usize {
        self.classes.iter().map(|c| c.count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(M3sError::config(
                "noise_sigma",
                format!("must be a finite value >= 0, got {}", self.noise_sigma),
            ));
        }
        if self.length < 2 {
            return Err(M3sError::config("length", "must be at least 2"));
        }
        if self.spectra_per_patient < 1 {
            return Err(M3sError::config(
                "spectra_per_patient",
                "must be at least 1",
            ));
        }
        if self.classes.is_empty() {
            return Err(M3sError::config(
                "classes",
                "at least one class is required",
            ));
        }
        let mut seen = HashSet::new();
        for (i, c) in self.classes.iter().enumerate() {
            if !seen.insert(c.label) {
                return Err(M3sError::config(
                    format!("classes[{i}].label"),
                    format!("duplicate label {}", c.label),
                ));
            }
            if c.count < 1 {
                return Err(M3sError::config(
                    format!("classes[{i}].count"),
                    "must be at least 1",
                ));
            }
            for (k, &p) in c.history_probs.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(M3sError::config(
                        format!("classes[{i}].history_probs[{k}]"),
                        format!("probability {p} outside [0, 1]"),
                    ));
                }
            }
            for (k, p) in c.peaks.iter().enumerate() {
                if p.width.is_nan()
                    || p.width <= 0.0
                    || !p.center.is_finite()
                    || !p.amplitude.is_finite()
                {
                    return Err(M3sError::config(
                        format!("classes[{i}].peaks[{k}]"),
                        "width must be > 0 and center/amplitude finite",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates a labeled dataset. Output is a pure function of `(config, seed)`.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(config.total_count());
    let spp = config.spectra_per_patient;

    for class in &config.classes {
        let profile = class.profile(config.length);
        let mut flags = HistoryVector::NONE;
        for k in 0..class.count {
            if k % spp == 0 {
                for (f, &p) in flags.0.iter_mut().zip(&class.history_probs) {
                    *f = rng.gen_bool(p);
                }
            }
            let values = profile
                .iter()
                .map(|&v| {
                    let z: f64 = rng.sample(StandardNormal);
                    v + config.noise_sigma * z
                })
                .collect();
            let id = if spp == 1 {
                format!("{}-{:04}", class.label, k)
            } else {
                format!("{}-p{:04}/{}", class.label, k / spp, k % spp)
            };
            samples.push(RamanSpectrum::new(id, values, Some(class.label), flags)?);
        }
    }
    Dataset::new(
        samples,
        DatasetMeta {
            source: format!("synthetic(seed={seed})"),
            split_seed: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_class(sigma: f64) -> SynthConfig {
        SynthConfig {
            length: 64,
            noise_sigma: sigma,
            spectra_per_patient: 1,
            classes: vec![ClassTemplate {
                label: SubtypeLabel::Cad,
                count: 5,
                peaks: vec![peak(30.0, 4.0, 2.0)],
                history_probs: [0.5; NUM_FLAGS],
            }],
        }
    }

    #[test]
    fn noiseless_samples_identical() {
        let d = synth_generate(&single_class(0.0), 9).unwrap();
        let first = &d.samples()[0].values;
        assert!(d.samples().iter().all(|s| &s.values == first));
        assert!((first[30] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_conditionals() {
        let mut cfg = SynthConfig {
            length: 32,
            ..SynthConfig::default()
        };
        for c in &mut cfg.classes {
            c.count = 20;
            c.peaks = vec![peak(10.0, 3.0, 1.0)];
            c.history_probs[4] = if c.label == SubtypeLabel::Ami {
                1.0
            } else {
                0.0
            };
        }
        let d = synth_generate(&cfg, 1).unwrap();
        for s in d.samples() {
            assert_eq!(s.history.0[4], s.label == Some(SubtypeLabel::Ami));
        }
    }

    #[test]
    fn bitwise_reproducible() {
        let cfg = SynthConfig::default();
        assert_eq!(
            synth_generate(&cfg, 5).unwrap(),
            synth_generate(&cfg, 5).unwrap()
        );
        assert_ne!(
            synth_generate(&cfg, 5).unwrap().samples()[0].values,
            synth_generate(&cfg, 6).unwrap().samples()[0].values
        );
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = single_class(-0.1);
        match cfg.validate() {
            Err(M3sError::InvalidConfig { field, .. }) => assert_eq!(field, "noise_sigma"),
            other => panic!("{other:?}"),
        }
        cfg.noise_sigma = 0.1;
        cfg.classes[0].count = 0;
        assert!(cfg.validate().is_err());
        cfg.classes[0].count = 1;
        cfg.classes[0].history_probs[2] = 1.5;
        match cfg.validate() {
            Err(M3sError::InvalidConfig { field, .. }) => {
                assert_eq!(field, "classes[0].history_probs[2]")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn patients_share_history() {
        let mut cfg = single_class(0.1);
        cfg.classes[0].count = 12;
        cfg.spectra_per_patient = 4;
        let d = synth_generate(&cfg, 2).unwrap();
        for chunk in d.samples().chunks(4) {
            assert!(chunk.iter().all(|s| s.history == chunk[0].history));
            assert!(chunk
                .iter()
                .all(|s| s.patient_key() == chunk[0].patient_key()));
        }
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = SynthConfig::confounded_history();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: SynthConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.classes[3].peaks, back.classes[2].peaks);
    }
}
