//! Gramian angular summation field encoding.
//!
//! A rescaled, PAA-reduced sequence is read as angles `phi = arccos(x)`; the
//! image pixel `(a, b)` is `cos(phi_a + phi_b)`. The polar radius `t / B` is
//! kept for inspection only, pixels depend on the angles alone.

use serde::{Deserialize, Serialize};

use crate::error::{M3sError, Result};
use crate::exec::Execution;
use crate::spectra::{paa, rescale, Dataset, RamanSpectrum};

/// Values this far outside [-1, 1] are treated as rounding residue and clamped.
pub const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolarSequence {
    /// Angles in [0, pi].
    pub phi: Vec<f64>,
    /// `(k + 1) / span`, strictly increasing in (0, 1].
    pub radius: Vec<f64>,
    pub span: f64,
}

impl PolarSequence {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }
}

/// Square, symmetric image with pixels in [-1, 1], stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GafImage {
    pub scale: usize,
    pub pixels: Vec<f64>,
}

impl GafImage {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.scale + col]
    }

    /// Affine map [-1, 1] -> [0, 255] for viewing.
    pub fn to_gray_u8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&v| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8)
            .collect()
    }
}

/// Angle/radius representation of a normalized sequence, with `B = len`.
pub fn to_polar(norm_seq: &[f64]) -> Result<PolarSequence> {
    if norm_seq.is_empty() {
        return Err(M3sError::Empty("polar encoding of an empty sequence"));
    }
    let phi = norm_seq
        .iter()
        .enumerate()
        .map(|(index, &x)| {
            if !x.is_finite() || x.abs() > 1.0 + DOMAIN_SLACK {
                return Err(M3sError::Domain { index, value: x });
            }
            Ok(x.clamp(-1.0, 1.0).acos())
        })
        .collect::<Result<Vec<f64>>>()?;
    let span = norm_seq.len() as f64;
    let radius = (1..=norm_seq.len()).map(|t| t as f64 / span).collect();
    Ok(PolarSequence { phi, radius, span })
}

/// Summation field `cos(phi_a + phi_b)`. The lower triangle mirrors the upper
/// one so the image is exactly symmetric.
pub fn gasf(polar: &PolarSequence) -> GafImage {
    let n = polar.len();
    let mut pixels = vec![0.0; n * n];
    for a in 0..n {
        for b in a..n {
            let v = (polar.phi[a] + polar.phi[b]).cos();
            pixels[a * n + b] = v;
            pixels[b * n + a] = v;
        }
    }
    GafImage { scale: n, pixels }
}

/// Full encoder for one raw sequence: rescale, PAA to `scale` groups, polar
/// coordinates, summation field.
pub fn encode_values(values: &[f64], scale: usize) -> Result<GafImage> {
    let normalized = rescale(values)?;
    let reduced = paa(&normalized, scale)?;
    Ok(gasf(&to_polar(&reduced)?))
}

pub fn encode(spec: &RamanSpectrum, scale: usize) -> Result<GafImage> {
    encode_values(&spec.values, scale)
}

/// Encodes one spectrum at several scales, sharing the rescale step.
pub fn encode_scales(spec: &RamanSpectrum, scales: &[usize]) -> Result<Vec<GafImage>> {
    let normalized = rescale(&spec.values)?;
    scales
        .iter()
        .map(|&s| Ok(gasf(&to_polar(&paa(&normalized, s)?)?)))
        .collect()
}

/// Encodes every spectrum of a dataset at the given scales.
/// `result[n][k]` is sample `n` at `scales[k]`.
pub fn encode_dataset(
    dataset: &Dataset,
    scales: &[usize],
    exec: Execution,
) -> Result<Vec<Vec<GafImage>>> {
    exec.try_map(dataset.samples(), |s| encode_scales(s, scales))
}
