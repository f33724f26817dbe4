use crate::error::{M3sError, Result};

/// Maps a sequence linearly onto [-1, 1]: the minimum goes to -1 and the
/// maximum to +1.
///
/// Each element is `((x - max) + (x - min)) / (max - min)`; the endpoints are
/// hit exactly and the result is clamped so rounding never leaves the range.
pub fn rescale(seq: &[f64]) -> Result<Vec<f64>> {
    if seq.len() < 2 {
        return Err(M3sError::Empty("rescale needs at least two values"));
    }
    if let Some(index) = seq.iter().position(|v| !v.is_finite()) {
        return Err(M3sError::NonFinite { index });
    }
    let (min, max) = seq
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = max - min;
    if span <= 0.0 {
        return Err(M3sError::ConstantSequence { value: max });
    }
    Ok(seq
        .iter()
        .map(|&x| (((x - max) + (x - min)) / span).clamp(-1.0, 1.0))
        .collect())
}

/// Piecewise aggregate approximation: the mean of each of `groups`
/// contiguous blocks. Block `b` covers `[b*L/groups, (b+1)*L/groups)` with
/// floor division, so uneven lengths still partition the whole sequence.
pub fn paa(seq: &[f64], groups: usize) -> Result<Vec<f64>> {
    let len = seq.len();
    if groups < 1 || groups > len {
        return Err(M3sError::InvalidGroups { groups, len });
    }
    if groups == len {
        return Ok(seq.to_vec());
    }
    Ok((0..groups)
        .map(|b| {
            let lo = b * len / groups;
            let hi = (b + 1) * len / groups;
            let block = &seq[lo..hi];
            block.iter().sum::<f64>() / block.len() as f64
        })
        .collect())
}
