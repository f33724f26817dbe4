//! Central finite-difference gradient checking.

use serde::Serialize;

/// Denominator floor for the relative error, so that two gradients that are
/// both essentially zero do not produce a huge ratio.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// A named flat block of parameters (or inputs) to perturb.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBlock {
    pub name: String,
    pub values: Vec<f64>,
}

impl ParamBlock {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockError {
    pub name: String,
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub epsilon: f64,
    pub tolerance: f64,
    pub blocks: Vec<BlockError>,
}

impl GradCheckReport {
    pub fn worst_rel_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst_rel_error() < self.tolerance
    }
}

/// `|a - n| / max(|a|, |n|, RELATIVE_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR)
}

/// Compares `analytic[b][k]` with `(f(theta + h) - f(theta - h)) / 2h` for
/// every coordinate of every block.
///
/// `loss` must read the current block values; each coordinate is restored
/// after it is probed. `max_per_block` limits the probes to evenly spaced
/// coordinates for large blocks (`None` checks all of them).
pub fn finite_diff_check<F>(
    blocks: &mut [ParamBlock],
    analytic: &[Vec<f64>],
    mut loss: F,
    epsilon: f64,
    tolerance: f64,
    max_per_block: Option<usize>,
) -> GradCheckReport
where
    F: FnMut(&[ParamBlock]) -> f64,
{
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert_eq!(
        blocks.len(),
        analytic.len(),
        "one analytic gradient per block"
    );
    let mut report = Vec::with_capacity(blocks.len());
    for b in 0..blocks.len() {
        let n = blocks[b].values.len();
        assert_eq!(
            analytic[b].len(),
            n,
            "gradient size of block {}",
            blocks[b].name
        );
        let indices: Vec<usize> = match max_per_block {
            Some(limit) if limit < n => (0..limit).map(|j| j * n / limit).collect(),
            _ => (0..n).collect(),
        };
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        for &k in &indices {
            let orig = blocks[b].values[k];
            blocks[b].values[k] = orig + epsilon;
            let up = loss(blocks);
            blocks[b].values[k] = orig - epsilon;
            let down = loss(blocks);
            blocks[b].values[k] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let a = analytic[b][k];
            max_abs = max_abs.max((a - numeric).abs());
            max_rel = max_rel.max(relative_error(a, numeric));
        }
        report.push(BlockError {
            name: blocks[b].name.clone(),
            checked: indices.len(),
            max_abs_error: max_abs,
            max_rel_error: max_rel,
        });
    }
    GradCheckReport {
        epsilon,
        tolerance,
        blocks: report,
    }
}
