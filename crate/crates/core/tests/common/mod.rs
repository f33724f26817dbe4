//! Independent reference implementations shared by the integration tests.
//! Everything here is written with plain loops and no reuse of library
//! internals beyond the public types.

#![allow(dead_code, clippy::needless_range_loop)]

use m3s_core::model::{build_probability_matrix, FusionPolicy, M3sModel, TrainConfig, WeightMode};
use m3s_core::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, finite_diff_check,
    maxpool2d_backward, maxpool2d_forward, softmax_cross_entropy, GradCheckReport, ParamBlock,
    Tensor,
};
use m3s_core::spectra::{
    Dataset, DatasetMeta, HistoryVector, RamanSpectrum, SubtypeLabel, SynthConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// `cos(a + b) = x_a x_b - sqrt(1 - x_a^2) sqrt(1 - x_b^2)` for `x = cos(phi)`.
pub fn gasf_product_form(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            let sa = (1.0 - x[a] * x[a]).max(0.0).sqrt();
            let sb = (1.0 - x[b] * x[b]).max(0.0).sqrt();
            out[a * n + b] = x[a] * x[b] - sa * sb;
        }
    }
    out
}

/// Direct-loop 2-D convolution over `[C, H, W]` with zero padding.
#[allow(clippy::too_many_arguments)]
pub fn naive_conv(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    weights: &[f64],
    out_c: usize,
    f: usize,
    bias: &[f64],
    stride: usize,
    pad: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h + 2 * pad - f) / stride + 1;
    let ow = (w + 2 * pad - f) / stride + 1;
    let mut out = vec![0.0; out_c * oh * ow];
    for o in 0..out_c {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = bias[o];
                for ci in 0..c {
                    for dy in 0..f {
                        for dx in 0..f {
                            let iy = (y * stride + dy) as isize - pad as isize;
                            let ix = (x * stride + dx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let v = input[ci * h * w + iy as usize * w + ix as usize];
                            acc += v * weights[((o * c + ci) * f + dy) * f + dx];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = acc;
            }
        }
    }
    (out, oh, ow)
}

/// Direct-loop max pooling over `[C, H, W]`.
pub fn naive_maxpool(
    input: &[f64],
    (c, h, w): (usize, usize, usize),
    k: usize,
    s: usize,
) -> (Vec<f64>, usize, usize) {
    let oh = (h - k) / s + 1;
    let ow = (w - k) / s + 1;
    let mut out = Vec::with_capacity(c * oh * ow);
    for ci in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..k {
                    for dx in 0..k {
                        m = m.max(input[ci * h * w + (y * s + dy) * w + x * s + dx]);
                    }
                }
                out.push(m);
            }
        }
    }
    (out, oh, ow)
}

/// `P(class | flag)` from the generator's class sizes and flag probabilities.
pub fn bayes_oracle(config: &SynthConfig) -> [[f64; 4]; 5] {
    let mut out = [[0.0; 4]; 5];
    for h in 0..5 {
        let joint: Vec<(usize, f64)> = config
            .classes
            .iter()
            .map(|c| (c.label.index(), c.count as f64 * c.history_probs[h]))
            .collect();
        let z: f64 = joint.iter().map(|(_, p)| p).sum();
        for (c, p) in joint {
            out[h][c] = if z > 0.0 { p / z } else { 0.25 };
        }
    }
    out
}

/// Per-class `[precision, recall, specificity, f1]` by walking the sample
/// list once per class and tallying each outcome.
pub struct BruteMetrics {
    pub accuracy: f64,
    pub per_class: [[f64; 4]; 4],
    pub macro_avg: [f64; 4],
    pub weighted_avg: [f64; 4],
}

pub fn brute_force_metrics(preds: &[SubtypeLabel], truths: &[SubtypeLabel]) -> BruteMetrics {
    let n = preds.len() as f64;
    let safe = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut per_class = [[0.0; 4]; 4];
    let mut weighted = [0.0; 4];
    for c in SubtypeLabel::ALL {
        let (mut tp, mut fp, mut fneg, mut tn) = (0.0, 0.0, 0.0, 0.0);
        for (p, t) in preds.iter().zip(truths) {
            match (*p == c, *t == c) {
                (true, true) => tp += 1.0,
                (true, false) => fp += 1.0,
                (false, true) => fneg += 1.0,
                (false, false) => tn += 1.0,
            }
        }
        let p = safe(tp, tp + fp);
        let r = safe(tp, tp + fneg);
        let s = safe(tn, tn + fp);
        let f1 = safe(2.0 * p * r, p + r);
        per_class[c.index()] = [p, r, s, f1];
        for k in 0..4 {
            weighted[k] += per_class[c.index()][k] * (tp + fneg) / n;
        }
    }
    let mut macro_avg = [0.0; 4];
    for k in 0..4 {
        macro_avg[k] = per_class.iter().map(|m| m[k]).sum::<f64>() / 4.0;
    }
    let correct = preds.iter().zip(truths).filter(|(p, t)| p == t).count() as f64;
    BruteMetrics {
        accuracy: correct / n,
        per_class,
        macro_avg,
        weighted_avg: weighted,
    }
}

// ---- finite-difference drivers -------------------------------------------

pub const LAYER_TOLERANCE: f64 = 1e-4;
pub const GRAPH_TOLERANCE: f64 = 1e-3;
const EPS: f64 = 1e-5;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tensor(shape: &[usize], data: &[f64]) -> Tensor {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

/// Dense layer under the loss `sum(R ⊙ y)`.
pub fn check_dense(seed: u64) -> GradCheckReport {
    let mut r = rng(seed);
    let (n, m) = (7, 5);
    let x = uniform_vec(&mut r, n, -1.0, 1.0);
    let w = uniform_vec(&mut r, m * n, -1.0, 1.0);
    let b = uniform_vec(&mut r, m, -1.0, 1.0);
    let upstream = uniform_vec(&mut r, m, -1.0, 1.0);
    let g = dense_backward(
        &tensor(&[n], &x),
        &tensor(&[m, n], &w),
        &tensor(&[m], &upstream),
    )
    .unwrap();
    let analytic = vec![
        g.input.data().to_vec(),
        g.weights.data().to_vec(),
        g.bias.data().to_vec(),
    ];
    let mut blocks = vec![
        ParamBlock::new("input", x),
        ParamBlock::new("weight", w),
        ParamBlock::new("bias", b),
    ];
    finite_diff_check(
        &mut blocks,
        &analytic,
        |p| {
            let y = dense_forward(
                &tensor(&[n], &p[0].values),
                &tensor(&[m, n], &p[1].values),
                &tensor(&[m], &p[2].values),
            )
            .unwrap();
            dot(y.data(), &upstream)
        },
        EPS,
        LAYER_TOLERANCE,
        None,
    )
}

/// Strided, padded convolution under the loss `sum(R ⊙ y)`.
pub fn check_conv(seed: u64) -> GradCheckReport {
    let mut r = rng(seed);
    let (c, h, w, co, f) = (2, 6, 5, 3, 3);
    let stride = 1 + (seed % 2) as usize;
    let pad = 1;
    let x = uniform_vec(&mut r, c * h * w, -1.0, 1.0);
    let k = uniform_vec(&mut r, co * c * f * f, -1.0, 1.0);
    let b = uniform_vec(&mut r, co, -1.0, 1.0);
    let (_, cache) = conv2d_forward(
        &tensor(&[c, h, w], &x),
        &tensor(&[co, c, f, f], &k),
        &tensor(&[co], &b),
        stride,
        pad,
    )
    .unwrap();
    let out_shape = cache_out_shape(c, h, w, co, f, stride, pad);
    let upstream = uniform_vec(&mut r, out_shape.iter().product(), -1.0, 1.0);
    let g = conv2d_backward(
        &cache,
        &tensor(&[co, c, f, f], &k),
        &tensor(&out_shape, &upstream),
        true,
    )
    .unwrap();
    let analytic = vec![
        g.input.unwrap().data().to_vec(),
        g.weights.data().to_vec(),
        g.bias.data().to_vec(),
    ];
    let mut blocks = vec![
        ParamBlock::new("input", x),
        ParamBlock::new("weight", k),
        ParamBlock::new("bias", b),
    ];
    finite_diff_check(
        &mut blocks,
        &analytic,
        |p| {
            let (y, _) = conv2d_forward(
                &tensor(&[c, h, w], &p[0].values),
                &tensor(&[co, c, f, f], &p[1].values),
                &tensor(&[co], &p[2].values),
                stride,
                pad,
            )
            .unwrap();
            dot(y.data(), &upstream)
        },
        EPS,
        LAYER_TOLERANCE,
        None,
    )
}

fn cache_out_shape(
    _c: usize,
    h: usize,
    w: usize,
    co: usize,
    f: usize,
    s: usize,
    p: usize,
) -> Vec<usize> {
    vec![co, (h + 2 * p - f) / s + 1, (w + 2 * p - f) / s + 1]
}

/// Max pooling routing under the loss `sum(R ⊙ y)`. Inputs are a shuffled
/// grid of well separated values so no probe can flip a window's maximum.
pub fn check_maxpool(seed: u64) -> GradCheckReport {
    use rand::seq::SliceRandom;
    let mut r = rng(seed);
    let (c, h, w) = (2, 6, 6);
    let mut x: Vec<f64> = (0..c * h * w).map(|i| i as f64 * 0.01).collect();
    x.shuffle(&mut r);
    let (y, cache) = maxpool2d_forward(&tensor(&[c, h, w], &x), 2, 2).unwrap();
    let upstream = uniform_vec(&mut r, y.len(), -1.0, 1.0);
    let g = maxpool2d_backward(&cache, &tensor(y.shape(), &upstream)).unwrap();
    let analytic = vec![g.data().to_vec()];
    let mut blocks = vec![ParamBlock::new("input", x)];
    finite_diff_check(
        &mut blocks,
        &analytic,
        |p| {
            let (y, _) = maxpool2d_forward(&tensor(&[c, h, w], &p[0].values), 2, 2).unwrap();
            dot(y.data(), &upstream)
        },
        EPS,
        LAYER_TOLERANCE,
        None,
    )
}

/// Softmax cross-entropy with respect to the logits.
pub fn check_softmax_ce(seed: u64) -> GradCheckReport {
    let mut r = rng(seed);
    let k = 4;
    let z = uniform_vec(&mut r, k, -3.0, 3.0);
    let target = r.gen_range(0..k);
    let (_, grad) = softmax_cross_entropy(&z, target).unwrap();
    let mut blocks = vec![ParamBlock::new("logits", z)];
    finite_diff_check(
        &mut blocks,
        &[grad],
        |p| softmax_cross_entropy(&p[0].values, target).unwrap().0,
        EPS,
        LAYER_TOLERANCE,
        None,
    )
}

/// A small but complete two-branch model with a random weight matrix and
/// random history, checked through every parameter block.
pub fn check_full_graph(seed: u64, policy: FusionPolicy) -> GradCheckReport {
    let mut r = rng(seed);
    let config = TrainConfig {
        scales: vec![8, 16],
        channels: [2, 3, 2],
        seed,
        fusion: policy,
        weights: WeightMode::Adaptive,
        ..TrainConfig::default()
    };
    let samples: Vec<RamanSpectrum> = (0..12)
        .map(|i| {
            let flags: [u8; 5] = std::array::from_fn(|_| r.gen_range(0..2));
            RamanSpectrum::new(
                format!("s{i}"),
                uniform_vec(&mut r, 32, 0.0, 1.0),
                Some(SubtypeLabel::ALL[i % 4]),
                HistoryVector::from(flags),
            )
            .unwrap()
        })
        .collect();
    let data = Dataset::new(samples, DatasetMeta::default()).unwrap();
    let mut model = M3sModel::init(&config, build_probability_matrix(&data).unwrap()).unwrap();
    for row in model.weight_matrix.rows.iter_mut() {
        for w in row.iter_mut() {
            *w = r.gen_range(0.5..1.5);
        }
    }
    // Zero biases put some pre-activations exactly on the ReLU kink, where the
    // function has no derivative; move to a generic point first.
    let mut start = model.param_blocks();
    for b in start.iter_mut().filter(|b| b.name.ends_with("bias")) {
        for v in b.values.iter_mut() {
            *v = r.gen_range(-0.1..0.1);
        }
    }
    model.set_param_blocks(&start).unwrap();
    let sample = &data.samples()[(seed % 12) as usize];
    let images = model.encode(sample).unwrap();
    let target = sample.label.unwrap();
    let (_, _, grads) = model
        .sample_gradients(&images, &sample.history, target)
        .unwrap();
    let analytic = grads.blocks();
    let mut blocks = model.param_blocks();
    let mut probe = model.clone();
    finite_diff_check(
        &mut blocks,
        &analytic,
        |p| {
            probe.set_param_blocks(p).unwrap();
            probe
                .sample_gradients(&images, &sample.history, target)
                .unwrap()
                .0
        },
        EPS,
        GRAPH_TOLERANCE,
        None,
    )
}
