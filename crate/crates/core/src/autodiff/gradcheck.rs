//! Central finite-difference check of every differentiable operator.
//!
//! Each case is evaluated in f64 with base step h = 1e-3. Central differences
//! at h and h/2 are combined by one Richardson step, (4·D(h/2) − D(h)) / 3,
//! which cancels the O(h²) truncation term. The per-component error is
//! |analytic − numeric| / max(|analytic|, |numeric|, 1e-3), so components with
//! magnitude below 1e-3 are compared on an absolute scale.

use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::rng::SplitMix64;

pub const STEP: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-4;

type Builder = Box<dyn Fn(&mut Graph<f64>, &[Var]) -> Result<Var>>;

/// One operator instance: input tensors plus a closure producing the loss.
pub struct Case {
    pub name: String,
    inputs: Vec<Tensor<f64>>,
    build: Builder,
}

#[derive(Clone, Debug)]
pub struct CaseReport {
    pub name: String,
    pub seed: u64,
    pub max_rel_err: f64,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

fn rand_tensor(rng: &mut SplitMix64, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.uniform(lo, hi))
}

/// Values bounded away from zero so kinks are never straddled by ±h.
fn away_from_zero(rng: &mut SplitMix64, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| {
        let m = rng.uniform(0.05, 1.0);
        if rng.next_f64() < 0.5 {
            -m
        } else {
            m
        }
    })
}

/// loss = Σ out ⊙ r for a fixed random weighting r.
fn weighted_sum(g: &mut Graph<f64>, out: Var, seed: u64) -> Result<Var> {
    let mut rng = SplitMix64::new(seed);
    let shape = g.value(out).shape().to_vec();
    let r = g.input(rand_tensor(&mut rng, &shape, -1.0, 1.0));
    let prod = g.mul(out, r)?;
    Ok(g.sum(prod))
}

/// Initialisation scale used by the networks for a k=4 layer.
fn init(c_in: usize) -> f64 {
    (1.0 / (16 * c_in) as f64).sqrt()
}

fn case(name: impl Into<String>, inputs: Vec<Tensor<f64>>, build: Builder) -> Case {
    Case {
        name: name.into(),
        inputs,
        build,
    }
}

/// All operator cases for one seed.
pub fn cases(seed: u64) -> Vec<Case> {
    let mut rng = SplitMix64::derive(seed, 0x6772_6164);
    let wseed = rng.next_u64();
    let mut out = Vec::new();

    {
        let k = 1 + rng.below(4);
        let stride = 1 + rng.below(2);
        let pad = rng.below(k);
        let (n, ci, co) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
        let (h, w) = (k + rng.below(4), k + rng.below(4));
        out.push(case(
            format!("conv2d k{k} s{stride} p{pad}"),
            vec![
                rand_tensor(&mut rng, &[n, ci, h, w], -1.0, 1.0),
                rand_tensor(&mut rng, &[co, ci, k, k], -1.0, 1.0),
                rand_tensor(&mut rng, &[co], -0.5, 0.5),
            ],
            Box::new(move |g, v| {
                let y = g.conv2d(v[0], v[1], v[2], stride, pad)?;
                weighted_sum(g, y, wseed)
            }),
        ));
    }
    {
        let k = 2 + rng.below(3);
        let stride = 1 + rng.below(2);
        let pad = rng.below(k / 2 + 1);
        let (n, ci, co) = (1 + rng.below(2), 1 + rng.below(3), 1 + rng.below(3));
        let (h, w) = (2 + rng.below(3), 2 + rng.below(3));
        out.push(case(
            format!("deconv2d k{k} s{stride} p{pad}"),
            vec![
                rand_tensor(&mut rng, &[n, ci, h, w], -1.0, 1.0),
                rand_tensor(&mut rng, &[ci, co, k, k], -1.0, 1.0),
                rand_tensor(&mut rng, &[co], -0.5, 0.5),
            ],
            Box::new(move |g, v| {
                let y = g.deconv2d(v[0], v[1], v[2], stride, pad)?;
                weighted_sum(g, y, wseed)
            }),
        ));
    }
    let small = [1 + rng.below(2), 1 + rng.below(3), 2 + rng.below(3), 2 + rng.below(3)];
    let slope = rng.uniform(0.0, 0.3);
    out.push(case(
        "leaky_relu",
        vec![away_from_zero(&mut rng, &small)],
        Box::new(move |g, v| {
            let y = g.leaky_relu(v[0], slope);
            weighted_sum(g, y, wseed)
        }),
    ));
    out.push(case(
        "sigmoid",
        vec![rand_tensor(&mut rng, &small, -4.0, 4.0)],
        Box::new(move |g, v| {
            let y = g.sigmoid(v[0]);
            weighted_sum(g, y, wseed)
        }),
    ));
    out.push(case(
        "tanh",
        vec![rand_tensor(&mut rng, &small, -2.0, 2.0)],
        Box::new(move |g, v| {
            let y = g.tanh(v[0]);
            weighted_sum(g, y, wseed)
        }),
    ));
    let mut other = small;
    other[1] = 1 + rng.below(3);
    out.push(case(
        "concat_channels",
        vec![rand_tensor(&mut rng, &small, -1.0, 1.0), rand_tensor(&mut rng, &other, -1.0, 1.0)],
        Box::new(move |g, v| {
            let y = g.concat_channels(v[0], v[1])?;
            weighted_sum(g, y, wseed)
        }),
    ));
    out.push(case(
        "instance_norm",
        vec![rand_tensor(&mut rng, &small, -2.0, 2.0)],
        Box::new(move |g, v| {
            let y = g.instance_norm(v[0])?;
            weighted_sum(g, y, wseed)
        }),
    ));
    let a = rand_tensor(&mut rng, &small, -1.0, 1.0);
    let gap = away_from_zero(&mut rng, &small);
    let b = Tensor::from_fn(&small, |i| a.data()[i] + gap.data()[i]);
    out.push(case(
        "l1_loss",
        vec![a, b],
        Box::new(|g, v| g.l1_loss(v[0], v[1])),
    ));
    out.push(case(
        "bce_loss",
        vec![rand_tensor(&mut rng, &small, 0.2, 0.8), rand_tensor(&mut rng, &small, 0.1, 0.9)],
        Box::new(|g, v| g.bce_loss(v[0], v[1])),
    ));
    out.push(case(
        "bce_with_logits",
        vec![rand_tensor(&mut rng, &small, -4.0, 4.0), rand_tensor(&mut rng, &small, 0.1, 0.9)],
        Box::new(|g, v| g.bce_with_logits(v[0], v[1])),
    ));
    let c = rng.uniform(-2.0, 2.0);
    out.push(case(
        "add/mul/scale/mean",
        vec![rand_tensor(&mut rng, &small, -1.0, 1.0), rand_tensor(&mut rng, &small, -1.0, 1.0)],
        Box::new(move |g, v| {
            let s = g.add(v[0], v[1])?;
            let p = g.mul(s, v[0])?;
            let q = g.scale(p, c);
            Ok(g.mean(q))
        }),
    ));
    // Encoder/decoder block with a skip connection, as used by the generator.
    let ci = 1 + rng.below(2);
    out.push(case(
        "encoder-decoder block",
        vec![
            rand_tensor(&mut rng, &[1, ci, 8, 8], -1.0, 1.0),
            rand_tensor(&mut rng, &[3, ci, 4, 4], -init(ci), init(ci)),
            rand_tensor(&mut rng, &[3], -0.1, 0.1),
            rand_tensor(&mut rng, &[3, 2, 4, 4], -init(3), init(3)),
            rand_tensor(&mut rng, &[2], -0.1, 0.1),
        ],
        Box::new(move |g, v| {
            let e = g.conv2d(v[0], v[1], v[2], 2, 1)?;
            let e = g.instance_norm(e)?;
            // smooth activation: a kink after normalisation would be straddled by ±h
            let e = g.sigmoid(e);
            let d = g.deconv2d(e, v[3], v[4], 2, 1)?;
            let d = g.concat_channels(d, v[0])?;
            let y = g.tanh(d);
            weighted_sum(g, y, wseed)
        }),
    ));
    out
}

fn eval_loss(c: &Case, inputs: &[Tensor<f64>]) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let loss = (c.build)(&mut g, &vars)?;
    Ok(g.value(loss).item())
}

/// Largest per-component relative error over every input of `c`.
pub fn check(c: &Case) -> Result<f64> {
    let mut g = Graph::new();
    let vars: Vec<Var> = c.inputs.iter().map(|t| g.variable(t.clone())).collect();
    let loss = (c.build)(&mut g, &vars)?;
    let grads = g.backward(loss)?;
    let mut worst: f64 = 0.0;
    let mut probe = c.inputs.clone();
    for (i, var) in vars.iter().enumerate() {
        let analytic = grads.of(*var).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; c.inputs[i].numel()]);
        for (j, &a) in analytic.iter().enumerate() {
            let orig = c.inputs[i].data()[j];
            let mut central = |h: f64| -> Result<f64> {
                probe[i].data_mut()[j] = orig + h;
                let plus = eval_loss(c, &probe)?;
                probe[i].data_mut()[j] = orig - h;
                let minus = eval_loss(c, &probe)?;
                probe[i].data_mut()[j] = orig;
                Ok((plus - minus) / (2.0 * h))
            };
            let coarse = central(STEP)?;
            let fine = central(STEP / 2.0)?;
            let numeric = (4.0 * fine - coarse) / 3.0;
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

/// Runs every case for `seeds` consecutive seeds starting at `first_seed`.
pub fn run_suite(first_seed: u64, seeds: u64) -> Result<Vec<CaseReport>> {
    let mut reports = Vec::new();
    for seed in first_seed..first_seed + seeds {
        for c in cases(seed) {
            let max_rel_err = check(&c)?;
            reports.push(CaseReport {
                name: c.name,
                seed,
                max_rel_err,
            });
        }
    }
    Ok(reports)
}
