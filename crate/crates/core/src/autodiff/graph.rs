//! Dynamic tape: every operator appends a node holding its output value and
//! whatever it needs for the reverse sweep. The tape is rebuilt on each
//! forward pass and discarded after `backward`.

use std::sync::atomic::{AtomicU64, Ordering};

use super::conv::{self, ConvShape, Needs};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// A named trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Parameter<T: Real = f32> {
    pub name: String,
    pub tensor: Tensor<T>,
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

/// Ordered collection of uniquely named parameters (one per network).
#[derive(Debug)]
pub struct ParamStore<T: Real = f32> {
    id: u64,
    params: Vec<Parameter<T>>,
}

impl<T: Real> Clone for ParamStore<T> {
    fn clone(&self) -> Self {
        Self {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            params: self.params.clone(),
        }
    }
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Index of a parameter inside its store.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParamId(usize);

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed),
            params: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::DuplicateParam(name));
        }
        self.params.push(Parameter { name, tensor });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn get(&self, id: ParamId) -> &Parameter<T> {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter<T> {
        &mut self.params[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.tensor.grad = None;
        }
    }

    /// Places parameter `id` on the tape as a differentiable leaf.
    pub fn leaf(&self, g: &mut Graph<T>, id: ParamId) -> Var {
        let mut value = self.params[id.0].tensor.clone();
        value.grad = None;
        g.push(value, Op::Leaf, true, Some((self.id, id.0)))
    }

    /// Adds the gradients of every parameter of this store that was placed
    /// on `g` into the parameter's `grad` buffer.
    pub fn absorb(&mut self, g: &Graph<T>, grads: &Grads<T>) {
        for (node_idx, node) in g.nodes.iter().enumerate() {
            let Some((store, idx)) = node.binding else { continue };
            if store != self.id {
                continue;
            }
            let Some(gv) = &grads.by_node[node_idx] else { continue };
            let p = &mut self.params[idx].tensor;
            match &mut p.grad {
                Some(acc) => acc.iter_mut().zip(gv).for_each(|(a, &b)| *a = *a + b),
                None => p.grad = Some(gv.clone()),
            }
        }
    }
}

#[derive(Debug)]
enum Op<T: Real> {
    Leaf,
    Conv { x: Var, w: Var, b: Var, shape: ConvShape, cols: Vec<T> },
    Deconv { x: Var, w: Var, b: Var, shape: ConvShape },
    LeakyRelu { x: Var, slope: T },
    Sigmoid(Var),
    Tanh(Var),
    Concat { a: Var, b: Var },
    InstanceNorm { x: Var, inv_std: Vec<T> },
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Mean(Var),
    L1(Var, Var),
    Bce(Var, Var),
    BceLogits(Var, Var),
}

#[derive(Debug)]
struct Node<T: Real> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
    binding: Option<(u64, usize)>,
}

/// Reverse-mode tape.
#[derive(Debug, Default)]
pub struct Graph<T: Real = f32> {
    nodes: Vec<Node<T>>,
}

/// Per-node gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Grads<T: Real> {
    by_node: Vec<Option<Vec<T>>>,
}

impl<T: Real> Grads<T> {
    pub fn of(&self, v: Var) -> Option<&[T]> {
        self.by_node[v.0].as_deref()
    }

    pub fn all_finite(&self) -> bool {
        self.by_node.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()))
    }
}

const INSTANCE_NORM_EPS: f64 = 1e-5;

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool, binding: Option<(u64, usize)>) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            binding,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input (no gradient is propagated past it).
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false, None)
    }

    /// Leaf whose gradient is tracked (used for input-gradient checks).
    pub fn variable(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true, None)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn conv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let shape = ConvShape::for_conv(self.value(x).shape(), self.value(w).shape(), self.value(b).shape(), stride, pad)?;
        let (out, cols) = conv::conv_forward(&shape, self.value(x).data(), self.value(w).data(), self.value(b).data());
        let value = Tensor::new(vec![shape.n, shape.c_out, shape.ho, shape.wo], out)?;
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(value, Op::Conv { x, w, b, shape, cols }, rg, None))
    }

    /// Transposed convolution; `w` is C_in×C_out×k×k.
    pub fn deconv2d(&mut self, x: Var, w: Var, b: Var, stride: usize, pad: usize) -> Result<Var> {
        let shape = ConvShape::for_deconv(self.value(x).shape(), self.value(w).shape(), self.value(b).shape(), stride, pad)?;
        let out = conv::deconv_forward(&shape, self.value(x).data(), self.value(w).data(), self.value(b).data());
        let value = Tensor::new(vec![shape.n, shape.c_out, shape.ho, shape.wo], out)?;
        let rg = self.needs(&[x, w, b]);
        Ok(self.push(value, Op::Deconv { x, w, b, shape }, rg, None))
    }

    fn map(&mut self, x: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let src = self.value(x);
        let value = Tensor::new(src.shape().to_vec(), src.data().iter().map(|&v| f(v)).collect())
            .expect("elementwise map preserves shape");
        let rg = self.needs(&[x]);
        self.push(value, op, rg, None)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let s = T::of(slope);
        self.map(x, |v| if v > T::zero() { v } else { v * s }, Op::LeakyRelu { x, slope: s })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.leaky_relu(x, 0.0)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.map(x, |v| v.tanh(), Op::Tanh(x))
    }

    /// Concatenates two N×C×H×W tensors along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (na, ca, ha, wa) = self.value(a).dims4("concat_channels")?;
        let (nb, cb, hb, wb) = self.value(b).dims4("concat_channels")?;
        if (na, ha, wa) != (nb, hb, wb) {
            return Err(Error::shape(
                "concat_channels",
                format!("N,H,W differ: {na}×{ha}×{wa} vs {nb}×{hb}×{wb}"),
            ));
        }
        let plane = ha * wa;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(na * (ca + cb) * plane);
        for i in 0..na {
            data.extend_from_slice(&da[i * ca * plane..(i + 1) * ca * plane]);
            data.extend_from_slice(&db[i * cb * plane..(i + 1) * cb * plane]);
        }
        let value = Tensor::new(vec![na, ca + cb, ha, wa], data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Concat { a, b }, rg, None))
    }

    /// Per-sample, per-channel normalisation over H×W (no affine terms).
    pub fn instance_norm(&mut self, x: Var) -> Result<Var> {
        let (n, c, h, w) = self.value(x).dims4("instance_norm")?;
        let plane = h * w;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); src.len()];
        let mut inv_std = Vec::with_capacity(n * c);
        for (k, chunk) in src.chunks(plane).enumerate() {
            let mean = chunk.iter().map(|v| v.f64()).sum::<f64>() / plane as f64;
            let var = chunk.iter().map(|v| (v.f64() - mean).powi(2)).sum::<f64>() / plane as f64;
            let is = 1.0 / (var + INSTANCE_NORM_EPS).sqrt();
            inv_std.push(T::of(is));
            for (o, v) in out[k * plane..(k + 1) * plane].iter_mut().zip(chunk) {
                *o = T::of((v.f64() - mean) * is);
            }
        }
        let value = Tensor::new(vec![n, c, h, w], out)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, Op::InstanceNorm { x, inv_std }, rg, None))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg, None))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::new(self.value(a).shape().to_vec(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg, None))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let k = T::of(c);
        self.map(x, |v| v * k, Op::Scale(x, k))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = conv::sum64(self.value(x).data());
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), Op::Sum(x), rg, None)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let m = T::of(t.mean());
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(m), Op::Mean(x), rg, None)
    }

    /// Mean absolute difference.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("l1_loss", a, b)?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let total: f64 = da.iter().zip(db).map(|(x, y)| (x.f64() - y.f64()).abs()).sum();
        let value = Tensor::scalar(T::of(total / da.len() as f64));
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, Op::L1(a, b), rg, None))
    }

    /// Mean binary cross-entropy of probabilities `pred` ∈ (0,1) against
    /// targets in [0,1].
    pub fn bce_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        self.same_shape("bce_loss", pred, target)?;
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        if let Some(bad) = p.iter().find(|v| !(v.f64() > 0.0 && v.f64() < 1.0)) {
            return Err(Error::Range {
                op: "bce_loss",
                detail: format!("prediction {} outside the open interval (0, 1)", bad.f64()),
            });
        }
        if let Some(bad) = t.iter().find(|v| !(0.0..=1.0).contains(&v.f64())) {
            return Err(Error::Range {
                op: "bce_loss",
                detail: format!("target {} outside [0, 1]", bad.f64()),
            });
        }
        let total: f64 = p
            .iter()
            .zip(t)
            .map(|(p, t)| {
                let (p, t) = (p.f64(), t.f64());
                -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
            })
            .sum();
        let value = Tensor::scalar(T::of(total / p.len() as f64));
        let rg = self.needs(&[pred, target]);
        Ok(self.push(value, Op::Bce(pred, target), rg, None))
    }

    /// Numerically stable BCE applied to logits (sigmoid folded in).
    pub fn bce_with_logits(&mut self, logits: Var, target: Var) -> Result<Var> {
        self.same_shape("bce_with_logits", logits, target)?;
        let (z, t) = (self.value(logits).data(), self.value(target).data());
        let total: f64 = z
            .iter()
            .zip(t)
            .map(|(z, t)| {
                let (z, t) = (z.f64(), t.f64());
                z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
            })
            .sum();
        let value = Tensor::scalar(T::of(total / z.len() as f64));
        let rg = self.needs(&[logits, target]);
        Ok(self.push(value, Op::BceLogits(logits, target), rg, None))
    }

    /// Reverse sweep from a scalar `loss`. Gradients of parameter leaves are
    /// then moved into their stores with [`ParamStore::absorb`].
    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        let lv = self.value(loss);
        if !lv.is_scalar() {
            return Err(Error::NotScalar(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(dy) = grads[idx].take() else { continue };
            self.propagate(idx, &dy, &mut grads);
            grads[idx] = Some(dy);
        }
        Ok(Grads { by_node: grads })
    }

    fn conv_needs(&self, x: Var, w: Var, b: Var) -> Needs {
        Needs {
            input: self.nodes[x.0].requires_grad,
            weight: self.nodes[w.0].requires_grad || self.nodes[b.0].requires_grad,
        }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a = *a + b),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, idx: usize, dy: &[T], grads: &mut [Option<Vec<T>>]) {
        let node = &self.nodes[idx];
        let y = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Conv { x, w, b, shape, cols } => {
                let needs = self.conv_needs(*x, *w, *b);
                let (dx, dw, db) = conv::conv_backward(shape, self.value(*w).data(), cols, dy, needs);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Op::Deconv { x, w, b, shape } => {
                let needs = self.conv_needs(*x, *w, *b);
                let (dx, dw, db) = conv::deconv_backward(shape, self.value(*x).data(), self.value(*w).data(), dy, needs);
                self.accumulate(grads, *x, dx);
                self.accumulate(grads, *w, dw);
                self.accumulate(grads, *b, db);
            }
            Op::LeakyRelu { x, slope } => {
                let xs = self.value(*x).data();
                let g = xs.iter().zip(dy).map(|(&v, &d)| if v > T::zero() { d } else { d * *slope }).collect();
                self.accumulate(grads, *x, g);
            }
            Op::Sigmoid(x) => {
                let g = y.iter().zip(dy).map(|(&s, &d)| d * s * (T::one() - s)).collect();
                self.accumulate(grads, *x, g);
            }
            Op::Tanh(x) => {
                let g = y.iter().zip(dy).map(|(&t, &d)| d * (T::one() - t * t)).collect();
                self.accumulate(grads, *x, g);
            }
            Op::Concat { a, b } => {
                let (n, ca, h, w) = self.value(*a).dims4("concat").expect("checked at forward");
                let cb = self.value(*b).shape()[1];
                let plane = h * w;
                let mut ga = Vec::with_capacity(n * ca * plane);
                let mut gb = Vec::with_capacity(n * cb * plane);
                for i in 0..n {
                    let base = i * (ca + cb) * plane;
                    ga.extend_from_slice(&dy[base..base + ca * plane]);
                    gb.extend_from_slice(&dy[base + ca * plane..base + (ca + cb) * plane]);
                }
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::InstanceNorm { x, inv_std } => {
                let plane = node.value.shape()[2] * node.value.shape()[3];
                let m = plane as f64;
                let mut g = vec![T::zero(); y.len()];
                for (k, is) in inv_std.iter().enumerate() {
                    let r = k * plane..(k + 1) * plane;
                    let (yk, dk) = (&y[r.clone()], &dy[r.clone()]);
                    let sum_d: f64 = dk.iter().map(|v| v.f64()).sum();
                    let sum_dy: f64 = dk.iter().zip(yk).map(|(d, v)| d.f64() * v.f64()).sum();
                    let scale = is.f64() / m;
                    for ((o, d), v) in g[r].iter_mut().zip(dk).zip(yk) {
                        *o = T::of(scale * (m * d.f64() - sum_d - v.f64() * sum_dy));
                    }
                }
                self.accumulate(grads, *x, g);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, dy.to_vec());
                self.accumulate(grads, *b, dy.to_vec());
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, dy.iter().zip(vb).map(|(&d, &v)| d * v).collect());
                self.accumulate(grads, *b, dy.iter().zip(va).map(|(&d, &v)| d * v).collect());
            }
            Op::Scale(x, k) => {
                self.accumulate(grads, *x, dy.iter().map(|&d| d * *k).collect());
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, vec![dy[0]; self.value(*x).numel()]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).numel();
                self.accumulate(grads, *x, vec![dy[0] / T::of(n as f64); n]);
            }
            Op::L1(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                let k = dy[0] / T::of(va.len() as f64);
                let ga: Vec<T> = va
                    .iter()
                    .zip(vb)
                    .map(|(&p, &q)| {
                        if p > q {
                            k
                        } else if p < q {
                            -k
                        } else {
                            T::zero()
                        }
                    })
                    .collect();
                let gb = ga.iter().map(|&v| -v).collect();
                self.accumulate(grads, *a, ga);
                self.accumulate(grads, *b, gb);
            }
            Op::Bce(p, t) => {
                let (vp, vt) = (self.value(*p).data(), self.value(*t).data());
                let k = dy[0].f64() / vp.len() as f64;
                let gp = vp
                    .iter()
                    .zip(vt)
                    .map(|(p, t)| {
                        let (p, t) = (p.f64(), t.f64());
                        T::of(k * (p - t) / (p * (1.0 - p)))
                    })
                    .collect();
                let gt = vp
                    .iter()
                    .map(|p| {
                        let p = p.f64();
                        T::of(k * ((1.0 - p).ln() - p.ln()))
                    })
                    .collect();
                self.accumulate(grads, *p, gp);
                self.accumulate(grads, *t, gt);
            }
            Op::BceLogits(z, t) => {
                let (vz, vt) = (self.value(*z).data(), self.value(*t).data());
                let k = dy[0] / T::of(vz.len() as f64);
                let gz = vz.iter().zip(vt).map(|(&z, &t)| k * (sigmoid(z) - t)).collect();
                let gt = vz.iter().map(|&z| -k * z).collect();
                self.accumulate(grads, *z, gz);
                self.accumulate(grads, *t, gt);
            }
        }
    }
}

pub(crate) fn sigmoid<T: Real>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn one_by_one_conv_scales() {
        let mut g = Graph::<f64>::new();
        let x = g.input(Tensor::filled(&[1, 1, 3, 3], 1.0));
        let w = g.input(t(&[1, 1, 1, 1], &[2.0]));
        let b = g.input(t(&[1], &[0.0]));
        let y = g.conv2d(x, w, b, 1, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 3, 3]);
        assert!(g.value(y).data().iter().all(|&v| v == 2.0));
    }

    #[test]
    fn identity_kernel_preserves_input() {
        let mut g = Graph::<f64>::new();
        let img = Tensor::from_fn(&[1, 1, 5, 4], |i| (i as f64 * 0.37).sin());
        let x = g.input(img.clone());
        let mut k = vec![0.0; 9];
        k[4] = 1.0;
        let w = g.input(t(&[1, 1, 3, 3], &k));
        let b = g.input(t(&[1], &[0.0]));
        let y = g.conv2d(x, w, b, 1, 1).unwrap();
        assert_eq!(g.value(y).data(), img.data());
    }

    #[test]
    fn conv_shape_errors_name_dims() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::zeros(&[1, 2, 4, 4]));
        let w = g.input(Tensor::zeros(&[3, 1, 3, 3]));
        let b = g.input(Tensor::zeros(&[3]));
        let err = g.conv2d(x, w, b, 1, 0).unwrap_err().to_string();
        assert!(err.contains("C_in=2") && err.contains("C_in=1"), "{err}");
        let x = g.input(Tensor::zeros(&[1, 1, 2, 2]));
        let w = g.input(Tensor::zeros(&[1, 1, 5, 5]));
        let b = g.input(Tensor::zeros(&[1]));
        let err = g.conv2d(x, w, b, 1, 0).unwrap_err().to_string();
        assert!(err.contains("2×2"), "{err}");
    }

    #[test]
    fn deconv_upsamples_and_broadcasts_bias() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::zeros(&[1, 1, 2, 2]));
        let w = g.input(Tensor::filled(&[1, 1, 2, 2], 0.3));
        let b = g.input(Tensor::filled(&[1], 0.25));
        let y = g.deconv2d(x, w, b, 2, 0).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 1, 4, 4]);
        assert!(g.value(y).data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn pointwise_closed_forms() {
        let mut g = Graph::<f64>::new();
        let x = g.input(t(&[1], &[-1.0]));
        let y = g.leaky_relu(x, 0.2);
        assert!((g.value(y).item() + 0.2).abs() < 1e-12);

        let a = g.input(t(&[2], &[0.3, -0.7]));
        let l = g.l1_loss(a, a).unwrap();
        assert_eq!(g.value(l).item(), 0.0);

        let p = g.input(t(&[1], &[0.5]));
        let one = g.input(t(&[1], &[1.0]));
        let bce = g.bce_loss(p, one).unwrap();
        assert!((g.value(bce).item() - std::f64::consts::LN_2).abs() < 1e-12);

        let z = g.input(t(&[1], &[0.0]));
        let s = g.sigmoid(z);
        assert_eq!(g.value(s).item(), 0.5);
    }

    #[test]
    fn bce_rejects_out_of_range() {
        let mut g = Graph::<f32>::new();
        let p = g.input(Tensor::new(vec![2], vec![0.5, 1.0]).unwrap());
        let tgt = g.input(Tensor::filled(&[2], 1.0));
        assert!(matches!(g.bce_loss(p, tgt), Err(Error::Range { .. })));
    }

    #[test]
    fn concat_requires_matching_spatial_dims() {
        let mut g = Graph::<f32>::new();
        let a = g.input(Tensor::zeros(&[1, 1, 4, 4]));
        let b = g.input(Tensor::zeros(&[1, 2, 4, 2]));
        assert!(g.concat_channels(a, b).is_err());
        let c = g.input(Tensor::filled(&[1, 2, 4, 4], 1.0));
        let y = g.concat_channels(a, c).unwrap();
        assert_eq!(g.value(y).shape(), &[1, 3, 4, 4]);
    }

    #[test]
    fn linear_gradient_is_input() {
        let mut store = ParamStore::<f64>::new();
        let wid = store.add("w", t(&[3], &[0.5, -1.0, 2.0])).unwrap();
        let mut g = Graph::new();
        let w = store.leaf(&mut g, wid);
        let x = g.input(t(&[3], &[1.5, 2.5, -3.5]));
        let wx = g.mul(w, x).unwrap();
        let loss = g.sum(wx);
        let grads = g.backward(loss).unwrap();
        store.absorb(&g, &grads);
        assert_eq!(store.get(wid).tensor.grad.as_deref(), Some(&[1.5, 2.5, -3.5][..]));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut g = Graph::<f32>::new();
        let x = g.variable(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(x), Err(Error::NotScalar(_))));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut store = ParamStore::<f32>::new();
        store.add("a", Tensor::zeros(&[1])).unwrap();
        assert!(matches!(store.add("a", Tensor::zeros(&[1])), Err(Error::DuplicateParam(_))));
    }

    #[test]
    fn shared_subexpression_accumulates() {
        // loss = sum(x·x) → grad 2x
        let mut g = Graph::<f64>::new();
        let x = g.variable(t(&[2], &[3.0, -4.0]));
        let xx = g.mul(x, x).unwrap();
        let loss = g.sum(xx);
        let grads = g.backward(loss).unwrap();
        assert_eq!(grads.of(x).unwrap(), &[6.0, -8.0]);
    }
}
