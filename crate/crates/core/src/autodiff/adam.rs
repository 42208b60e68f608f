use super::graph::ParamStore;
use super::tensor::Real;
use crate::error::{Error, Result};

/// Adam hyperparameters plus per-parameter moment buffers.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            epsilon: 1e-8,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, param: usize) -> Option<&[f64]> {
        self.first.get(param).map(Vec::as_slice)
    }

    /// One bias-corrected Adam update over every parameter of `store`.
    /// Gradients are consumed (cleared) by the step.
    pub fn step<T: Real>(&mut self, store: &mut ParamStore<T>) -> Result<()> {
        if let Some(p) = store.iter().find(|p| p.tensor.grad.is_none()) {
            return Err(Error::MissingGrad(p.name.clone()));
        }
        if self.first.is_empty() {
            self.first = store.iter().map(|p| vec![0.0; p.tensor.numel()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != store.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters but store has {}",
                self.first.len(),
                store.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.tensor.grad.take().expect("checked above");
            for (((w, g), m), v) in p.tensor.data_mut().iter_mut().zip(&grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g.f64();
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let update = self.lr * (*m / c1) / ((*v / c2).sqrt() + self.epsilon);
                *w = T::of(w.f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{Graph, Tensor};

    fn scalar_store(w: f32) -> ParamStore<f32> {
        let mut s = ParamStore::new();
        s.add("w", Tensor::scalar(w)).unwrap();
        s
    }

    fn set_grad(s: &mut ParamStore<f32>, g: f32) {
        s.iter_mut().next().unwrap().tensor.grad = Some(vec![g]);
    }

    fn value(s: &ParamStore<f32>) -> f32 {
        s.iter().next().unwrap().tensor.item()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut s = scalar_store(1.0);
        let mut adam = AdamState::new(0.01, 0.9, 0.999);
        set_grad(&mut s, 3.7);
        adam.step(&mut s).unwrap();
        assert!((value(&s) - 0.99).abs() < 1e-6);
        assert!(s.iter().next().unwrap().tensor.grad.is_none());
    }

    #[test]
    fn zero_grad_leaves_param_and_decays_moments() {
        let mut s = scalar_store(2.0);
        let mut adam = AdamState::new(0.1, 0.9, 0.999);
        set_grad(&mut s, 0.0);
        adam.step(&mut s).unwrap();
        assert_eq!(value(&s), 2.0);

        let mut s = scalar_store(2.0);
        let mut adam = AdamState::new(0.1, 0.5, 0.999);
        set_grad(&mut s, 1.0);
        adam.step(&mut s).unwrap();
        let m1 = adam.first_moment(0).unwrap()[0];
        set_grad(&mut s, 0.0);
        adam.step(&mut s).unwrap();
        assert!((adam.first_moment(0).unwrap()[0] - 0.5 * m1).abs() < 1e-12);
        assert_eq!(adam.step_count(), 2);
    }

    #[test]
    fn missing_grad_rejected() {
        let mut s = scalar_store(0.0);
        let mut adam = AdamState::new(0.1, 0.9, 0.999);
        assert!(matches!(adam.step(&mut s), Err(Error::MissingGrad(name)) if name == "w"));
    }

    #[test]
    fn converges_on_quadratic() {
        let mut s = scalar_store(0.0);
        let id = s.find("w").unwrap();
        let mut adam = AdamState::new(0.1, 0.9, 0.999);
        for _ in 0..100 {
            let mut g = Graph::new();
            let w = s.leaf(&mut g, id);
            let target = g.input(Tensor::scalar(-3.0));
            let diff = g.add(w, target).unwrap();
            let sq = g.mul(diff, diff).unwrap();
            let loss = g.sum(sq);
            let grads = g.backward(loss).unwrap();
            s.absorb(&g, &grads);
            adam.step(&mut s).unwrap();
        }
        assert!((value(&s) - 3.0).abs() < 0.05, "w = {}", value(&s));
    }
}
