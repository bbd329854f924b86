use serde::{Deserialize, Serialize};

use super::{shape_err, Gradients, ParamStore, Real, TensorError};

/// Adam hyperparameters. The learning rate follows inverse-time decay,
/// `lr_t = lr0 / (1 + decay · t)` with `t` the number of steps already taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr0: f64,
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr0: 1e-4, decay: 1e-6, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig, params: &ParamStore<T>) -> Self {
        let zeros = || params.entries().iter().map(|e| vec![T::zero(); e.value.numel()]).collect();
        Self { config, step: 0, m: zeros(), v: zeros() }
    }

    /// Rebuilds a saved optimizer state.
    pub fn from_parts(config: AdamConfig, step: u64, m: Vec<Vec<T>>, v: Vec<Vec<T>>) -> Self {
        Self { config, step, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Vec<T>], &[Vec<T>]) {
        (&self.m, &self.v)
    }

    /// Learning rate the next step will use.
    pub fn current_lr(&self) -> f64 {
        self.config.lr0 / (1.0 + self.config.decay * self.step as f64)
    }

    /// One bias-corrected update of every parameter.
    pub fn step(&mut self, params: &mut ParamStore<T>, grads: &Gradients<T>) -> Result<(), TensorError> {
        if grads.len() != params.len() || self.m.len() != params.len() {
            return Err(shape_err("adam", format!("{} parameter tensors", params.len()), (grads.len(), self.m.len())));
        }
        for (i, e) in params.entries().iter().enumerate() {
            let n = e.value.numel();
            if grads.by_index(i).len() != n || self.m[i].len() != n {
                return Err(shape_err("adam", format!("{} values for {}", n, e.name), grads.by_index(i).len()));
            }
        }
        let lr = self.current_lr();
        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let (one_b1, one_b2) = (T::lit(1.0 - c.beta1), T::lit(1.0 - c.beta2));
        let (inv_bias1, inv_bias2) = (T::lit(1.0 / bias1), T::lit(1.0 / bias2));
        let (lr, eps) = (T::lit(lr), T::lit(c.eps));
        for (i, e) in params.entries_mut().iter_mut().enumerate() {
            let g = grads.by_index(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for (((p, &gv), mv), vv) in e.value.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mv = b1 * *mv + one_b1 * gv;
                *vv = b2 * *vv + one_b2 * gv * gv;
                let m_hat = *mv * inv_bias1;
                let v_hat = *vv * inv_bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar_problem(p: f64, g: f64) -> (ParamStore<f64>, Gradients<f64>) {
        let mut store = ParamStore::new();
        store.add("p", Tensor::from_vec(vec![p]));
        let mut grads = Gradients::zeros_like(&store);
        grads.slot_mut(0)[0] = g;
        (store, grads)
    }

    #[test]
    fn first_step_moves_by_lr() {
        let (mut store, grads) = scalar_problem(0.5, 1.0);
        let mut adam = Adam::new(AdamConfig::default(), &store);
        adam.step(&mut store, &grads).unwrap();
        // m̂ = 1, v̂ = 1, so Δ = lr0 / (1 + ε)
        let moved = 0.5 - store.entries()[0].value.data()[0];
        assert!((moved - 1e-4 / (1.0 + 1e-8)).abs() < 1e-15, "{moved}");
        assert_eq!(adam.step_count(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut store, grads) = scalar_problem(0.5, 0.0);
        let mut adam = Adam::new(AdamConfig::default(), &store);
        for _ in 0..5 {
            adam.step(&mut store, &grads).unwrap();
        }
        assert_eq!(store.entries()[0].value.data(), &[0.5]);
    }

    #[test]
    fn deterministic() {
        let (mut s1, g) = scalar_problem(0.5, 0.3);
        let mut s2 = s1.clone();
        let mut a1 = Adam::new(AdamConfig::default(), &s1);
        let mut a2 = a1.clone();
        a1.step(&mut s1, &g).unwrap();
        a2.step(&mut s2, &g).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(a1, a2);
    }

    #[test]
    fn inverse_time_decay() {
        let (store, _) = scalar_problem(0.0, 0.0);
        let cfg = AdamConfig { decay: 0.5, ..Default::default() };
        let mut adam = Adam::new(cfg, &store);
        assert_eq!(adam.current_lr(), 1e-4);
        adam.step = 2;
        assert!((adam.current_lr() - 1e-4 / 2.0).abs() < 1e-18);
    }

    #[test]
    fn shape_mismatch() {
        let (mut store, _) = scalar_problem(0.0, 0.0);
        let mut adam = Adam::new(AdamConfig::default(), &store);
        let mut other = ParamStore::new();
        other.add("q", Tensor::from_vec(vec![0.0, 1.0]));
        assert!(adam.step(&mut store, &Gradients::zeros_like(&other)).is_err());
    }
}
