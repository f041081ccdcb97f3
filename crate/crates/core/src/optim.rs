//! Adam with bias correction over every trainable buffer of a [`ModelState`].

use crate::error::{Error, Result};
use crate::model::{Gradients, ModelState};

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    /// First moments, one buffer per parameter tensor.
    pub m: Vec<Vec<f64>>,
    /// Second moments.
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(state: &ModelState, lr: f64) -> Self {
        let shapes: Vec<usize> = state.params().iter().map(|p| p.len()).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Applies one update to `params` in place.
    pub fn step(&mut self, params: &mut ModelState, grads: &Gradients) -> Result<()> {
        let grads = grads.slices();
        let mut targets = params.params_mut();
        if grads.len() != targets.len()
            || grads.len() != self.m.len()
            || grads
                .iter()
                .zip(&targets)
                .zip(&self.m)
                .any(|((g, p), m)| g.len() != p.len() || g.len() != m.len())
        {
            return Err(Error::Shape(
                "optimizer, parameter and gradient buffers disagree".into(),
            ));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.epsilon);
        for (((p, g), m), v) in targets.iter_mut().zip(&grads).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                let gi = g[i];
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
