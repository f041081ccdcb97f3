//! Batch normalization over the rows of a `batch × dim` matrix.

use serde::{Deserialize, Serialize};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub epsilon: f64,
}

/// Values kept from a forward pass for the backward pass and the running-stat update.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    /// Normalized input, `batch × dim`.
    pub x_hat: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Batch statistics when they were used: (mean, biased var, unbiased var).
    pub batch_stats: Option<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Normalize with the current batch statistics.
    Batch,
    /// Normalize with the running statistics.
    Running,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x` (`rows × dim`, row-major) into `out`.
    pub fn forward(&self, x: &[f64], rows: usize, mode: NormMode, out: &mut [f64]) -> BatchNormCache {
        let dim = self.dim();
        debug_assert_eq!(x.len(), rows * dim);
        debug_assert_eq!(out.len(), rows * dim);
        let (mean, inv_std, batch_stats) = match mode {
            NormMode::Batch => {
                let n = rows as f64;
                let mut mean = vec![0.0; dim];
                for row in x.chunks_exact(dim) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m += v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= n);
                let mut var = vec![0.0; dim];
                for row in x.chunks_exact(dim) {
                    for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                        *s += (v - m) * (v - m);
                    }
                }
                let unbiased: Vec<f64> = var.iter().map(|s| s / (n - 1.0).max(1.0)).collect();
                var.iter_mut().for_each(|s| *s /= n);
                let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.epsilon).sqrt()).collect();
                (mean.clone(), inv_std, Some((mean, var, unbiased)))
            }
            NormMode::Running => {
                let inv_std = self
                    .running_var
                    .iter()
                    .map(|v| 1.0 / (v + self.epsilon).sqrt())
                    .collect();
                (self.running_mean.clone(), inv_std, None)
            }
        };
        let mut x_hat = vec![0.0; x.len()];
        for ((xr, hr), or) in x
            .chunks_exact(dim)
            .zip(x_hat.chunks_exact_mut(dim))
            .zip(out.chunks_exact_mut(dim))
        {
            for j in 0..dim {
                let h = (xr[j] - mean[j]) * inv_std[j];
                hr[j] = h;
                or[j] = self.gamma[j] * h + self.beta[j];
            }
        }
        BatchNormCache {
            x_hat,
            inv_std,
            batch_stats,
        }
    }

    /// Back-propagates `dy` (`rows × dim`). Returns `(dx, dgamma, dbeta)`.
    pub fn backward(&self, cache: &BatchNormCache, dy: &[f64], rows: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let dim = self.dim();
        let mut dgamma = vec![0.0; dim];
        let mut dbeta = vec![0.0; dim];
        for (dr, hr) in dy.chunks_exact(dim).zip(cache.x_hat.chunks_exact(dim)) {
            for j in 0..dim {
                dbeta[j] += dr[j];
                dgamma[j] += dr[j] * hr[j];
            }
        }
        let mut dx = vec![0.0; dy.len()];
        if cache.batch_stats.is_some() {
            // dx = γ·inv_std/n · (n·dy - Σdy - x̂·Σ(dy·x̂))
            let n = rows as f64;
            for ((dxr, dr), hr) in dx
                .chunks_exact_mut(dim)
                .zip(dy.chunks_exact(dim))
                .zip(cache.x_hat.chunks_exact(dim))
            {
                for j in 0..dim {
                    dxr[j] = self.gamma[j] * cache.inv_std[j] / n * (n * dr[j] - dbeta[j] - hr[j] * dgamma[j]);
                }
            }
        } else {
            for (dxr, dr) in dx.chunks_exact_mut(dim).zip(dy.chunks_exact(dim)) {
                for j in 0..dim {
                    dxr[j] = self.gamma[j] * cache.inv_std[j] * dr[j];
                }
            }
        }
        (dx, dgamma, dbeta)
    }

    /// Folds batch statistics from `cache` into the running estimates.
    pub fn update_running(&mut self, cache: &BatchNormCache) {
        if let Some((mean, _, unbiased)) = &cache.batch_stats {
            let m = self.momentum;
            for j in 0..self.dim() {
                self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * mean[j];
                self.running_var[j] = (1.0 - m) * self.running_var[j] + m * unbiased[j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_normalize_to_beta() {
        let bn = BatchNorm::new(3);
        let x = [0.5, -2.0, 7.0, 0.5, -2.0, 7.0, 0.5, -2.0, 7.0];
        let mut out = [0.0; 9];
        bn.forward(&x, 3, NormMode::Batch, &mut out);
        assert!(out.iter().all(|v| v.abs() <= 1e-3));
    }

    #[test]
    fn batch_mode_standardizes_columns() {
        let bn = BatchNorm::new(2);
        let x = [1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0];
        let mut out = [0.0; 8];
        let cache = bn.forward(&x, 4, NormMode::Batch, &mut out);
        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|i| out[i * 2 + j]).collect();
            let mean: f64 = col.iter().sum::<f64>() / 4.0;
            let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-4);
        }
        let (mean, var, unbiased) = cache.batch_stats.unwrap();
        assert_eq!(mean, vec![2.5, 25.0]);
        assert!((var[0] - 1.25).abs() < 1e-12);
        assert!((unbiased[0] - 5.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn running_update_uses_momentum_and_bessel() {
        let mut bn = BatchNorm::new(1);
        let mut out = [0.0; 2];
        let cache = bn.forward(&[1.0, 3.0], 2, NormMode::Batch, &mut out);
        bn.update_running(&cache);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);

        let before = bn.clone();
        let cache = bn.forward(&[5.0], 1, NormMode::Running, &mut [0.0]);
        bn.update_running(&cache);
        assert_eq!(bn, before);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut bn = BatchNorm::new(2);
        bn.gamma = vec![1.3, -0.7];
        bn.beta = vec![0.1, 0.4];
        let x = vec![0.3, -1.0, 1.7, 0.2, -0.4, 0.9];
        let w = [0.5, -1.5, 2.0, 0.25, 1.0, -0.3];
        let objective = |bn: &BatchNorm, x: &[f64], mode| {
            let mut out = vec![0.0; 6];
            bn.forward(x, 3, mode, &mut out);
            out.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()
        };
        for mode in [NormMode::Batch, NormMode::Running] {
            let mut out = vec![0.0; 6];
            let cache = bn.forward(&x, 3, mode, &mut out);
            let (dx, dgamma, _) = bn.backward(&cache, &w, 3);
            let h = 1e-6;
            for i in 0..6 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let num = (objective(&bn, &xp, mode) - objective(&bn, &xm, mode)) / (2.0 * h);
                assert!((num - dx[i]).abs() < 1e-7, "{mode:?} dx[{i}]: {num} vs {}", dx[i]);
            }
            for (j, &want) in dgamma.iter().enumerate() {
                let mut p = bn.clone();
                let mut m = bn.clone();
                p.gamma[j] += h;
                m.gamma[j] -= h;
                let num = (objective(&p, &x, mode) - objective(&m, &x, mode)) / (2.0 * h);
                assert!((num - want).abs() < 1e-7);
            }
        }
    }
}
