use serde::{Deserialize, Serialize};

use super::{Matrix, Scalar};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Adam with decoupled weight decay.
///
/// The decay term shrinks weights directly (`w ← w·(1 − lr·λ)`) instead of
/// being folded into the gradient, so it is not rescaled by the second moment.
#[derive(Debug, Clone)]
pub struct AdamW<T: Scalar = f32> {
    pub config: AdamWConfig,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
    step: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let (first, second) = shapes
            .into_iter()
            .map(|(r, c)| (Matrix::zeros(r, c), Matrix::zeros(r, c)))
            .unzip();
        Self {
            config,
            first,
            second,
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[&Matrix<T>]) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::LengthMismatch {
                left: params.len(),
                right: grads.len().min(self.first.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.first[i].shape() {
                return Err(Error::Dimension {
                    op: "adamw_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
            if !g.is_finite() {
                return Err(Error::NonFinite(format!(
                    "gradient of parameter tensor {i} at optimizer step {}",
                    self.step + 1
                )));
            }
        }

        self.step += 1;
        let c = &self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - c.beta1.powi(t);
        let bias2 = 1.0 - c.beta2.powi(t);
        let lr = T::from_f64(c.lr);
        let decay = T::from_f64(1.0 - c.lr * c.weight_decay);
        let (b1, b2) = (T::from_f64(c.beta1), T::from_f64(c.beta2));
        let (one_b1, one_b2) = (T::from_f64(1.0 - c.beta1), T::from_f64(1.0 - c.beta2));
        let (bias1, bias2) = (T::from_f64(bias1), T::from_f64(bias2));
        let eps = T::from_f64(c.eps);

        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            let iter = p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice()));
            for ((w, &grad), (m, v)) in iter {
                *m = b1 * *m + one_b1 * grad;
                *v = b2 * *v + one_b2 * grad * grad;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w = *w * decay - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix<f64> {
        Matrix::filled(1, 1, v)
    }

    fn cfg(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut opt = AdamW::new(cfg(0.1, 0.0), [(2, 2)]);
        let mut w = Matrix::<f64>::filled(2, 2, 0.7);
        let g = Matrix::zeros(2, 2);
        opt.step(&mut [&mut w], &[&g]).unwrap();
        assert_eq!(w, Matrix::filled(2, 2, 0.7));
        assert_eq!(opt.steps_taken(), 1);
    }

    #[test]
    fn first_step_hand_evaluated() {
        // m = 0.1, v = 0.001; bias-corrected both are 1 → w = 1 − 0.1·1/(1 + 1e-8)
        let mut opt = AdamW::new(cfg(0.1, 0.0), [(1, 1)]);
        let mut w = scalar(1.0);
        opt.step(&mut [&mut w], &[&scalar(1.0)]).unwrap();
        assert!((w[(0, 0)] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn decay_is_decoupled_from_gradient() {
        let mut opt = AdamW::new(cfg(0.1, 0.5), [(1, 1)]);
        let mut w = scalar(1.0);
        opt.step(&mut [&mut w], &[&scalar(0.0)]).unwrap();
        assert!((w[(0, 0)] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn bitwise_reproducible() {
        let run = || {
            let mut opt = AdamW::<f32>::new(cfg(0.01, 0.1), [(1, 3)]);
            let mut w = Matrix::row_vector(vec![0.3, -0.2, 1.5]);
            for k in 0..5 {
                let g = Matrix::row_vector(vec![0.1 * k as f32, -0.7, 0.33]);
                opt.step(&mut [&mut w], &[&g]).unwrap();
            }
            w.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_bad_gradients() {
        let mut opt = AdamW::new(cfg(0.1, 0.0), [(1, 1)]);
        let mut w = scalar(1.0);
        let err = opt.step(&mut [&mut w], &[&scalar(f64::NAN)]).unwrap_err();
        assert!(matches!(err, Error::NonFinite(ref s) if s.contains("tensor 0")));
        assert_eq!(opt.steps_taken(), 0);
        let err = opt
            .step(&mut [&mut w], &[&Matrix::zeros(1, 2)])
            .unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }
}
