use super::{pool, pool_backward, PredictorConfig};
use crate::error::{Error, Result};
use crate::numerics::{
    dot, init_params_stream, outer_acc, vec_matmul, vec_matmul_t, InitScheme, Matrix, ParamSet,
    Scalar,
};
use crate::xlstm::{StackCache, XlstmStack};

/// All trainable tensors of the predictor.
///
/// The stack is always allocated, even when the configuration bypasses it, so
/// a checkpoint has the same tensors regardless of the ablation flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams<T: Scalar = f32> {
    pub config: PredictorConfig,
    /// d_vocab × d_h, no bias.
    pub w_proj: Matrix<T>,
    pub stack: XlstmStack<T>,
    /// d_h × hidden.
    pub w1: Matrix<T>,
    pub b1: Matrix<T>,
    /// hidden × 1.
    pub w2: Matrix<T>,
    pub b2: Matrix<T>,
}

/// Intermediate activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T: Scalar = f32> {
    input: Matrix<T>,
    stack: Option<StackCache<T>>,
    seq: Matrix<T>,
    z: Vec<T>,
    a1: Vec<T>,
}

impl<T: Scalar> PredictorParams<T> {
    pub fn zeros(config: &PredictorConfig) -> Result<Self> {
        config.validate()?;
        let (d, hid) = (config.d_h, config.hidden());
        Ok(Self {
            config: config.clone(),
            w_proj: Matrix::zeros(config.d_vocab, d),
            stack: XlstmStack::zeros(&config.layout, d, config.heads),
            w1: Matrix::zeros(d, hid),
            b1: Matrix::zeros(1, hid),
            w2: Matrix::zeros(hid, 1),
            b2: Matrix::zeros(1, 1),
        })
    }

    /// Fan-based uniform weights and zero biases.
    pub fn init(config: &PredictorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (d, hid) = (config.d_h, config.hidden());
        let fan = InitScheme::FanUniform;
        Ok(Self {
            config: config.clone(),
            w_proj: init_params_stream(config.d_vocab, d, fan, seed, 0)?,
            stack: XlstmStack::init(&config.layout, d, config.heads, seed)?,
            w1: init_params_stream(d, hid, fan, seed, 1)?,
            b1: Matrix::zeros(1, hid),
            w2: init_params_stream(hid, 1, fan, seed, 2)?,
            b2: Matrix::zeros(1, 1),
        })
    }

    /// `E · W_proj`.
    pub fn project(&self, e: &Matrix<T>) -> Result<Matrix<T>> {
        if e.cols() != self.config.d_vocab {
            return Err(Error::Dimension {
                op: "project (input width vs d_vocab)",
                left: e.shape(),
                right: self.w_proj.shape(),
            });
        }
        e.matmul(&self.w_proj)
    }

    /// Two affine layers with a rectifier between them.
    pub fn regress(&self, z: &[T]) -> Result<T> {
        Ok(self.regress_cached(z)?.0)
    }

    fn regress_cached(&self, z: &[T]) -> Result<(T, Vec<T>)> {
        if z.len() != self.w1.rows() {
            return Err(Error::LengthMismatch {
                left: self.w1.rows(),
                right: z.len(),
            });
        }
        let mut a1 = vec![T::zero(); self.w1.cols()];
        vec_matmul(z, &self.w1, &mut a1);
        for (a, &b) in a1.iter_mut().zip(self.b1.as_slice()) {
            *a = *a + b;
        }
        let h1: Vec<T> = a1.iter().map(|&a| a.max(T::zero())).collect();
        let y = dot(&h1, self.w2.as_slice()) + self.b2.as_slice()[0];
        Ok((y, a1))
    }

    pub fn forward(&self, e: &Matrix<T>) -> Result<T> {
        Ok(self.forward_cached(e)?.0)
    }

    pub fn forward_cached(&self, e: &Matrix<T>) -> Result<(T, ForwardCache<T>)> {
        if e.rows() == 0 {
            return Err(Error::Empty("input sequence"));
        }
        let proj = self.project(e)?;
        let (seq, stack) = if self.config.uses_stack() {
            let (out, cache) = self.stack.forward_cached(&proj)?;
            (out, Some(cache))
        } else {
            (proj, None)
        };
        let z = pool(&seq, self.config.pooling)?;
        let (y, a1) = self.regress_cached(&z)?;
        if !y.is_finite() {
            return Err(Error::NonFinite(format!("prediction {y}")));
        }
        Ok((
            y,
            ForwardCache {
                input: e.clone(),
                stack,
                seq,
                z,
                a1,
            },
        ))
    }

    /// Gradient of `dy · ŷ` with respect to every parameter.
    pub fn backward(&self, cache: &ForwardCache<T>, dy: T) -> Result<Self> {
        if cache.input.cols() != self.config.d_vocab || cache.z.len() != self.config.d_h {
            return Err(Error::StaleCache("predictor"));
        }
        let mut g = self.zeros_like();
        let h1: Vec<T> = cache.a1.iter().map(|&a| a.max(T::zero())).collect();
        g.b2.as_mut_slice()[0] = dy;
        for (gw, &h) in g.w2.as_mut_slice().iter_mut().zip(&h1) {
            *gw = h * dy;
        }
        let da1: Vec<T> = cache
            .a1
            .iter()
            .zip(self.w2.as_slice())
            .map(|(&a, &w)| if a > T::zero() { w * dy } else { T::zero() })
            .collect();
        g.b1.as_mut_slice().copy_from_slice(&da1);
        outer_acc(&mut g.w1, &cache.z, &da1);
        let mut dz = vec![T::zero(); self.config.d_h];
        vec_matmul_t(&da1, &self.w1, &mut dz);

        let dseq = pool_backward(&cache.seq, self.config.pooling, &dz)?;
        let dproj = match (&cache.stack, self.config.uses_stack()) {
            (Some(sc), true) => {
                let (dx, gs) = self.stack.backward(&dseq, sc)?;
                g.stack = gs;
                dx
            }
            (None, false) => dseq,
            _ => return Err(Error::StaleCache("predictor stack usage changed")),
        };
        g.w_proj = cache.input.t_matmul(&dproj)?;
        Ok(g)
    }
}

impl<T: Scalar> ParamSet<T> for PredictorParams<T> {
    fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut v = vec![&self.w_proj];
        v.extend(self.stack.tensors());
        v.extend([&self.w1, &self.b1, &self.w2, &self.b2]);
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v = vec![&mut self.w_proj];
        v.extend(self.stack.tensors_mut());
        v.extend([&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]);
        v
    }
    fn tensor_names(&self) -> Vec<String> {
        let mut v = vec!["w_proj".to_string()];
        v.extend(self.stack.tensor_names());
        v.extend(["head.w1", "head.b1", "head.w2", "head.b2"].map(String::from));
        v
    }
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / pred.len() as f64)
}

/// `∂L/∂ŷ_i = 2(ŷ_i − y_i)/n`.
pub fn mse_loss_grad(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    mse_loss(pred, target)?;
    let n = pred.len() as f64;
    Ok(pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect())
}
