use serde::{Deserialize, Serialize};

use super::PredictorParams;
use crate::error::{Error, Result};
use crate::numerics::{finite_diff_grad, relative_error, Matrix, ParamSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCheck {
    pub tensor: String,
    pub count: usize,
    pub max_rel_error: f64,
    /// Flat index within the tensor of the worst element.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub step: f64,
    pub samples: usize,
    pub groups: Vec<GroupCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&GroupCheck> {
        self.groups.iter().max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_error() < tolerance
    }
}

/// Mean squared error of the predictor over `batch`.
pub fn batch_mse(params: &PredictorParams<f64>, batch: &[(Matrix<f64>, f64)]) -> Result<f64> {
    let mut sum = 0.0;
    for (e, y) in batch {
        let d = params.forward(e)? - y;
        sum += d * d;
    }
    Ok(sum / batch.len() as f64)
}

/// Analytic gradient of [`batch_mse`].
pub fn batch_mse_grad(params: &PredictorParams<f64>, batch: &[(Matrix<f64>, f64)]) -> Result<PredictorParams<f64>> {
    let mut g = params.zeros_like();
    let n = batch.len() as f64;
    for (e, y) in batch {
        let (y_hat, cache) = params.forward_cached(e)?;
        g.accumulate(&params.backward(&cache, 2.0 * (y_hat - y) / n)?)?;
    }
    Ok(g)
}

/// Compares the analytic MSE gradient against central differences with step
/// `h` for every parameter, grouped by tensor.
pub fn gradient_check(params: &PredictorParams<f64>, batch: &[(Matrix<f64>, f64)], h: f64) -> Result<GradCheckReport> {
    if batch.is_empty() {
        return Err(Error::Empty("gradient-check batch"));
    }
    let analytic = batch_mse_grad(params, batch)?.flatten();
    let mut probe = params.clone();
    let numeric = finite_diff_grad(
        |v| {
            probe.load_flat(v).expect("same length");
            batch_mse(&probe, batch).unwrap_or(f64::NAN)
        },
        &params.flatten(),
        h,
    )?;
    let mut groups = Vec::new();
    let mut offset = 0;
    for (name, t) in params.tensor_names().into_iter().zip(params.tensors()) {
        let mut g = GroupCheck { tensor: name, count: t.len(), max_rel_error: 0.0, worst_index: 0, analytic: 0.0, numeric: 0.0 };
        for i in 0..t.len() {
            let (a, n) = (analytic[offset + i], numeric[offset + i]);
            let r = relative_error(a, n);
            if r > g.max_rel_error || i == 0 {
                g.max_rel_error = r;
                g.worst_index = i;
                g.analytic = a;
                g.numeric = n;
            }
        }
        offset += t.len();
        groups.push(g);
    }
    Ok(GradCheckReport { step: h, samples: batch.len(), groups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{init_params, InitScheme};
    use crate::predictor::{PredictorConfig, Pooling};

    #[test]
    fn small_model_passes_at_fine_step() {
        let cfg = PredictorConfig { d_vocab: 5, d_h: 4, heads: 2, layout: "m,s".parse().unwrap(), pooling: Pooling::Mean, ..PredictorConfig::default() };
        let p = PredictorParams::<f64>::init(&cfg, 3).unwrap();
        let batch: Vec<(Matrix<f64>, f64)> = (0..3)
            .map(|i| (init_params(4, 5, InitScheme::Uniform { bound: 1.0 }, 10 + i).unwrap(), i as f64))
            .collect();
        let r = gradient_check(&p, &batch, 1e-6).unwrap();
        assert_eq!(r.groups.len(), p.tensors().len());
        assert!(r.passes(1e-4), "{:?}", r.worst());
        assert_eq!(r.groups.iter().map(|g| g.count).sum::<usize>(), p.param_count());
    }
}
