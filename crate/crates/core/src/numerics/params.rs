use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// A fixed, ordered collection of parameter tensors.
///
/// Gradients use the same type as the parameters they belong to, so every
/// optimizer and checker works against the one traversal order defined here.
pub trait ParamSet<T: Scalar> {
    fn tensors(&self) -> Vec<&Matrix<T>>;
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>>;
    fn tensor_names(&self) -> Vec<String>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn shapes(&self) -> Vec<(usize, usize)> {
        self.tensors().iter().map(|t| t.shape()).collect()
    }

    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut out = self.clone();
        out.tensors_mut().into_iter().for_each(|t| t.fill(T::zero()));
        out
    }

    fn accumulate(&mut self, other: &Self) -> Result<()> {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    fn scale_all(&mut self, factor: T) {
        self.tensors_mut().into_iter().for_each(|t| t.scale(factor));
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.sum_squares().as_f64())
            .sum::<f64>()
            .sqrt()
    }

    fn flatten(&self) -> Vec<f64> {
        self.tensors()
            .iter()
            .flat_map(|t| t.as_slice().iter().map(|v| v.as_f64()))
            .collect()
    }

    fn load_flat(&mut self, values: &[f64]) -> Result<()> {
        let total = self.param_count();
        if values.len() != total {
            return Err(Error::LengthMismatch {
                left: total,
                right: values.len(),
            });
        }
        let mut it = values.iter();
        for t in self.tensors_mut() {
            for (dst, src) in t.as_mut_slice().iter_mut().zip(&mut it) {
                *dst = T::from_f64(*src);
            }
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }
}
