use super::{Matrix, Scalar};
use crate::error::{Error, Result};

/// Low-rank update factors: `A` is d×r, `B` is r×k.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraFactors<T: Scalar = f32> {
    a: Matrix<T>,
    b: Matrix<T>,
}

impl<T: Scalar> LoraFactors<T> {
    pub fn new(a: Matrix<T>, b: Matrix<T>) -> Result<Self> {
        let rank = a.cols();
        if rank == 0 || b.rows() != rank || rank > a.rows().min(b.cols()) {
            return Err(Error::Dimension {
                op: "lora_factors",
                left: a.shape(),
                right: b.shape(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn a(&self) -> &Matrix<T> {
        &self.a
    }

    pub fn b(&self) -> &Matrix<T> {
        &self.b
    }
}

/// `W' = W + A·B`; the base weight is left untouched.
pub fn lora_adapt<T: Scalar>(w: &Matrix<T>, f: &LoraFactors<T>) -> Result<Matrix<T>> {
    if w.rows() != f.a.rows() || w.cols() != f.b.cols() {
        return Err(Error::Dimension {
            op: "lora_adapt",
            left: w.shape(),
            right: (f.a.rows(), f.b.cols()),
        });
    }
    w.add(&f.a.matmul(&f.b)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{init_params, InitScheme};

    fn rand(r: usize, c: usize, seed: u64) -> Matrix<f64> {
        init_params(r, c, InitScheme::Uniform { bound: 1.0 }, seed).unwrap()
    }

    /// Numerical rank by Gaussian elimination with partial pivoting.
    fn rank(m: &Matrix<f64>, tol: f64) -> usize {
        let mut a = m.clone();
        let (rows, cols) = a.shape();
        let mut rank = 0;
        for c in 0..cols {
            let Some(p) = (rank..rows).max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
            else {
                break;
            };
            if a[(p, c)].abs() < tol {
                continue;
            }
            for k in 0..cols {
                let tmp = a[(rank, k)];
                a[(rank, k)] = a[(p, k)];
                a[(p, k)] = tmp;
            }
            for i in rank + 1..rows {
                let f = a[(i, c)] / a[(rank, c)];
                for k in 0..cols {
                    a[(i, k)] -= f * a[(rank, k)];
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn zero_adapter_returns_base() {
        let w = rand(4, 3, 1);
        let f = LoraFactors::new(Matrix::zeros(4, 2), rand(2, 3, 2)).unwrap();
        assert_eq!(lora_adapt(&w, &f).unwrap(), w);
    }

    #[test]
    fn ones_outer_product() {
        let f = LoraFactors::new(
            Matrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            Matrix::row_vector(vec![1.0, 1.0]),
        )
        .unwrap();
        let out = lora_adapt(&Matrix::<f64>::zeros(2, 2), &f).unwrap();
        assert_eq!(out, Matrix::filled(2, 2, 1.0));
    }

    #[test]
    fn matches_dense_oracle_and_keeps_base() {
        let w = rand(4, 3, 3);
        let before = w.clone();
        let f = LoraFactors::new(rand(4, 2, 4), rand(2, 3, 5)).unwrap();
        let got = lora_adapt(&w, &f).unwrap();
        let mut dense = w.clone();
        for i in 0..4 {
            for j in 0..3 {
                for k in 0..2 {
                    dense[(i, j)] += f.a()[(i, k)] * f.b()[(k, j)];
                }
            }
        }
        assert!(got.max_abs_diff(&dense).unwrap() < 1e-14);
        assert_eq!(w, before);
    }

    #[test]
    fn update_rank_is_bounded() {
        for seed in 0..10 {
            let w = rand(6, 5, seed);
            let f = LoraFactors::new(rand(6, 2, seed + 50), rand(2, 5, seed + 90)).unwrap();
            let delta = lora_adapt(&w, &f).unwrap().sub(&w).unwrap();
            assert!(rank(&delta, 1e-9) <= 2);
            assert_eq!(rank(&w, 1e-9), 5);
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LoraFactors::new(rand(2, 3, 0), rand(3, 2, 1)).is_err()); // r > min(d, k)
        assert!(LoraFactors::new(rand(4, 2, 0), rand(3, 3, 1)).is_err());
        let f = LoraFactors::new(rand(4, 1, 0), rand(1, 3, 1)).unwrap();
        assert!(matches!(
            lora_adapt(&rand(3, 3, 2), &f),
            Err(Error::Dimension { op: "lora_adapt", .. })
        ));
    }
}
