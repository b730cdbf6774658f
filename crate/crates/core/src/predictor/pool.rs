use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Scalar};

/// Reduction of an `L × d` sequence to one `d`-vector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    #[default]
    Mean,
    Max,
    /// Mean of the first and last rows.
    FlMean,
    Last,
}

impl Pooling {
    pub const ALL: [Pooling; 4] = [Pooling::Mean, Pooling::Max, Pooling::FlMean, Pooling::Last];
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Max => "max",
            Pooling::FlMean => "fl_mean",
            Pooling::Last => "last",
        })
    }
}

impl FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            "fl_mean" | "fl-mean" => Ok(Pooling::FlMean),
            "last" => Ok(Pooling::Last),
            other => Err(Error::InvalidConfig(format!("unknown pooling '{other}'"))),
        }
    }
}

pub fn pool<T: Scalar>(x: &Matrix<T>, strategy: Pooling) -> Result<Vec<T>> {
    let (len, d) = x.shape();
    if len == 0 {
        return Err(Error::Empty("sequence to pool"));
    }
    let last = x.row(len - 1);
    Ok(match strategy {
        Pooling::Mean => {
            // offsets from the first row, so a constant column pools to itself exactly
            let first = x.row(0);
            let mut acc = vec![T::zero(); d];
            for r in 1..len {
                for ((a, &v), &f) in acc.iter_mut().zip(x.row(r)).zip(first) {
                    *a = *a + (v - f);
                }
            }
            let n = T::from_f64(len as f64);
            acc.iter().zip(first).map(|(&a, &f)| f + a / n).collect()
        }
        Pooling::Max => {
            let mut acc = x.row(0).to_vec();
            for r in 1..len {
                for (a, &v) in acc.iter_mut().zip(x.row(r)) {
                    if v > *a {
                        *a = v;
                    }
                }
            }
            acc
        }
        Pooling::FlMean => {
            let half = T::from_f64(0.5);
            x.row(0).iter().zip(last).map(|(&a, &b)| (a + b) * half).collect()
        }
        Pooling::Last => last.to_vec(),
    })
}

/// Spreads `dz` back over the rows of `x`. Max routes to the first row that
/// attains each column maximum.
pub fn pool_backward<T: Scalar>(x: &Matrix<T>, strategy: Pooling, dz: &[T]) -> Result<Matrix<T>> {
    let (len, d) = x.shape();
    if len == 0 {
        return Err(Error::Empty("sequence to pool"));
    }
    if dz.len() != d {
        return Err(Error::LengthMismatch { left: d, right: dz.len() });
    }
    let mut dx = Matrix::zeros(len, d);
    match strategy {
        Pooling::Mean => {
            let n = T::from_f64(len as f64);
            for r in 0..len {
                for (o, &g) in dx.row_mut(r).iter_mut().zip(dz) {
                    *o = g / n;
                }
            }
        }
        Pooling::Max => {
            for (j, &g) in dz.iter().enumerate() {
                let mut best = 0;
                for r in 1..len {
                    if x[(r, j)] > x[(best, j)] {
                        best = r;
                    }
                }
                dx[(best, j)] = g;
            }
        }
        Pooling::FlMean => {
            let half = T::from_f64(0.5);
            for (j, &g) in dz.iter().enumerate() {
                dx[(0, j)] = dx[(0, j)] + g * half;
                dx[(len - 1, j)] = dx[(len - 1, j)] + g * half;
            }
        }
        Pooling::Last => dx.row_mut(len - 1).copy_from_slice(dz),
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_column() {
        let x = Matrix::from_vec(3, 1, vec![0.0, 4.0, 2.0]).unwrap();
        let got: Vec<f64> = Pooling::ALL.iter().map(|&p| pool(&x, p).unwrap()[0]).collect();
        assert_eq!(got, vec![2.0, 4.0, 1.0, 2.0]);
    }

    #[test]
    fn constant_rows_and_single_row() {
        let row = vec![1.25f32, -3.5, 0.1];
        let x = Matrix::from_rows(&vec![row.clone(); 5]).unwrap();
        let one = Matrix::from_rows(&[row.clone()]).unwrap();
        for p in Pooling::ALL {
            assert_eq!(pool(&x, p).unwrap(), row, "{p}");
            assert_eq!(pool(&one, p).unwrap(), row, "{p}");
        }
    }

    #[test]
    fn empty_is_error() {
        for p in Pooling::ALL {
            assert!(matches!(pool(&Matrix::<f32>::zeros(0, 3), p), Err(Error::Empty(_))));
        }
    }

    #[test]
    fn backward_is_adjoint() {
        // ⟨pool_backward(dz), dx⟩ == ⟨dz, pool'(dx)⟩ for the linear strategies,
        // and for max wherever there are no ties.
        let x = Matrix::from_vec(3, 2, vec![0.3, -1.0, 2.0, 0.5, -0.7, 0.1]).unwrap();
        let dz = [0.7, -1.3];
        for p in Pooling::ALL {
            let g = pool_backward(&x, p, &dz).unwrap();
            let eps = 1e-6;
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp.as_mut_slice()[i] += eps;
                let a = pool(&xp, p).unwrap();
                let b = pool(&x, p).unwrap();
                let dir: f64 = a.iter().zip(&b).zip(&dz).map(|((a, b), g)| (a - b) / eps * g).sum();
                assert!((dir - g.as_slice()[i]).abs() < 1e-6, "{p} {i}");
            }
        }
    }

    #[test]
    fn names_round_trip() {
        for p in Pooling::ALL {
            assert_eq!(p.to_string().parse::<Pooling>().unwrap(), p);
        }
        assert!("median".parse::<Pooling>().is_err());
    }
}
