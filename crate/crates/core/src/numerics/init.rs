use std::str::FromStr;

use rand::Rng;

use super::{stream, Matrix, Scalar, Stream};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// U(−b, b) with b = sqrt(6 / (fan_in + fan_out)); fan_in = rows, fan_out = cols.
    FanUniform,
    /// U(−bound, bound).
    Uniform { bound: f64 },
    Zeros,
    Constant(f64),
}

impl FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fan_uniform" | "uniform-fan-based" | "xavier" => Ok(InitScheme::FanUniform),
            "zeros" => Ok(InitScheme::Zeros),
            "ones" => Ok(InitScheme::Constant(1.0)),
            other => {
                if let Some(v) = other.strip_prefix("constant:") {
                    v.parse()
                        .map(InitScheme::Constant)
                        .map_err(|_| Error::UnknownScheme(other.to_string()))
                } else {
                    Err(Error::UnknownScheme(other.to_string()))
                }
            }
        }
    }
}

pub fn fan_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols).max(1) as f64).sqrt()
}

/// Deterministic tensor initialization: identical `(shape, scheme, seed)` gives
/// bitwise-identical output.
pub fn init_params<T: Scalar>(
    rows: usize,
    cols: usize,
    scheme: InitScheme,
    seed: u64,
) -> Result<Matrix<T>> {
    init_params_stream(rows, cols, scheme, seed, 0)
}

pub(crate) fn init_params_stream<T: Scalar>(
    rows: usize,
    cols: usize,
    scheme: InitScheme,
    seed: u64,
    tensor: u32,
) -> Result<Matrix<T>> {
    let bound = match scheme {
        InitScheme::Zeros => return Ok(Matrix::zeros(rows, cols)),
        InitScheme::Constant(c) => {
            if !c.is_finite() {
                return Err(Error::NonFinite(format!("constant init {c}")));
            }
            return Ok(Matrix::filled(rows, cols, T::from_f64(c)));
        }
        InitScheme::FanUniform => fan_bound(rows, cols),
        InitScheme::Uniform { bound } => bound,
    };
    let mut rng = stream(seed, Stream::Init(tensor));
    let data = (0..rows * cols)
        .map(|_| T::from_f64(rng.random_range(-bound..=bound)))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeros_scheme() {
        let m: Matrix<f32> = init_params(3, 5, "zeros".parse().unwrap(), 9).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a: Matrix<f32> = init_params(4, 6, InitScheme::FanUniform, 11).unwrap();
        let b: Matrix<f32> = init_params(4, 6, InitScheme::FanUniform, 11).unwrap();
        let c: Matrix<f32> = init_params(4, 6, InitScheme::FanUniform, 12).unwrap();
        let bits = |m: &Matrix<f32>| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn fan_bound_holds_over_full_tensor() {
        let bound = (6.0f64 / 8.0).sqrt();
        for seed in 0..50 {
            let m: Matrix<f64> = init_params(4, 4, InitScheme::FanUniform, seed).unwrap();
            assert!(m.as_slice().iter().all(|v| v.abs() <= bound));
        }
    }

    #[test]
    fn unknown_scheme_is_an_error() {
        assert!(matches!(
            "gaussian".parse::<InitScheme>(),
            Err(Error::UnknownScheme(s)) if s == "gaussian"
        ));
        assert_eq!(
            "constant:0.5".parse::<InitScheme>().unwrap(),
            InitScheme::Constant(0.5)
        );
    }
}
