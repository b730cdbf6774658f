use crate::error::{Error, Result};

const DEGREE: usize = 4;

/// Evaluates `Σ c_k x^k` with coefficients in ascending order.
pub fn polyval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Least-squares quartic through `(x, y)`. Returns `[c0, c1, c2, c3, c4]` in
/// the original abscissa, so `y ≈ Σ c_k x^k`.
///
/// The fit is solved on `u = (x - centre) / scale` with `u ∈ [-1, 1]`, then
/// expanded back binomially.
pub fn polyfit4(x: &[f64], y: &[f64]) -> Result<[f64; DEGREE + 1]> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < DEGREE + 1 {
        return Err(Error::RankDeficient);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polynomial fit input".into()));
    }
    let centre = x.iter().sum::<f64>() / x.len() as f64;
    let scale = x.iter().map(|v| (v - centre).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::RankDeficient);
    }

    const P: usize = DEGREE + 1;
    let mut a = [[0.0; P + 1]; P];
    for (&xi, &yi) in x.iter().zip(y) {
        let u = (xi - centre) / scale;
        let mut pow = [1.0; 2 * DEGREE + 1];
        for k in 1..pow.len() {
            pow[k] = pow[k - 1] * u;
        }
        for i in 0..P {
            for j in 0..P {
                a[i][j] += pow[i + j];
            }
            a[i][P] += pow[i] * yi;
        }
    }
    let trace: f64 = (0..P).map(|i| a[i][i]).sum();

    // Gaussian elimination with partial pivoting on the augmented system.
    for col in 0..P {
        let pivot = (col..P)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty");
        if a[pivot][col].abs() <= 1e-12 * trace {
            return Err(Error::RankDeficient);
        }
        a.swap(col, pivot);
        for r in col + 1..P {
            let f = a[r][col] / a[col][col];
            for c in col..=P {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = [0.0; P];
    for i in (0..P).rev() {
        let tail: f64 = (i + 1..P).map(|j| a[i][j] * beta[j]).sum();
        beta[i] = (a[i][P] - tail) / a[i][i];
    }

    // Σ β_k ((x - c)/s)^k  ->  Σ coeff_j x^j
    let mut coeffs = [0.0; P];
    for (k, &b) in beta.iter().enumerate() {
        let bk = b / scale.powi(k as i32);
        let mut binom = 1.0;
        for j in 0..=k {
            coeffs[j] += bk * binom * (-centre).powi((k - j) as i32);
            binom = binom * (k - j) as f64 / (j + 1) as f64;
        }
    }
    Ok(coeffs)
}
