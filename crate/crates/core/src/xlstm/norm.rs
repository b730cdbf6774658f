use crate::numerics::Scalar;

const EPS: f64 = 1e-5;

/// Per-row layer normalization statistics kept for the reverse pass.
#[derive(Debug, Clone)]
pub(crate) struct NormCache<T> {
    pub normalized: Vec<T>,
    pub inv_std: Vec<T>,
}

pub(crate) fn layer_norm_rows<T: Scalar>(
    x: &[T],
    width: usize,
    gamma: &[T],
    beta: &[T],
) -> (Vec<T>, NormCache<T>) {
    let rows = x.len() / width;
    let mut out = vec![T::zero(); x.len()];
    let mut normalized = vec![T::zero(); x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    let n = T::from_f64(width as f64);
    let eps = T::from_f64(EPS);
    for r in 0..rows {
        let row = &x[r * width..(r + 1) * width];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let inv = T::one() / (var + eps).sqrt();
        inv_std.push(inv);
        for j in 0..width {
            let xh = (row[j] - mean) * inv;
            normalized[r * width + j] = xh;
            out[r * width + j] = gamma[j] * xh + beta[j];
        }
    }
    (out, NormCache { normalized, inv_std })
}

/// Returns dx; accumulates into `dgamma`/`dbeta`.
pub(crate) fn layer_norm_rows_backward<T: Scalar>(
    dy: &[T],
    width: usize,
    gamma: &[T],
    cache: &NormCache<T>,
    dgamma: &mut [T],
    dbeta: &mut [T],
) -> Vec<T> {
    let rows = dy.len() / width;
    let n = T::from_f64(width as f64);
    let mut dx = vec![T::zero(); dy.len()];
    let mut dxh = vec![T::zero(); width];
    for r in 0..rows {
        let xh = &cache.normalized[r * width..(r + 1) * width];
        let g = &dy[r * width..(r + 1) * width];
        let mut mean_dxh = T::zero();
        let mut mean_dxh_xh = T::zero();
        for j in 0..width {
            dgamma[j] = dgamma[j] + g[j] * xh[j];
            dbeta[j] = dbeta[j] + g[j];
            dxh[j] = g[j] * gamma[j];
            mean_dxh = mean_dxh + dxh[j];
            mean_dxh_xh = mean_dxh_xh + dxh[j] * xh[j];
        }
        mean_dxh = mean_dxh / n;
        mean_dxh_xh = mean_dxh_xh / n;
        let inv = cache.inv_std[r];
        for j in 0..width {
            dx[r * width + j] = inv * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
        }
    }
    dx
}
