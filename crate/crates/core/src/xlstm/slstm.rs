use crate::error::{Error, Result};
use crate::numerics::{
    init_params_stream, outer_acc, sigmoid, vec_matmul, vec_matmul_t, InitScheme, Matrix,
    ParamSet, Scalar,
};

/// sLSTM cell weights. Gate columns are packed `[z | i | f | o]`, each `width` wide.
///
/// There is no input-gate bias: a constant shift of the input-gate
/// pre-activation rescales both `c` and `n` by the same factor, so it never
/// reaches the output and its gradient is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SlstmParams<T: Scalar = f32> {
    /// Input weights, width × 4·width.
    pub w: Matrix<T>,
    /// Recurrent weights, width × 4·width.
    pub r: Matrix<T>,
    /// 1 × 3·width, packed `[z | f | o]`.
    pub b: Matrix<T>,
}

impl<T: Scalar> SlstmParams<T> {
    pub fn zeros(width: usize) -> Self {
        Self {
            w: Matrix::zeros(width, 4 * width),
            r: Matrix::zeros(width, 4 * width),
            b: Matrix::zeros(1, 3 * width),
        }
    }

    /// Fan-based uniform weights per gate block, zero biases.
    pub fn init(width: usize, seed: u64, stream_base: u32) -> Result<Self> {
        let mut p = Self::zeros(width);
        for (k, target) in [&mut p.w, &mut p.r].into_iter().enumerate() {
            for gate in 0..4 {
                let block: Matrix<T> = init_params_stream(
                    width,
                    width,
                    InitScheme::FanUniform,
                    seed,
                    stream_base + (k * 4 + gate) as u32,
                )?;
                for row in 0..width {
                    target.row_mut(row)[gate * width..(gate + 1) * width]
                        .copy_from_slice(block.row(row));
                }
            }
        }
        Ok(p)
    }

    pub fn width(&self) -> usize {
        self.w.rows()
    }

    pub fn count(width: usize) -> usize {
        2 * width * 4 * width + 3 * width
    }
}

impl<T: Scalar> ParamSet<T> for SlstmParams<T> {
    fn tensors(&self) -> Vec<&Matrix<T>> {
        vec![&self.w, &self.r, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![&mut self.w, &mut self.r, &mut self.b]
    }
    fn tensor_names(&self) -> Vec<String> {
        ["w", "r", "b"].map(String::from).to_vec()
    }
}

/// Per-unit cell `c`, normalizer `n`, stabilizer `m` and hidden output `h`.
///
/// A unit whose normalizer is zero is treated as fresh: its next stabilizer is
/// taken from the input gate alone and the (empty) previous memory is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SlstmState<T: Scalar = f32> {
    pub c: Vec<T>,
    pub n: Vec<T>,
    pub m: Vec<T>,
    pub h: Vec<T>,
}

impl<T: Scalar> SlstmState<T> {
    pub fn zeros(width: usize) -> Self {
        Self {
            c: vec![T::zero(); width],
            n: vec![T::zero(); width],
            m: vec![T::zero(); width],
            h: vec![T::zero(); width],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SlstmCache<T: Scalar> {
    z: Vec<T>,
    ip: Vec<T>,
    fp: Vec<T>,
    o: Vec<T>,
    c: Vec<T>,
    n: Vec<T>,
    h: Vec<T>,
    init: SlstmState<T>,
}

/// Runs the sLSTM recurrence over `x` (L × width).
pub fn slstm_forward<T: Scalar>(
    x: &Matrix<T>,
    p: &SlstmParams<T>,
    s0: &SlstmState<T>,
) -> Result<(Matrix<T>, SlstmState<T>)> {
    let (h, s, _) = slstm_forward_cached(x, p, s0)?;
    Ok((h, s))
}

pub(crate) fn slstm_forward_cached<T: Scalar>(
    x: &Matrix<T>,
    p: &SlstmParams<T>,
    s0: &SlstmState<T>,
) -> Result<(Matrix<T>, SlstmState<T>, SlstmCache<T>)> {
    let d = p.width();
    if x.cols() != d {
        return Err(Error::Dimension {
            op: "slstm_forward",
            left: x.shape(),
            right: p.w.shape(),
        });
    }
    if s0.c.len() != d || s0.n.len() != d || s0.m.len() != d || s0.h.len() != d {
        return Err(Error::Dimension {
            op: "slstm_state",
            left: (1, s0.c.len()),
            right: (1, d),
        });
    }
    let len = x.rows();
    let mut cache = SlstmCache {
        z: vec![T::zero(); len * d],
        ip: vec![T::zero(); len * d],
        fp: vec![T::zero(); len * d],
        o: vec![T::zero(); len * d],
        c: vec![T::zero(); len * d],
        n: vec![T::zero(); len * d],
        h: vec![T::zero(); len * d],
        init: s0.clone(),
    };
    let mut state = s0.clone();
    let mut pre = vec![T::zero(); 4 * d];
    let mut rec = vec![T::zero(); 4 * d];
    for t in 0..len {
        vec_matmul(x.row(t), &p.w, &mut pre);
        vec_matmul(&state.h, &p.r, &mut rec);
        for (v, &r) in pre.iter_mut().zip(&rec) {
            *v = *v + r;
        }
        let b = p.b.as_slice();
        for (k, &bk) in b.iter().enumerate() {
            let col = if k < d { k } else { k + d };
            pre[col] = pre[col] + bk;
        }
        let off = t * d;
        for j in 0..d {
            let z = pre[j].tanh();
            let i_tilde = pre[d + j];
            let f_tilde = pre[2 * d + j];
            let o = sigmoid(pre[3 * d + j]);
            let (m, ip, fp) = if state.n[j] == T::zero() {
                (i_tilde, T::one(), T::zero())
            } else {
                let m = (f_tilde + state.m[j]).max(i_tilde);
                (m, (i_tilde - m).exp(), (f_tilde + state.m[j] - m).exp())
            };
            let c = fp * state.c[j] + ip * z;
            let n = fp * state.n[j] + ip;
            let h = o * c / n;
            state.c[j] = c;
            state.n[j] = n;
            state.m[j] = m;
            state.h[j] = h;
            cache.z[off + j] = z;
            cache.ip[off + j] = ip;
            cache.fp[off + j] = fp;
            cache.o[off + j] = o;
            cache.c[off + j] = c;
            cache.n[off + j] = n;
            cache.h[off + j] = h;
        }
    }
    let out = Matrix::from_vec(len, d, cache.h.clone())?.ensure_finite("sLSTM output")?;
    Ok((out, state, cache))
}

/// Reverse pass for a sequence whose loss depends on the hidden outputs only.
/// Accumulates into `grads` and returns the gradient with respect to `x`.
pub(crate) fn slstm_backward<T: Scalar>(
    dout: &Matrix<T>,
    x: &Matrix<T>,
    p: &SlstmParams<T>,
    cache: &SlstmCache<T>,
    grads: &mut SlstmParams<T>,
) -> Result<Matrix<T>> {
    let d = p.width();
    let len = x.rows();
    if dout.shape() != x.shape() || cache.h.len() != len * d {
        return Err(Error::StaleCache("sLSTM"));
    }
    let mut dx = Matrix::zeros(len, d);
    let mut dh_rec = vec![T::zero(); d];
    let mut dc_next = vec![T::zero(); d];
    let mut dn_next = vec![T::zero(); d];
    let mut dpre = vec![T::zero(); 4 * d];
    let one = T::one();
    for t in (0..len).rev() {
        let off = t * d;
        let prev = |v: &[T], init: &[T], j: usize| if t == 0 { init[j] } else { v[off - d + j] };
        for j in 0..d {
            let dh = dout[(t, j)] + dh_rec[j];
            let (z, ip, fp, o) = (
                cache.z[off + j],
                cache.ip[off + j],
                cache.fp[off + j],
                cache.o[off + j],
            );
            let (c, n) = (cache.c[off + j], cache.n[off + j]);
            let c_prev = prev(&cache.c, &cache.init.c, j);
            let n_prev = prev(&cache.n, &cache.init.n, j);

            let dc = dc_next[j] + dh * o / n;
            let dn = dn_next[j] - dh * o * c / (n * n);
            let d_o = dh * c / n;
            let dip = dc * z + dn;
            let dfp = dc * c_prev + dn * n_prev;

            dpre[j] = dc * ip * (one - z * z);
            dpre[d + j] = dip * ip;
            dpre[2 * d + j] = dfp * fp;
            dpre[3 * d + j] = d_o * o * (one - o);
            dc_next[j] = dc * fp;
            dn_next[j] = dn * fp;
        }
        let h_prev: Vec<T> = (0..d).map(|j| prev(&cache.h, &cache.init.h, j)).collect();
        outer_acc(&mut grads.w, x.row(t), &dpre);
        outer_acc(&mut grads.r, &h_prev, &dpre);
        for (k, g) in grads.b.as_mut_slice().iter_mut().enumerate() {
            *g = *g + dpre[if k < d { k } else { k + d }];
        }
        vec_matmul_t(&dpre, &p.w, dx.row_mut(t));
        vec_matmul_t(&dpre, &p.r, &mut dh_rec);
    }
    Ok(dx)
}
