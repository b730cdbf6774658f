use crate::error::{Error, Result};
use crate::numerics::{
    dot, init_params_stream, outer_acc, sigmoid, vec_matmul, vec_matmul_t, InitScheme, Matrix,
    ParamSet, Scalar,
};

/// mLSTM cell weights. Gates are one scalar per head, driven by the input only;
/// the forget gate is a sigmoid, applied in log space as `log σ(f̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlstmParams<T: Scalar = f32> {
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
    pub w_o: Matrix<T>,
    pub b_o: Matrix<T>,
    /// width × 2·heads, columns `[input gates | forget gates]`.
    pub w_gate: Matrix<T>,
    pub b_gate: Matrix<T>,
}

impl<T: Scalar> MlstmParams<T> {
    pub fn zeros(width: usize, heads: usize) -> Self {
        Self {
            w_q: Matrix::zeros(width, width),
            w_k: Matrix::zeros(width, width),
            w_v: Matrix::zeros(width, width),
            w_o: Matrix::zeros(width, width),
            b_o: Matrix::zeros(1, width),
            w_gate: Matrix::zeros(width, 2 * heads),
            b_gate: Matrix::zeros(1, 2 * heads),
        }
    }

    pub fn init(width: usize, heads: usize, seed: u64, stream_base: u32) -> Result<Self> {
        if heads == 0 || width % heads != 0 {
            return Err(Error::InvalidConfig(format!(
                "mLSTM width {width} not divisible into {heads} heads"
            )));
        }
        let fan = |rows, cols, k: u32| {
            init_params_stream(rows, cols, InitScheme::FanUniform, seed, stream_base + k)
        };
        Ok(Self {
            w_q: fan(width, width, 0)?,
            w_k: fan(width, width, 1)?,
            w_v: fan(width, width, 2)?,
            w_o: fan(width, width, 3)?,
            b_o: Matrix::zeros(1, width),
            w_gate: fan(width, 2 * heads, 4)?,
            b_gate: Matrix::zeros(1, 2 * heads),
        })
    }

    pub fn width(&self) -> usize {
        self.w_q.rows()
    }

    pub fn heads(&self) -> usize {
        self.w_gate.cols() / 2
    }

    pub fn count(width: usize, heads: usize) -> usize {
        4 * width * width + width + 2 * heads * width + 2 * heads
    }
}

impl<T: Scalar> ParamSet<T> for MlstmParams<T> {
    fn tensors(&self) -> Vec<&Matrix<T>> {
        vec![
            &self.w_q,
            &self.w_k,
            &self.w_v,
            &self.w_o,
            &self.b_o,
            &self.w_gate,
            &self.b_gate,
        ]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        vec![
            &mut self.w_q,
            &mut self.w_k,
            &mut self.w_v,
            &mut self.w_o,
            &mut self.b_o,
            &mut self.w_gate,
            &mut self.b_gate,
        ]
    }
    fn tensor_names(&self) -> Vec<String> {
        ["w_q", "w_k", "w_v", "w_o", "b_o", "w_gate", "b_gate"]
            .map(String::from)
            .to_vec()
    }
}

/// Matrix memory per head (`head_dim × head_dim`, row = value index,
/// column = key index), normalizer vector and per-head stabilizer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlstmState<T: Scalar = f32> {
    pub c: Vec<T>,
    pub n: Vec<T>,
    pub m: Vec<T>,
}

impl<T: Scalar> MlstmState<T> {
    pub fn zeros(width: usize, heads: usize) -> Self {
        let hd = width / heads.max(1);
        Self {
            c: vec![T::zero(); heads * hd * hd],
            n: vec![T::zero(); width],
            m: vec![T::zero(); heads],
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct MlstmCache<T: Scalar> {
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    o: Vec<T>,
    read: Vec<T>,
    num: Vec<T>,
    ip: Vec<T>,
    fp: Vec<T>,
    f_sig: Vec<T>,
    s: Vec<T>,
    den: Vec<T>,
    s_branch: Vec<bool>,
    c: Vec<T>,
    n: Vec<T>,
    init: MlstmState<T>,
}

/// Runs the mLSTM recurrence over `x` (L × width).
///
/// The read-out `C·q` is divided by `max(|nᵀq|, e^{-m})`, the stabilized form of
/// `max(|nᵀq|, 1)` on the unscaled memory.
pub fn mlstm_forward<T: Scalar>(
    x: &Matrix<T>,
    p: &MlstmParams<T>,
    s0: &MlstmState<T>,
) -> Result<(Matrix<T>, MlstmState<T>)> {
    let (h, s, _) = mlstm_forward_cached(x, p, s0)?;
    Ok((h, s))
}

pub(crate) fn mlstm_forward_cached<T: Scalar>(
    x: &Matrix<T>,
    p: &MlstmParams<T>,
    s0: &MlstmState<T>,
) -> Result<(Matrix<T>, MlstmState<T>, MlstmCache<T>)> {
    let d = p.width();
    let heads = p.heads();
    if x.cols() != d {
        return Err(Error::Dimension {
            op: "mlstm_forward",
            left: x.shape(),
            right: p.w_q.shape(),
        });
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidConfig(format!("{heads} heads for width {d}")));
    }
    let hd = d / heads;
    let mem = hd * hd;
    if s0.c.len() != heads * mem || s0.n.len() != d || s0.m.len() != heads {
        return Err(Error::Dimension {
            op: "mlstm_state",
            left: (heads, s0.c.len()),
            right: (heads, heads * mem),
        });
    }
    let len = x.rows();
    let key_scale = T::from_f64(1.0 / (hd as f64).sqrt());
    let zeros = |n| vec![T::zero(); n];
    let mut cache = MlstmCache {
        q: zeros(len * d),
        k: zeros(len * d),
        v: zeros(len * d),
        o: zeros(len * d),
        read: zeros(len * d),
        num: zeros(len * d),
        ip: zeros(len * heads),
        fp: zeros(len * heads),
        f_sig: zeros(len * heads),
        s: zeros(len * heads),
        den: zeros(len * heads),
        s_branch: vec![false; len * heads],
        c: zeros(len * heads * mem),
        n: zeros(len * d),
        init: s0.clone(),
    };
    let mut state = s0.clone();
    let mut gates = zeros(2 * heads);
    let mut out = Matrix::zeros(len, d);
    for t in 0..len {
        let u = x.row(t);
        let row = t * d..(t + 1) * d;
        vec_matmul(u, &p.w_q, &mut cache.q[row.clone()]);
        vec_matmul(u, &p.w_k, &mut cache.k[row.clone()]);
        vec_matmul(u, &p.w_v, &mut cache.v[row.clone()]);
        vec_matmul(u, &p.w_o, &mut cache.o[row.clone()]);
        vec_matmul(u, &p.w_gate, &mut gates);
        for k in &mut cache.k[row.clone()] {
            *k = *k * key_scale;
        }
        for (o, &b) in cache.o[row.clone()].iter_mut().zip(p.b_o.as_slice()) {
            *o = sigmoid(*o + b);
        }
        for (g, &b) in gates.iter_mut().zip(p.b_gate.as_slice()) {
            *g = *g + b;
        }
        for h in 0..heads {
            let i_tilde = gates[h];
            let f_pre = gates[heads + h];
            let f_tilde = log_sigmoid(f_pre);
            let m = (f_tilde + state.m[h]).max(i_tilde);
            let ip = (i_tilde - m).exp();
            let fp = (f_tilde + state.m[h] - m).exp();
            state.m[h] = m;

            let hs = t * d + h * hd;
            let q = &cache.q[hs..hs + hd];
            let k = &cache.k[hs..hs + hd];
            let v = &cache.v[hs..hs + hd];
            let c = &mut state.c[h * mem..(h + 1) * mem];
            for a in 0..hd {
                for b in 0..hd {
                    c[a * hd + b] = fp * c[a * hd + b] + ip * v[a] * k[b];
                }
            }
            let n = &mut state.n[h * hd..(h + 1) * hd];
            for b in 0..hd {
                n[b] = fp * n[b] + ip * k[b];
            }
            let s = dot(n, q);
            let floor = (-m).exp();
            let s_branch = s.abs() >= floor;
            let den = if s_branch { s.abs() } else { floor };
            for a in 0..hd {
                let num = dot(&c[a * hd..(a + 1) * hd], q);
                cache.num[hs + a] = num;
                cache.read[hs + a] = num / den;
                out[(t, h * hd + a)] = cache.o[hs + a] * num / den;
            }
            let hi = t * heads + h;
            cache.ip[hi] = ip;
            cache.fp[hi] = fp;
            cache.f_sig[hi] = sigmoid(f_pre);
            cache.s[hi] = s;
            cache.den[hi] = den;
            cache.s_branch[hi] = s_branch;
            cache.c[(t * heads + h) * mem..(t * heads + h + 1) * mem].copy_from_slice(c);
        }
        cache.n[row].copy_from_slice(&state.n);
    }
    let out = out.ensure_finite("mLSTM output")?;
    Ok((out, state, cache))
}

#[inline]
fn log_sigmoid<T: Scalar>(x: T) -> T {
    // −softplus(−x), stable for large |x|
    let z = -x;
    -(z.max(T::zero()) + (-z.abs()).exp().ln_1p())
}

/// Reverse pass; see [`super::slstm_backward`] for the contract.
pub(crate) fn mlstm_backward<T: Scalar>(
    dout: &Matrix<T>,
    x: &Matrix<T>,
    p: &MlstmParams<T>,
    cache: &MlstmCache<T>,
    grads: &mut MlstmParams<T>,
) -> Result<Matrix<T>> {
    let d = p.width();
    let heads = p.heads();
    let hd = d / heads;
    let mem = hd * hd;
    let len = x.rows();
    if dout.shape() != x.shape() || cache.q.len() != len * d || cache.ip.len() != len * heads {
        return Err(Error::StaleCache("mLSTM"));
    }
    let key_scale = T::from_f64(1.0 / (hd as f64).sqrt());
    let one = T::one();
    let mut dx = Matrix::zeros(len, d);
    let mut dc_next = vec![T::zero(); heads * mem];
    let mut dn_next = vec![T::zero(); d];
    let (mut dq, mut dk, mut dv, mut dpo) =
        (vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d], vec![T::zero(); d]);
    let mut dgate = vec![T::zero(); 2 * heads];
    let mut dc = vec![T::zero(); mem];
    let mut tmp = vec![T::zero(); d];

    for t in (0..len).rev() {
        for h in 0..heads {
            let hs = t * d + h * hd;
            let hi = t * heads + h;
            let q = &cache.q[hs..hs + hd];
            let k = &cache.k[hs..hs + hd];
            let v = &cache.v[hs..hs + hd];
            let o = &cache.o[hs..hs + hd];
            let num = &cache.num[hs..hs + hd];
            let read = &cache.read[hs..hs + hd];
            let (ip, fp, s, den) = (cache.ip[hi], cache.fp[hi], cache.s[hi], cache.den[hi]);
            let c = &cache.c[hi * mem..(hi + 1) * mem];
            let n = &cache.n[hs..hs + hd];
            let (c_prev, n_prev) = if t == 0 {
                (&cache.init.c[h * mem..(h + 1) * mem], &cache.init.n[h * hd..(h + 1) * hd])
            } else {
                let pi = (t - 1) * heads + h;
                let ps = (t - 1) * d + h * hd;
                (&cache.c[pi * mem..(pi + 1) * mem], &cache.n[ps..ps + hd])
            };

            let mut dden = T::zero();
            let mut dnum = vec![T::zero(); hd];
            for a in 0..hd {
                let g = dout[(t, h * hd + a)];
                dpo[h * hd + a] = g * read[a] * o[a] * (one - o[a]);
                let dread = g * o[a];
                dnum[a] = dread / den;
                dden = dden - dread * num[a] / (den * den);
            }
            let ds = if cache.s_branch[hi] {
                dden * s.signum()
            } else {
                T::zero()
            };

            // dC = dC_next + dnum ⊗ q
            dc.copy_from_slice(&dc_next[h * mem..(h + 1) * mem]);
            for a in 0..hd {
                for b in 0..hd {
                    dc[a * hd + b] = dc[a * hd + b] + dnum[a] * q[b];
                }
            }
            let mut dn: Vec<T> = (0..hd).map(|b| dn_next[h * hd + b] + ds * q[b]).collect();
            for b in 0..hd {
                let mut acc = ds * n[b];
                for a in 0..hd {
                    acc = acc + c[a * hd + b] * dnum[a];
                }
                dq[h * hd + b] = acc;
            }

            let mut dfp = dot(&dc, c_prev) + dot(&dn, n_prev);
            let mut dip = dot(&dn, k);
            for a in 0..hd {
                let dck = dot(&dc[a * hd..(a + 1) * hd], k);
                dip = dip + v[a] * dck;
                dv[h * hd + a] = ip * dck;
            }
            for b in 0..hd {
                let mut acc = dn[b];
                for a in 0..hd {
                    acc = acc + dc[a * hd + b] * v[a];
                }
                dk[h * hd + b] = ip * acc * key_scale;
            }
            dfp = dfp * fp * (one - cache.f_sig[hi]);
            dip = dip * ip;
            dgate[h] = dip;
            dgate[heads + h] = dfp;

            for (dst, &src) in dc_next[h * mem..(h + 1) * mem].iter_mut().zip(&dc) {
                *dst = src * fp;
            }
            for b in 0..hd {
                dn[b] = dn[b] * fp;
            }
            dn_next[h * hd..(h + 1) * hd].copy_from_slice(&dn);
        }

        let u = x.row(t);
        outer_acc(&mut grads.w_q, u, &dq);
        outer_acc(&mut grads.w_k, u, &dk);
        outer_acc(&mut grads.w_v, u, &dv);
        outer_acc(&mut grads.w_o, u, &dpo);
        outer_acc(&mut grads.w_gate, u, &dgate);
        for (g, &v) in grads.b_o.as_mut_slice().iter_mut().zip(&dpo) {
            *g = *g + v;
        }
        for (g, &v) in grads.b_gate.as_mut_slice().iter_mut().zip(&dgate) {
            *g = *g + v;
        }
        let dxr = dx.row_mut(t);
        for (w, g) in [
            (&p.w_q, &dq),
            (&p.w_k, &dk),
            (&p.w_v, &dv),
            (&p.w_o, &dpo),
        ] {
            vec_matmul_t(g, w, &mut tmp);
            for (a, &b) in dxr.iter_mut().zip(&tmp) {
                *a = *a + b;
            }
        }
        vec_matmul_t(&dgate, &p.w_gate, &mut tmp);
        for (a, &b) in dxr.iter_mut().zip(&tmp) {
            *a = *a + b;
        }
    }
    Ok(dx)
}
