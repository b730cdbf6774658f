use super::mlstm::{mlstm_backward, mlstm_forward_cached, MlstmCache, MlstmParams, MlstmState};
use super::norm::{layer_norm_rows, layer_norm_rows_backward, NormCache};
use super::slstm::{slstm_backward, slstm_forward_cached, SlstmCache, SlstmParams, SlstmState};
use super::{BlockKind, BlockLayout};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, ParamSet, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub enum CellParams<T: Scalar = f32> {
    Mlstm(MlstmParams<T>),
    Slstm(SlstmParams<T>),
}

/// One residual block: `y = x + cell(LayerNorm(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T: Scalar = f32> {
    pub ln_gamma: Matrix<T>,
    pub ln_beta: Matrix<T>,
    pub cell: CellParams<T>,
}

impl<T: Scalar> BlockParams<T> {
    pub fn kind(&self) -> BlockKind {
        match self.cell {
            CellParams::Mlstm(_) => BlockKind::Mlstm,
            CellParams::Slstm(_) => BlockKind::Slstm,
        }
    }

    pub fn width(&self) -> usize {
        self.ln_gamma.cols()
    }

    pub fn zeros(kind: BlockKind, width: usize, heads: usize) -> Self {
        Self {
            ln_gamma: Matrix::zeros(1, width),
            ln_beta: Matrix::zeros(1, width),
            cell: match kind {
                BlockKind::Mlstm => CellParams::Mlstm(MlstmParams::zeros(width, heads)),
                BlockKind::Slstm => CellParams::Slstm(SlstmParams::zeros(width)),
            },
        }
    }

    pub fn count(kind: BlockKind, width: usize, heads: usize) -> usize {
        2 * width
            + match kind {
                BlockKind::Mlstm => MlstmParams::<f32>::count(width, heads),
                BlockKind::Slstm => SlstmParams::<f32>::count(width),
            }
    }

    fn forward_cached(&self, x: &Matrix<T>) -> Result<(Matrix<T>, BlockCache<T>)> {
        let d = self.width();
        if x.cols() != d {
            return Err(Error::Dimension {
                op: "block_forward",
                left: x.shape(),
                right: (x.rows(), d),
            });
        }
        let (normed, norm) =
            layer_norm_rows(x.as_slice(), d, self.ln_gamma.as_slice(), self.ln_beta.as_slice());
        let normed = Matrix::from_vec(x.rows(), d, normed)?;
        let (h, cell) = match &self.cell {
            CellParams::Mlstm(p) => {
                let (h, _, c) = mlstm_forward_cached(&normed, p, &MlstmState::zeros(d, p.heads()))?;
                (h, CellCache::Mlstm(c))
            }
            CellParams::Slstm(p) => {
                let (h, _, c) = slstm_forward_cached(&normed, p, &SlstmState::zeros(d))?;
                (h, CellCache::Slstm(c))
            }
        };
        let y = x.add(&h)?;
        Ok((y, BlockCache { normed, norm, cell }))
    }

    fn backward(
        &self,
        dy: &Matrix<T>,
        cache: &BlockCache<T>,
        grads: &mut BlockParams<T>,
    ) -> Result<Matrix<T>> {
        let d = self.width();
        let dnormed = match (&self.cell, &cache.cell, &mut grads.cell) {
            (CellParams::Mlstm(p), CellCache::Mlstm(c), CellParams::Mlstm(g)) => {
                mlstm_backward(dy, &cache.normed, p, c, g)?
            }
            (CellParams::Slstm(p), CellCache::Slstm(c), CellParams::Slstm(g)) => {
                slstm_backward(dy, &cache.normed, p, c, g)?
            }
            _ => return Err(Error::StaleCache("block kind changed since forward")),
        };
        let dx_norm = layer_norm_rows_backward(
            dnormed.as_slice(),
            d,
            self.ln_gamma.as_slice(),
            &cache.norm,
            grads.ln_gamma.as_mut_slice(),
            grads.ln_beta.as_mut_slice(),
        );
        let mut dx = dy.clone();
        dx.add_assign(&Matrix::from_vec(dy.rows(), d, dx_norm)?)?;
        Ok(dx)
    }
}

impl<T: Scalar> ParamSet<T> for BlockParams<T> {
    fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut v = vec![&self.ln_gamma, &self.ln_beta];
        match &self.cell {
            CellParams::Mlstm(p) => v.extend(p.tensors()),
            CellParams::Slstm(p) => v.extend(p.tensors()),
        }
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut v = vec![&mut self.ln_gamma, &mut self.ln_beta];
        match &mut self.cell {
            CellParams::Mlstm(p) => v.extend(p.tensors_mut()),
            CellParams::Slstm(p) => v.extend(p.tensors_mut()),
        }
        v
    }
    fn tensor_names(&self) -> Vec<String> {
        let mut v = vec!["ln_gamma".to_string(), "ln_beta".to_string()];
        match &self.cell {
            CellParams::Mlstm(p) => v.extend(p.tensor_names().into_iter().map(|n| format!("mlstm.{n}"))),
            CellParams::Slstm(p) => v.extend(p.tensor_names().into_iter().map(|n| format!("slstm.{n}"))),
        }
        v
    }
}

#[derive(Debug, Clone)]
enum CellCache<T: Scalar> {
    Mlstm(MlstmCache<T>),
    Slstm(SlstmCache<T>),
}

#[derive(Debug, Clone)]
struct BlockCache<T: Scalar> {
    normed: Matrix<T>,
    norm: NormCache<T>,
    cell: CellCache<T>,
}

/// Activations recorded by [`XlstmStack::forward_cached`].
#[derive(Debug, Clone)]
pub struct StackCache<T: Scalar = f32> {
    shape: (usize, usize),
    kinds: Vec<BlockKind>,
    blocks: Vec<BlockCache<T>>,
}

/// A stack of residual xLSTM blocks; the output of block l feeds block l+1.
#[derive(Debug, Clone, PartialEq)]
pub struct XlstmStack<T: Scalar = f32> {
    pub blocks: Vec<BlockParams<T>>,
}

impl<T: Scalar> XlstmStack<T> {
    /// Fan-based cell weights, unit norm scale, zero shifts and biases.
    pub fn init(layout: &BlockLayout, width: usize, heads: usize, seed: u64) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidConfig("hidden width must be ≥ 1".into()));
        }
        let blocks = layout
            .kinds()
            .iter()
            .enumerate()
            .map(|(l, &kind)| {
                let base = 1000 + 100 * l as u32;
                let cell = match kind {
                    BlockKind::Mlstm => CellParams::Mlstm(MlstmParams::init(width, heads, seed, base)?),
                    BlockKind::Slstm => CellParams::Slstm(SlstmParams::init(width, seed, base)?),
                };
                Ok(BlockParams {
                    ln_gamma: Matrix::filled(1, width, T::one()),
                    ln_beta: Matrix::zeros(1, width),
                    cell,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { blocks })
    }

    pub fn zeros(layout: &BlockLayout, width: usize, heads: usize) -> Self {
        Self {
            blocks: layout
                .kinds()
                .iter()
                .map(|&k| BlockParams::zeros(k, width, heads))
                .collect(),
        }
    }

    pub fn layout(&self) -> BlockLayout {
        BlockLayout::new(self.blocks.iter().map(BlockParams::kind).collect())
    }

    pub fn forward(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        Ok(self.forward_cached(x)?.0)
    }

    pub fn forward_cached(&self, x: &Matrix<T>) -> Result<(Matrix<T>, StackCache<T>)> {
        if self.blocks.is_empty() {
            return Err(Error::Empty("xLSTM layout"));
        }
        if x.rows() == 0 {
            return Err(Error::Empty("input sequence"));
        }
        let mut h = x.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let (next, cache) = block.forward_cached(&h)?;
            caches.push(cache);
            h = next;
        }
        Ok((
            h,
            StackCache {
                shape: x.shape(),
                kinds: self.blocks.iter().map(BlockParams::kind).collect(),
                blocks: caches,
            },
        ))
    }

    /// Gradient of a scalar loss with respect to the stack input and every
    /// block parameter, given `∂loss/∂output`.
    pub fn backward(&self, grad_out: &Matrix<T>, cache: &StackCache<T>) -> Result<(Matrix<T>, Self)> {
        let kinds: Vec<BlockKind> = self.blocks.iter().map(BlockParams::kind).collect();
        if cache.kinds != kinds || cache.shape != grad_out.shape() {
            return Err(Error::StaleCache("xLSTM stack"));
        }
        let mut grads = self.zeros_like();
        let mut g = grad_out.clone();
        for ((block, bc), gb) in self
            .blocks
            .iter()
            .zip(&cache.blocks)
            .zip(grads.blocks.iter_mut())
            .rev()
        {
            g = block.backward(&g, bc, gb)?;
        }
        Ok((g, grads))
    }
}

impl<T: Scalar> ParamSet<T> for XlstmStack<T> {
    fn tensors(&self) -> Vec<&Matrix<T>> {
        self.blocks.iter().flat_map(|b| b.tensors()).collect()
    }
    fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        self.blocks.iter_mut().flat_map(|b| b.tensors_mut()).collect()
    }
    fn tensor_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .enumerate()
            .flat_map(|(l, b)| b.tensor_names().into_iter().map(move |n| format!("block{l}.{n}")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, init_params, relative_error, InitScheme};

    fn input(len: usize, d: usize, seed: u64) -> Matrix<f64> {
        init_params(len, d, InitScheme::Uniform { bound: 1.0 }, seed).unwrap()
    }

    fn perturb(stack: &mut XlstmStack<f64>, seed: u64) {
        // nonzero shifts and biases so their gradients are exercised
        let flat = stack.flatten();
        let noise: Matrix<f64> = init_params(1, flat.len(), InitScheme::Uniform { bound: 0.1 }, seed).unwrap();
        let mixed: Vec<f64> = flat.iter().zip(noise.as_slice()).map(|(a, b)| a + b).collect();
        stack.load_flat(&mixed).unwrap();
    }

    #[test]
    fn single_block_matches_wrapper() {
        let d = 4;
        let layout: BlockLayout = "s".parse().unwrap();
        let stack = XlstmStack::<f64>::init(&layout, d, 1, 5).unwrap();
        let x = input(6, d, 1);
        let got = stack.forward(&x).unwrap();
        let (normed, _) = layer_norm_rows(x.as_slice(), d, stack.blocks[0].ln_gamma.as_slice(), stack.blocks[0].ln_beta.as_slice());
        let CellParams::Slstm(p) = &stack.blocks[0].cell else { unreachable!() };
        let (h, _) = super::super::slstm_forward(&Matrix::from_vec(6, d, normed).unwrap(), p, &SlstmState::zeros(d)).unwrap();
        assert_eq!(got, x.add(&h).unwrap());
    }

    #[test]
    fn zero_blocks_are_identity() {
        let x = input(7, 5, 2);
        let stack = XlstmStack::<f64>::zeros(&BlockLayout::default(), 5, 1);
        assert_eq!(stack.forward(&x).unwrap(), x);
    }

    #[test]
    fn empty_layout_is_an_error() {
        let stack = XlstmStack::<f32>::zeros(&BlockLayout::new(vec![]), 3, 1);
        assert!(matches!(stack.forward(&Matrix::zeros(2, 3)), Err(Error::Empty(_))));
    }

    #[test]
    fn stale_cache_detected() {
        let layout = BlockLayout::default();
        let stack = XlstmStack::<f64>::init(&layout, 4, 1, 1).unwrap();
        let (_, cache) = stack.forward_cached(&input(3, 4, 0)).unwrap();
        assert!(matches!(
            stack.backward(&Matrix::zeros(5, 4), &cache),
            Err(Error::StaleCache(_))
        ));
        let other = XlstmStack::<f64>::init(&"m,m,m,m".parse().unwrap(), 4, 1, 1).unwrap();
        assert!(other.backward(&Matrix::zeros(3, 4), &cache).is_err());
    }

    #[test]
    fn default_layout_gradient_check() {
        let (len, d) = (6, 4);
        let layout = BlockLayout::default();
        let mut stack = XlstmStack::<f64>::init(&layout, d, 2, 11).unwrap();
        perturb(&mut stack, 12);
        let x = input(len, d, 13);
        // weighted sum so every output position matters differently
        let weights = input(len, d, 14);
        let loss = |s: &XlstmStack<f64>, x: &Matrix<f64>| -> f64 {
            s.forward(x).unwrap().as_slice().iter().zip(weights.as_slice()).map(|(a, b)| a * b).sum()
        };

        let (_, cache) = stack.forward_cached(&x).unwrap();
        let (dx, grads) = stack.backward(&weights, &cache).unwrap();

        let numeric = finite_diff_grad(
            |v| {
                let mut s = stack.clone();
                s.load_flat(v).unwrap();
                loss(&s, &x)
            },
            &stack.flatten(),
            1e-5,
        )
        .unwrap();
        let names: Vec<String> = stack
            .tensor_names()
            .into_iter()
            .zip(stack.tensors())
            .flat_map(|(n, t)| std::iter::repeat_n(n, t.len()))
            .collect();
        for ((a, n), name) in grads.flatten().iter().zip(&numeric).zip(&names) {
            assert!(relative_error(*a, *n) < 1e-4, "{name}: {a} vs {n}");
        }
        let numeric_x = finite_diff_grad(
            |v| loss(&stack, &Matrix::from_vec(len, d, v.to_vec()).unwrap()),
            x.as_slice(),
            1e-5,
        )
        .unwrap();
        for (a, n) in dx.as_slice().iter().zip(&numeric_x) {
            assert!(relative_error(*a, *n) < 1e-4, "input: {a} vs {n}");
        }
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        let stack = XlstmStack::<f64>::init(&BlockLayout::default(), 3, 1, 3).unwrap();
        let x = input(4, 3, 4);
        let (_, cache) = stack.forward_cached(&x).unwrap();
        let g1 = input(4, 3, 5);
        let g2 = input(4, 3, 6);
        let (d1, p1) = stack.backward(&g1, &cache).unwrap();
        let (d2, p2) = stack.backward(&g2, &cache).unwrap();
        let (d12, p12) = stack.backward(&g1.add(&g2).unwrap(), &cache).unwrap();
        assert!(d12.max_abs_diff(&d1.add(&d2).unwrap()).unwrap() < 1e-12);
        let mut sum = p1.clone();
        sum.accumulate(&p2).unwrap();
        for (a, b) in sum.flatten().iter().zip(p12.flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
