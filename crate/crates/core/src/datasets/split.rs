use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// train : test : validation.
    pub ratios: [u32; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(ratios: [u32; 3], seed: u64) -> Result<Self> {
        if ratios.iter().all(|&r| r == 0) {
            return Err(Error::InvalidConfig("split ratios sum to zero".into()));
        }
        Ok(Self { ratios, seed })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub val: Vec<String>,
}

impl Split {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.test.len(), self.val.len())
    }
}

/// Largest-remainder apportionment of `n` items by integer `weights`.
/// Leftover items go to the largest fractional remainders, earlier parts
/// winning ties.
pub fn apportion(n: usize, weights: &[u32]) -> Vec<usize> {
    let total: u64 = weights.iter().map(|&w| w as u64).sum();
    if total == 0 {
        return vec![0; weights.len()];
    }
    // exact integer arithmetic: quota_i = n·w_i / total
    let mut sizes: Vec<usize> = weights.iter().map(|&w| (n as u64 * w as u64 / total) as usize).collect();
    let mut rema: Vec<(u64, usize)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (n as u64 * w as u64 % total, i))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let left = n - sizes.iter().sum::<usize>();
    for &(_, i) in rema.iter().take(left) {
        sizes[i] += 1;
    }
    sizes
}

/// Seeded shuffle of `ids`, then consecutive train/test/val runs.
pub fn split(ids: &[String], spec: &SplitSpec) -> Result<Split> {
    SplitSpec::new(spec.ratios, spec.seed)?;
    let mut order: Vec<String> = ids.to_vec();
    order.shuffle(&mut stream(spec.seed, Stream::Split));
    let sizes = apportion(order.len(), &spec.ratios);
    let val = order.split_off(sizes[0] + sizes[1]);
    let test = order.split_off(sizes[0]);
    Ok(Split { train: order, test, val })
}
