use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

/// Seeded k-fold partition of `0..n`. The first `n % k` folds hold one extra
/// index. Index lists inside each fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::InvalidParams(format!("k must be at least 2, got {k}")));
    }
    if n < k {
        return Err(Error::TooFewSamples { needed: k, got: n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(seed, &[0x6b_666f_6c64]));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let mut valid = perm[start..start + size].to_vec();
        valid.sort_unstable();
        let mut in_valid = vec![false; n];
        for &i in &valid {
            in_valid[i] = true;
        }
        let train = (0..n).filter(|&i| !in_valid[i]).collect();
        folds.push(Fold { train, valid });
        start += size;
    }
    Ok(folds)
}
