//! Bagged regression trees with per-node feature subsampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tree::{self, FeatureBins, RegressionTree, TreeParams, DEFAULT_MAX_BINS};
use crate::model::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per node. `None` means a third of the non-constant
    /// columns, rounded up.
    pub mtry: Option<usize>,
    pub bootstrap: bool,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 2,
            mtry: None,
            bootstrap: true,
            max_bins: DEFAULT_MAX_BINS,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParams("n_trees must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParams("min_leaf must be positive".into()));
        }
        if self.mtry == Some(0) {
            return Err(Error::InvalidParams("mtry must be positive".into()));
        }
        if self.max_bins < 2 {
            return Err(Error::InvalidParams("max_bins must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    n_features: usize,
    trees: Vec<RegressionTree>,
}

impl RandomForest {
    /// Fits the forest. Each tree draws from its own stream derived from
    /// `params.seed`, and rows are put in a canonical order first, so the
    /// result depends on neither the thread count nor the input row order.
    pub fn fit(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<Self> {
        params.validate()?;
        if x.n_rows() != y.len() {
            return Err(Error::LengthMismatch(x.n_rows(), y.len()));
        }
        if y.is_empty() {
            return Err(Error::DegenerateTarget("no training samples".into()));
        }
        let perm = tree::canonical_order(x, y);
        let xc = x.select_rows(&perm);
        let yc: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let bins = FeatureBins::fit(&xc, params.max_bins);
        let binned = bins.bin_matrix(&xc);
        let candidates = tree::splittable_columns(&bins);
        let k = candidates.len();
        let mtry = params.mtry.unwrap_or(k.div_ceil(3)).clamp(1, k.max(1));
        let tp = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, mtry };
        let n = yc.len();
        let trees = (0..params.n_trees as u64)
            .into_par_iter()
            .map(|t| {
                let mut rng: ChaCha8Rng = seed::rng(params.seed, &[t]);
                let sample: Vec<usize> =
                    if params.bootstrap { (0..n).map(|_| rng.random_range(0..n)).collect() } else { (0..n).collect() };
                tree::grow(&binned, &bins, &yc, sample, &candidates, tp, Some(&mut rng))
            })
            .collect();
        Ok(Self { n_features: x.n_cols(), trees })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let s: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        s / self.trees.len() as f64
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "forest expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 20) as f64, (i / 20) as f64, 1.0]).collect();
        let y = rows.iter().map(|r| if r[0] < 10.0 { 1.0 } else { 5.0 } + 0.1 * r[1]).collect();
        (Matrix::from_rows(vec!["a".into(), "b".into(), "c".into()], &rows).unwrap(), y)
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = toy();
        let p = ForestParams { n_trees: 10, seed: 3, ..Default::default() };
        assert_eq!(RandomForest::fit(&x, &y, &p).unwrap(), RandomForest::fit(&x, &y, &p).unwrap());
    }

    #[test]
    fn learns_a_step() {
        let (x, y) = toy();
        let f = RandomForest::fit(&x, &y, &ForestParams { n_trees: 20, ..Default::default() }).unwrap();
        assert!((f.predict_row(&[2.0, 0.0, 1.0]) - 1.0).abs() < 0.3);
        assert!((f.predict_row(&[15.0, 0.0, 1.0]) - 5.0).abs() < 0.3);
    }

    #[test]
    fn rejects_bad_params() {
        let (x, y) = toy();
        let p = ForestParams { n_trees: 0, ..Default::default() };
        assert!(matches!(RandomForest::fit(&x, &y, &p), Err(Error::InvalidParams(_))));
    }
}
