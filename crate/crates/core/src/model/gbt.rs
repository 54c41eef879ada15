//! Gradient boosting with squared loss and shallow trees.

use rand::seq::index;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tree::{self, FeatureBins, RegressionTree, TreeParams, DEFAULT_MAX_BINS};
use crate::model::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Fraction of rows drawn without replacement for each round.
    pub subsample: f64,
    pub max_bins: usize,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 5,
            subsample: 1.0,
            max_bins: DEFAULT_MAX_BINS,
            seed: 0,
        }
    }
}

impl GbtParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::InvalidParams("learning_rate must be finite and nonnegative".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::InvalidParams("subsample must lie in (0, 1]".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParams("min_leaf must be positive".into()));
        }
        if self.max_bins < 2 {
            return Err(Error::InvalidParams("max_bins must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    n_features: usize,
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
}

fn mse(y: &[f64], f: &[f64]) -> f64 {
    y.iter().zip(f).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<Self> {
        Self::fit_traced(x, y, params).map(|(m, _)| m)
    }

    /// Also returns the training mean squared error before the first round
    /// and after every round.
    pub fn fit_traced(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        if x.n_rows() != y.len() {
            return Err(Error::LengthMismatch(x.n_rows(), y.len()));
        }
        if y.is_empty() {
            return Err(Error::EmptyInput);
        }
        let perm = tree::canonical_order(x, y);
        let xc = x.select_rows(&perm);
        let yc: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let n = yc.len();
        let base = yc.iter().sum::<f64>() / n as f64;
        let bins = FeatureBins::fit(&xc, params.max_bins);
        let binned = bins.bin_matrix(&xc);
        let candidates = tree::splittable_columns(&bins);
        let tp = TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, mtry: usize::MAX };
        let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);

        let mut f = vec![base; n];
        let mut trace = vec![mse(&yc, &f)];
        let mut trees = Vec::with_capacity(params.rounds);
        let mut residual = vec![0.0; n];
        for r in 0..params.rounds {
            for i in 0..n {
                residual[i] = yc[i] - f[i];
            }
            let sample: Vec<usize> = if m == n {
                (0..n).collect()
            } else {
                let mut rng: ChaCha8Rng = seed::rng(params.seed, &[r as u64]);
                let mut s = index::sample(&mut rng, n, m).into_vec();
                s.sort_unstable();
                s
            };
            let t = tree::grow::<ChaCha8Rng>(&binned, &bins, &residual, sample, &candidates, tp, None);
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += params.learning_rate * t.predict_row(xc.row(i));
            }
            trace.push(mse(&yc, &f));
            trees.push(t);
        }
        let model = Self { n_features: x.n_cols(), base, learning_rate: params.learning_rate, trees };
        Ok((model, trace))
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().fold(self.base, |acc, t| acc + self.learning_rate * t.predict_row(row))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features {
            return Err(Error::DimensionMismatch(format!(
                "boosted model expects {} features, got {}",
                self.n_features,
                x.n_cols()
            )));
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}
