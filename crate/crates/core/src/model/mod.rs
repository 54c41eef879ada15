//! Regressors, metrics, cross validation and significance testing.

pub mod ablation;
pub mod cv;
pub mod forest;
pub mod gbt;
pub mod linear;
mod matrix;
pub mod metrics;
pub mod stats;
pub mod suite;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ablation::{run_ablation, AblationParams, AblationReport, AblationRow, Direction, Folds};
pub use cv::{kfold_split, Fold};
pub use forest::{ForestParams, RandomForest};
pub use gbt::{GbtParams, GradientBoosting};
pub use linear::LinearRegression;
pub use matrix::Matrix;
pub use metrics::{evaluate, EvalResult};
pub use stats::{paired_t_test, Alternative, TTest};
pub use suite::{evaluate_suite, train_suite, EvalRow, Setting, TrainedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Forest,
    Boosted,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::Forest, ModelKind::Boosted];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "Linear",
            ModelKind::Forest => "Forest",
            ModelKind::Boosted => "Boosted",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParams(format!("unknown model `{s}`")))
    }
}

/// Hyperparameters for every model kind.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    pub forest: ForestParams,
    pub boosted: GbtParams,
}

/// A fitted model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Regressor {
    Linear(LinearRegression),
    Forest(RandomForest),
    Boosted(GradientBoosting),
}

impl Regressor {
    pub fn fit(kind: ModelKind, x: &Matrix, y: &[f64], params: &ModelParams) -> Result<Self> {
        Ok(match kind {
            ModelKind::Linear => Regressor::Linear(LinearRegression::fit(x, y)?),
            ModelKind::Forest => Regressor::Forest(RandomForest::fit(x, y, &params.forest)?),
            ModelKind::Boosted => Regressor::Boosted(GradientBoosting::fit(x, y, &params.boosted)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Regressor::Linear(_) => ModelKind::Linear,
            Regressor::Forest(_) => ModelKind::Forest,
            Regressor::Boosted(_) => ModelKind::Boosted,
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        match self {
            Regressor::Linear(m) => m.predict(x),
            Regressor::Forest(m) => m.predict(x),
            Regressor::Boosted(m) => m.predict(x),
        }
    }
}
