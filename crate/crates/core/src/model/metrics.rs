use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mae: f64,
    pub rmse: f64,
}

pub fn evaluate(pred: &[f64], truth: &[f64]) -> Result<EvalResult> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!("{} predictions vs {} targets", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = pred.len() as f64;
    let (abs, sq) = pred.iter().zip(truth).fold((0.0, 0.0), |(a, s), (p, t)| {
        let e = p - t;
        (a + e.abs(), s + e * e)
    });
    Ok(EvalResult { mae: abs / n, rmse: (sq / n).sqrt() })
}
