use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Matrix;

/// Ridge damping added to the diagonal of the standardized normal system.
pub const RIDGE_EPS: f64 = 1e-8;

/// Ordinary least squares with intercept.
///
/// Columns are centered and scaled to unit variance, the normal system
/// `(ZᵀZ/n + εI) γ = Zᵀ(y − ȳ)/n` is solved by Cholesky factorization, and
/// the coefficients are mapped back to the original units. Constant columns
/// get a zero coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRegression {
    pub intercept: f64,
    pub coef: Vec<f64>,
}

impl LinearRegression {
    pub fn fit(x: &Matrix, y: &[f64]) -> Result<Self> {
        let n = x.n_rows();
        let p = x.n_cols();
        if n != y.len() {
            return Err(Error::DimensionMismatch(format!("{n} rows vs {} targets", y.len())));
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let nf = n as f64;
        let y_mean = y.iter().sum::<f64>() / nf;
        let mean: Vec<f64> = (0..p).map(|j| x.column(j).sum::<f64>() / nf).collect();
        let scale: Vec<f64> = (0..p)
            .map(|j| {
                let var = x.column(j).map(|v| (v - mean[j]).powi(2)).sum::<f64>() / nf;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();

        let mut a = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut z = vec![0.0; p];
        for (i, row) in x.rows().enumerate() {
            for j in 0..p {
                z[j] = (row[j] - mean[j]) / scale[j];
            }
            let r = y[i] - y_mean;
            for j in 0..p {
                b[j] += z[j] * r;
                for k in 0..=j {
                    a[j * p + k] += z[j] * z[k];
                }
            }
        }
        for j in 0..p {
            b[j] /= nf;
            for k in 0..=j {
                a[j * p + k] /= nf;
                a[k * p + j] = a[j * p + k];
            }
            a[j * p + j] += RIDGE_EPS;
        }
        let gamma = cholesky_solve(&mut a, &mut b, p)?;
        let coef: Vec<f64> = gamma.iter().zip(&scale).map(|(g, s)| g / s).collect();
        let intercept = y_mean - coef.iter().zip(&mean).map(|(c, m)| c * m).sum::<f64>();
        Ok(Self { intercept, coef })
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.coef.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns vs {} coefficients",
                x.n_cols(),
                self.coef.len()
            )));
        }
        Ok(x.rows().map(|r| self.predict_row(r)).collect())
    }
}

/// Solves `A x = b` for symmetric positive definite `A` (row-major, `p × p`),
/// overwriting `a` with its Cholesky factor.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], p: usize) -> Result<Vec<f64>> {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if d.is_nan() || d <= 0.0 {
            return Err(Error::DegenerateTarget("normal system is not positive definite".into()));
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    // L y = b
    for i in 0..p {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * p + k] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    // Lᵀ x = y
    for i in (0..p).rev() {
        let mut s = b[i];
        for k in i + 1..p {
            s -= a[k * p + i] * b[k];
        }
        b[i] = s / a[i * p + i];
    }
    Ok(b.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let m = LinearRegression::fit(&Matrix::column_vector("x", &xs).unwrap(), &y).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-6);
        assert!((m.coef[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_target() {
        let x =
            Matrix::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 5.0], vec![2.0, 3.0], vec![7.0, 1.0]]).unwrap();
        let m = LinearRegression::fit(&x, &[5.0; 3]).unwrap();
        assert!((m.intercept - 5.0).abs() < 1e-9);
        assert!(m.coef.iter().all(|c| c.abs() < 1e-9));
    }

    #[test]
    fn constant_column_and_no_columns() {
        let x =
            Matrix::from_rows(vec!["a".into(), "k".into()], &[vec![1.0, 4.0], vec![2.0, 4.0], vec![3.0, 4.0]]).unwrap();
        let m = LinearRegression::fit(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert_eq!(m.coef[1], 0.0);
        assert!((m.coef[0] - 2.0).abs() < 1e-6);
        let empty = Matrix::new(vec![], 3, vec![]).unwrap();
        let m = LinearRegression::fit(&empty, &[1.0, 2.0, 6.0]).unwrap();
        assert_eq!(m.intercept, 3.0);
    }

    #[test]
    fn dimension_errors() {
        let x = Matrix::column_vector("x", &[1.0, 2.0]).unwrap();
        assert!(matches!(LinearRegression::fit(&x, &[1.0]), Err(Error::DimensionMismatch(_))));
        let m = LinearRegression::fit(&x, &[1.0, 2.0]).unwrap();
        let wide = Matrix::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 2.0]]).unwrap();
        assert!(m.predict(&wide).is_err());
    }
}
