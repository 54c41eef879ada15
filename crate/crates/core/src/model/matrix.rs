use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    names: Vec<String>,
    n_rows: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(names: Vec<String>, n_rows: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_rows * names.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} rows x {} columns",
                data.len(),
                n_rows,
                names.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::DimensionMismatch(format!("duplicate column name `{dup}`")));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("matrix values must be finite".into()));
        }
        Ok(Self { names, n_rows, data })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let p = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch(format!("row of length {} for {p} columns", r.len())));
        }
        Self::new(names, rows.len(), rows.concat())
    }

    /// Single-column matrix, mostly for tests.
    pub fn column_vector(name: &str, values: &[f64]) -> Result<Self> {
        Self::new(vec![name.to_owned()], values.len(), values.to_vec())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.get(i, j))
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix { names: self.names.clone(), n_rows: idx.len(), data }
    }

    /// Keeps the columns whose name satisfies `keep`, in order.
    pub fn filter_columns<F: Fn(&str) -> bool>(&self, keep: F) -> Matrix {
        let cols: Vec<usize> = (0..self.n_cols()).filter(|&j| keep(&self.names[j])).collect();
        let mut data = Vec::with_capacity(cols.len() * self.n_rows);
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        Matrix { names: cols.iter().map(|&j| self.names[j].clone()).collect(), n_rows: self.n_rows, data }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(Matrix::new(vec!["a".into()], 2, vec![1.0]).is_err());
        assert!(Matrix::new(vec!["a".into(), "a".into()], 1, vec![1.0, 2.0]).is_err());
        assert!(Matrix::new(vec!["a".into()], 1, vec![f64::NAN]).is_err());
        let m = Matrix::from_rows(vec!["a".into(), "b".into()], &[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.select_rows(&[1, 1]).row(0), &[3.0, 4.0]);
        let b = m.filter_columns(|n| n == "b");
        assert_eq!(b.names(), ["b"]);
        assert_eq!(b.column(0).collect::<Vec<_>>(), vec![2.0, 4.0]);
    }
}
