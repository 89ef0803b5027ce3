use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of encoded covariates with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "design matrix buffer has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        if names.len() != cols {
            return Err(Error::Data(format!(
                "design matrix has {cols} columns but {} names",
                names.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("design matrix contains non-finite values".into()));
        }
        Ok(Self { rows, cols, data, names })
    }

    /// Builds a matrix from row slices; names default to `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Data("ragged rows in design matrix".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        let names = (0..cols).map(|j| format!("x{j}")).collect();
        Self::new(rows.len(), cols, data, names)
    }

    /// A matrix with `rows` rows and no columns (intercept-only fits).
    pub fn empty(rows: usize) -> Self {
        Self { rows, cols: 0, data: Vec::new(), names: Vec::new() }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        DesignMatrix { rows: idx.len(), cols: self.cols, data, names: self.names.clone() }
    }

    pub fn select_columns(&self, cols: &[usize]) -> DesignMatrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&j| row[j]));
        }
        DesignMatrix {
            rows: self.rows,
            cols: cols.len(),
            data,
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_preserves_values() {
        let m = DesignMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = m.select_rows(&[1]);
        assert_eq!(r.row(0), &[4.0, 5.0, 6.0]);
        let c = m.select_columns(&[2, 0]);
        assert_eq!(c.row(1), &[6.0, 4.0]);
        assert_eq!(c.names(), &["x2".to_string(), "x0".to_string()]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(DesignMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }
}
