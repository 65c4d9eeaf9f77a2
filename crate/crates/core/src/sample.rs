use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Observations with one replicate per row and one named variable per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    values: DMatrix<f64>,
    names: Vec<String>,
}

impl SampleMatrix {
    pub fn new(values: DMatrix<f64>, names: Vec<String>) -> Result<Self> {
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidInput("sample matrix has no columns".into()));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, column {}",
                r + 1,
                c + 1
            )));
        }
        Ok(Self { values, names })
    }

    /// Columns named `X1..Xp`.
    pub fn with_default_names(values: DMatrix<f64>) -> Result<Self> {
        let names = default_names(values.ncols());
        Self::new(values, names)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// New matrix made of the given rows, in order (rows may repeat).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let p = self.ncols();
        let values = DMatrix::from_fn(rows.len(), p, |r, c| self.values[(rows[r], c)]);
        Self {
            values,
            names: self.names.clone(),
        }
    }

    /// New matrix with columns reordered by `perm` (output column j is input column perm[j]).
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        let values = DMatrix::from_fn(self.nrows(), perm.len(), |r, c| self.values[(r, perm[c])]);
        let names = perm.iter().map(|&j| self.names[j].clone()).collect();
        Self { values, names }
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|&v| v > 0.0)
    }
}

pub fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("X{j}")).collect()
}
