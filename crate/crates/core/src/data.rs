use nalgebra::DMatrix;

use crate::error::{MercatError, Result};

/// Samples in rows, features in columns, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
    labels: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 3 {
            return Err(MercatError::BadDims(format!(
                "need at least 3 samples, got {n}"
            )));
        }
        if d < 1 {
            return Err(MercatError::BadDims("need at least 1 feature".into()));
        }
        if values.len() != n * d {
            return Err(MercatError::BadDims(format!(
                "{} values do not fill a {n}x{d} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(MercatError::InvalidInput(format!(
                "non-finite entry at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            values,
            n,
            d,
            labels: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(MercatError::BadDims(format!(
                "row {i} has {} columns, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), rows.len(), d)
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Result<Self> {
        let (n, d) = m.shape();
        let mut values = Vec::with_capacity(n * d);
        for i in 0..n {
            values.extend(m.row(i).iter());
        }
        Self::new(values, n, d)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(MercatError::BadDims(format!(
                "{} labels for {} rows",
                labels.len(),
                self.n
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.d, &self.values)
    }

    /// Copy with feature columns reordered by `perm`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(MercatError::BadDims(
                "permutation length must equal d".into(),
            ));
        }
        let values = self
            .rows()
            .flat_map(|row| perm.iter().map(move |&c| row[c]))
            .collect();
        let mut out = Self::new(values, self.n, self.d)?;
        out.labels = self.labels.clone();
        Ok(out)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
