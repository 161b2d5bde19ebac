use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Immutable sample of `n` observations in `R^p`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::Config("dataset needs n >= 1 observations of a common positive dimension".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("dataset contains non-finite values".into()));
        }
        Ok(Self { dim, values })
    }

    pub fn from_scalars(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != dim) {
            return Err(Error::Config("observations have differing dimensions".into()));
        }
        Self::new(dim, rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect())
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.dim)
    }

    /// Draw `n` observations with replacement.
    pub fn resample<R: Rng + ?Sized>(&self, rng: &mut R) -> Dataset {
        let n = self.n();
        let mut values = Vec::with_capacity(self.values.len());
        for _ in 0..n {
            values.extend_from_slice(self.row(rng.random_range(0..n)));
        }
        Dataset { dim: self.dim, values }
    }

    pub fn select(&self, indices: &[usize]) -> Result<Dataset> {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset::new(self.dim, values)
    }

    /// Pooled sample: `self` followed by `other`.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::Config("cannot pool datasets of different dimension".into()));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Dataset { dim: self.dim, values })
    }

    pub fn translate(&self, shift: &[f64]) -> Dataset {
        let values = self.values.chunks_exact(self.dim).flat_map(|r| r.iter().zip(shift).map(|(x, s)| x + s)).collect();
        Dataset { dim: self.dim, values }
    }

    pub fn scale(&self, factor: f64) -> Dataset {
        Dataset { dim: self.dim, values: self.values.iter().map(|x| x * factor).collect() }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.dim).map(|j| self.rows().map(|r| r[j]).sum::<f64>() / n).collect()
    }

    /// Sample covariance with divisor `n - 1` (zero when `n == 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.n();
        let mean = self.mean();
        let mut cov = DMatrix::zeros(self.dim, self.dim);
        if n < 2 {
            return cov;
        }
        for r in self.rows() {
            for a in 0..self.dim {
                for b in 0..self.dim {
                    cov[(a, b)] += (r[a] - mean[a]) * (r[b] - mean[b]);
                }
            }
        }
        cov / (n as f64 - 1.0)
    }

    pub fn sd(&self) -> Vec<f64> {
        let cov = self.covariance();
        (0..self.dim).map(|j| cov[(j, j)].sqrt()).collect()
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.row(0).to_vec();
        let mut hi = lo.clone();
        for r in self.rows() {
            for j in 0..self.dim {
                lo[j] = lo[j].min(r[j]);
                hi[j] = hi[j].max(r[j]);
            }
        }
        (lo, hi)
    }
}
