//! Box-shaped parameter domains and rectangular lattices over them.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// A point in parameter space. Bounds come from the owning [`Domain`].
pub type ParamVector = DVector<f64>;

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Config("domain bounds must be non-empty and of equal length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l <= h)) {
            return Err(Error::Config("domain bounds must be finite with lo <= hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Cube `[lo, hi]^d`.
    pub fn cube(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta.iter().zip(self.lo.iter().zip(&self.hi)).all(|(t, (l, h))| *l <= *t && *t <= *h)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::Domain { point: theta.to_vec() })
        }
    }

    /// Coordinate-wise projection onto the box.
    pub fn clamp(&self, theta: &mut [f64]) {
        for ((t, l), h) in theta.iter_mut().zip(&self.lo).zip(&self.hi) {
            *t = t.max(*l).min(*h);
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| (h - l) * (h - l)).sum::<f64>().sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// True when `other` lies inside `self`.
    pub fn encloses(&self, other: &Domain) -> bool {
        self.dim() == other.dim() && self.contains(other.lo()) && self.contains(other.hi())
    }
}

/// Regular lattice of cells covering a domain; cells are indexed row-major
/// with the last axis varying fastest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Grid {
    domain: Domain,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(domain: Domain, resolution: Vec<usize>) -> Result<Self> {
        if resolution.len() != domain.dim() || resolution.iter().any(|&r| r == 0) {
            return Err(Error::Config("grid resolution must be positive on every axis".into()));
        }
        Ok(Self { domain, resolution })
    }

    pub fn uniform(domain: Domain, per_axis: usize) -> Result<Self> {
        let d = domain.dim();
        Self::new(domain, vec![per_axis; d])
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_widths(&self) -> Vec<f64> {
        (0..self.domain.dim())
            .map(|j| (self.domain.hi[j] - self.domain.lo[j]) / self.resolution[j] as f64)
            .collect()
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.resolution.len()];
        for j in (0..self.resolution.len()).rev() {
            idx[j] = flat % self.resolution[j];
            flat /= self.resolution[j];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.resolution).fold(0, |acc, (i, r)| acc * r + i)
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        let w = self.cell_widths();
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(j, &i)| self.domain.lo[j] + (i as f64 + 0.5) * w[j])
            .collect()
    }

    /// Cell containing `point`, if it lies in the domain.
    pub fn locate(&self, point: &[f64]) -> Option<usize> {
        if !self.domain.contains(point) {
            return None;
        }
        let w = self.cell_widths();
        let idx: Vec<usize> = point
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                let i = if w[j] > 0.0 { ((x - self.domain.lo[j]) / w[j]).floor() as usize } else { 0 };
                i.min(self.resolution[j] - 1)
            })
            .collect();
        Some(self.flat_index(&idx))
    }

    /// Neighbouring cell one step along `axis` in the positive direction.
    pub fn forward_neighbor(&self, flat: usize, axis: usize) -> Option<usize> {
        let mut idx = self.multi_index(flat);
        if idx[axis] + 1 >= self.resolution[axis] {
            return None;
        }
        idx[axis] += 1;
        Some(self.flat_index(&idx))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Domain::new(vec![1.0], vec![0.0]).is_err());
        assert!(Domain::new(vec![], vec![]).is_err());
    }

    #[test]
    fn clamp_projects_onto_box() {
        let d = Domain::new(vec![0.0, -1.0], vec![1.0, 1.0]).unwrap();
        let mut x = [2.0, -3.0];
        d.clamp(&mut x);
        assert_eq!(x, [1.0, -1.0]);
        assert!(d.contains(&x));
    }

    #[test]
    fn grid_index_round_trip_and_locate() {
        let d = Domain::new(vec![0.0, 0.0], vec![4.0, 2.0]).unwrap();
        let g = Grid::new(d, vec![4, 2]).unwrap();
        assert_eq!(g.len(), 8);
        for flat in 0..g.len() {
            assert_eq!(g.flat_index(&g.multi_index(flat)), flat);
            assert_eq!(g.locate(&g.cell_center(flat)), Some(flat));
        }
        assert_eq!(g.cell_center(0), vec![0.5, 0.5]);
        assert_eq!(g.locate(&[4.0, 2.0]), Some(7));
        assert_eq!(g.forward_neighbor(1, 1), None);
        assert_eq!(g.forward_neighbor(1, 0), Some(3));
    }
}
