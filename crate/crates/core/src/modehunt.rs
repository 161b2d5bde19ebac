//! Gaussian kernel density estimation, meanshift, and the bootstrap mode
//! ball.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;

use crate::boot::order_statistic;
use crate::data::Dataset;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::model::{Objective, SurfaceKind};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    data: Dataset,
    h: f64,
    domain: Domain,
}

impl Kde {
    pub fn new(data: Dataset, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config("bandwidth must be positive".into()));
        }
        let (lo, hi) = data.bounding_box();
        let domain = Domain::new(lo.iter().map(|l| l - 3.0 * h).collect(), hi.iter().map(|u| u + 3.0 * h).collect())?;
        Ok(Self { data, h, domain })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    /// Bounding box of the data inflated by `3h`.
    pub fn support(&self) -> &Domain {
        &self.domain
    }

    fn sq_dist(&self, i: usize, x: &[f64]) -> f64 {
        self.data.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// `p_h(x) = (1 / n h^d) sum K(||X_i - x|| / h)`.
    pub fn density(&self, x: &[f64]) -> f64 {
        let d = self.data.dim() as f64;
        let h2 = self.h * self.h;
        let s: f64 = (0..self.data.n()).map(|i| (-0.5 * self.sq_dist(i, x) / h2).exp()).sum();
        s / (self.data.n() as f64 * self.h.powf(d) * (2.0 * PI).powf(0.5 * d))
    }

    /// Kernel-weighted mean of the data at `x`.
    pub fn meanshift_step(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h2 = self.h * self.h;
        let mut num = vec![0.0; self.data.dim()];
        let mut den = 0.0;
        for (i, row) in self.data.rows().enumerate() {
            let w = (-0.5 * self.sq_dist(i, x) / h2).exp();
            den += w;
            num.iter_mut().zip(row).for_each(|(a, r)| *a += w * r);
        }
        if !(den > 1e-300) {
            return Err(Error::Isolation);
        }
        Ok(num.into_iter().map(|a| a / den).collect())
    }
}

impl Objective for Kde {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::Kde
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.density(theta))
    }

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let v = self.density(theta);
        let shifted = self.meanshift_step(theta)?;
        let g = DVector::from_iterator(theta.len(), shifted.iter().zip(theta).map(|(m, x)| v * (m - x) / (self.h * self.h)));
        Ok((v, g))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeEstimate {
    pub location: Vec<f64>,
    pub kde_value: f64,
    pub iterations: usize,
}

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Meanshift iterates from `start`, including the start itself.
pub fn meanshift_trajectory(kde: &Kde, start: &[f64], tol: f64, max_iter: usize) -> Result<Vec<Vec<f64>>> {
    if !kde.support().contains(start) {
        return Err(Error::Domain { point: start.to_vec() });
    }
    let mut path = vec![start.to_vec()];
    let mut x = start.to_vec();
    for _ in 0..max_iter {
        let next = kde.meanshift_step(&x)?;
        let shift = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = next;
        path.push(x.clone());
        if shift <= tol {
            break;
        }
    }
    Ok(path)
}

/// Iterates meanshift until the step is at most `tol`.
pub fn meanshift_run(kde: &Kde, start: &[f64], tol: f64, max_iter: usize) -> Result<ModeEstimate> {
    if !kde.support().contains(start) {
        return Err(Error::Domain { point: start.to_vec() });
    }
    let mut x = start.to_vec();
    let mut iterations = 0;
    while iterations < max_iter {
        let next = kde.meanshift_step(&x)?;
        let shift = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        if shift <= tol {
            break;
        }
        x = next;
        iterations += 1;
    }
    Ok(ModeEstimate { kde_value: kde.density(&x), location: x, iterations })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeSearch {
    pub best: ModeEstimate,
    /// Data index of each of the `n` resampled starts.
    pub start_indices: Vec<usize>,
    pub isolated: usize,
}

/// Meanshift from `n` starts drawn with replacement from the data; the
/// convergent with the highest density wins (ties to the earliest draw).
pub fn mode_estimate(data: &Dataset, h: f64, seed: u64) -> Result<ModeSearch> {
    use rand::Rng as _;
    let kde = Kde::new(data.clone(), h)?;
    let mut rng = rng::stream(seed, 0);
    let start_indices: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..data.n())).collect();
    // Repeated draws of one observation share a trajectory.
    let mut cache: Vec<Option<Result<ModeEstimate>>> = vec![None; data.n()];
    let mut best: Option<ModeEstimate> = None;
    let mut isolated = 0;
    for &i in &start_indices {
        let run = cache[i].get_or_insert_with(|| meanshift_run(&kde, data.row(i), DEFAULT_TOL, DEFAULT_MAX_ITER));
        match run {
            Ok(m) => {
                if best.as_ref().is_none_or(|b| m.kde_value > b.kde_value) {
                    best = Some(m.clone());
                }
            }
            Err(_) => isolated += 1,
        }
    }
    let best = best.ok_or(Error::Isolation)?;
    Ok(ModeSearch { best, start_indices, isolated })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub level: f64,
    /// Sorted replicate distances to the center.
    pub distances: Vec<f64>,
    pub b: usize,
    pub dropped: usize,
}

impl ModeBall {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.center.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= self.radius
    }
}

/// Bootstrap ball around the mode: replicate `b` resamples the data (stream
/// `b` of a child seed), runs meanshift on its KDE from the original mode,
/// and records the distance; the radius is the `ceil((1 - alpha) B)`-th
/// smallest distance.
pub fn mode_bootstrap_ci(data: &Dataset, h: f64, b: usize, alpha: f64, seed: u64) -> Result<ModeBall> {
    if b == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config("mode bootstrap needs B >= 1 and 0 < alpha < 1".into()));
    }
    let center = mode_estimate(data, h, rng::derive_seed(seed, 0))?.best.location;
    let replicate_seed = rng::derive_seed(seed, 1);
    let mut distances = Vec::with_capacity(b);
    for i in 0..b {
        let resampled = data.resample(&mut rng::stream(replicate_seed, i as u64));
        let kde = Kde::new(resampled, h)?;
        let start = center.clone();
        if let Ok(m) = meanshift_run(&kde, &start, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            distances.push(m.location.iter().zip(&center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>().sqrt());
        }
    }
    let dropped = b - distances.len();
    if distances.is_empty() || dropped as f64 > crate::boot::MAX_DROP_RATE * b as f64 {
        return Err(Error::Bootstrap { dropped, total: b });
    }
    distances.sort_by(f64::total_cmp);
    let radius = order_statistic(&distances, 1.0 - alpha);
    Ok(ModeBall { center, radius, level: 1.0 - alpha, distances, b, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum BandwidthRule {
    /// `1.06 sd n^(-1/(d + 5.5))`.
    Undersmooth,
    /// `1.06 sd n^(-1/(d + 4))`.
    Reference,
}

/// Bandwidth from the data's spread (mean of the per-coordinate sample sds).
pub fn bandwidth_rule(data: &Dataset, rule: BandwidthRule) -> Result<f64> {
    if data.n() < 2 {
        return Err(Error::Config("bandwidth rule needs n >= 2".into()));
    }
    let d = data.dim() as f64;
    let sd = data.sd().iter().sum::<f64>() / d;
    if !(sd > 0.0) {
        return Err(Error::DegenerateData("zero sample spread".into()));
    }
    let exponent = match rule {
        BandwidthRule::Undersmooth => -1.0 / (d + 5.5),
        BandwidthRule::Reference => -1.0 / (d + 4.0),
    };
    Ok(1.06 * sd * (data.n() as f64).powf(exponent))
}
