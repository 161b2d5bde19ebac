use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Model;
use crate::domain::Domain;
use crate::error::{Error, Result};

/// Largest component count supported by [`MixtureFit`].
pub const MAX_COMPONENTS: usize = 8;

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// One-dimensional Gaussian mixture used as a data-generating truth.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
            return Err(Error::Config("mixture needs matching non-empty weights, means and sds".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Config("mixture weights must be non-negative and sum to 1".into()));
        }
        if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
            return Err(Error::Config("mixture means must be finite and sds positive".into()));
        }
        Ok(Self { weights, means, sds })
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![sd])
    }

    /// `0.5 N(0, 0.2^2) + 0.45 N(0.75, 0.2^2) + 0.05 N(3, 0.2^2)`.
    pub fn figure1() -> Self {
        Self { weights: vec![0.5, 0.45, 0.05], means: vec![0.0, 0.75, 3.0], sds: vec![0.2; 3] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn density(&self, x: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.means)
            .zip(&self.sds)
            .map(|((w, m), s)| w * log_normal_pdf(x, *m, *s).exp())
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.means).map(|(w, m)| w * m).sum()
    }

    /// Interval outside which every component has negligible mass (beyond
    /// `width` standard deviations).
    pub fn support(&self, width: f64) -> (f64, f64) {
        let lo = self.means.iter().zip(&self.sds).map(|(m, s)| m - width * s).fold(f64::INFINITY, f64::min);
        let hi = self.means.iter().zip(&self.sds).map(|(m, s)| m + width * s).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.weights.len() - 1;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = j;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        self.means[k] + self.sds[k] * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum MeanSpec {
    Pinned(f64),
    Free,
}

/// Gaussian mixture model with a common known standard deviation.
///
/// Parameter layout: the free component means in component order, then
/// (when weights are free) `w_2, ..., w_k` with `w_1 = 1 - sum w_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFit {
    sigma: f64,
    means: Vec<MeanSpec>,
    fixed_weights: Option<Vec<f64>>,
    domain: Domain,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Unpacked {
    pub k: usize,
    pub means: [f64; MAX_COMPONENTS],
    pub weights: [f64; MAX_COMPONENTS],
}

impl MixtureFit {
    pub fn new(sigma: f64, means: Vec<MeanSpec>, fixed_weights: Option<Vec<f64>>, domain: Domain) -> Result<Self> {
        let k = means.len();
        if k == 0 || k > MAX_COMPONENTS {
            return Err(Error::Config("mixture fit needs between 1 and 8 components".into()));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Config("mixture sigma must be positive".into()));
        }
        if let Some(w) = &fixed_weights {
            if w.len() != k || w.iter().any(|w| !(*w > 0.0)) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(Error::Config("fixed weights must be positive and sum to 1".into()));
            }
        }
        let free_means = means.iter().filter(|m| matches!(m, MeanSpec::Free)).count();
        let dim = free_means + if fixed_weights.is_none() { k - 1 } else { 0 };
        if dim == 0 || domain.dim() != dim {
            return Err(Error::Config("domain dimension does not match the free parameters".into()));
        }
        Ok(Self { sigma, means, fixed_weights, domain })
    }

    /// Two-component fit: first mean pinned at 0, common sd 0.2, free
    /// `(mu2, rho)` with `rho` the weight of the second component.
    pub fn figure1() -> Self {
        let domain = Domain::new(vec![-1.0, 0.005], vec![5.0, 0.995]).expect("static domain");
        Self::new(0.2, vec![MeanSpec::Pinned(0.0), MeanSpec::Free], None, domain).expect("static model")
    }

    pub fn with_domain(mut self, domain: Domain) -> Result<Self> {
        if domain.dim() != self.domain.dim() {
            return Err(Error::Config("domain dimension does not match the free parameters".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn mean_specs(&self) -> &[MeanSpec] {
        &self.means
    }

    pub fn weights_free(&self) -> bool {
        self.fixed_weights.is_none()
    }

    pub(crate) fn unpack(&self, theta: &[f64]) -> Unpacked {
        let k = self.means.len();
        let mut out = Unpacked { k, means: [0.0; MAX_COMPONENTS], weights: [0.0; MAX_COMPONENTS] };
        let mut p = 0;
        for (j, spec) in self.means.iter().enumerate() {
            out.means[j] = match spec {
                MeanSpec::Pinned(m) => *m,
                MeanSpec::Free => {
                    p += 1;
                    theta[p - 1]
                }
            };
        }
        match &self.fixed_weights {
            Some(w) => out.weights[..k].copy_from_slice(w),
            None => {
                let mut rest = 0.0;
                for j in 1..k {
                    out.weights[j] = theta[p + j - 1];
                    rest += theta[p + j - 1];
                }
                out.weights[0] = 1.0 - rest;
            }
        }
        out
    }

    /// Means and weights of every component at `theta`.
    pub fn components_at(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let u = self.unpack(theta);
        (u.means[..u.k].to_vec(), u.weights[..u.k].to_vec())
    }

    /// Inverse of [`MixtureFit::components_at`] for the free coordinates.
    pub fn pack(&self, means: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut theta: Vec<f64> = self
            .means
            .iter()
            .zip(means)
            .filter(|(s, _)| matches!(s, MeanSpec::Free))
            .map(|(_, m)| *m)
            .collect();
        if self.fixed_weights.is_none() {
            theta.extend_from_slice(&weights[1..]);
        }
        theta
    }

    /// Log of the component terms `log(w_j phi(x; mu_j, sigma^2))` and their
    /// log-sum-exp.
    pub(crate) fn log_terms(&self, u: &Unpacked, x: f64, terms: &mut [f64; MAX_COMPONENTS]) -> f64 {
        let mut max = f64::NEG_INFINITY;
        for j in 0..u.k {
            terms[j] = u.weights[j].ln() + log_normal_pdf(x, u.means[j], self.sigma);
            max = max.max(terms[j]);
        }
        if !max.is_finite() {
            return f64::NAN;
        }
        let s: f64 = terms[..u.k].iter().map(|t| (t - max).exp()).sum();
        max + s.ln()
    }

    /// Posterior component probabilities of `x`; returns the log-density.
    pub(crate) fn responsibilities(&self, u: &Unpacked, x: f64, resp: &mut [f64; MAX_COMPONENTS]) -> f64 {
        let lse = self.log_terms(u, x, resp);
        for r in resp[..u.k].iter_mut() {
            *r = (*r - lse).exp();
        }
        lse
    }
}

impl Model for MixtureFit {
    fn param_dim(&self) -> usize {
        self.domain.dim()
    }

    fn obs_dim(&self) -> usize {
        1
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn log_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        let u = self.unpack(theta);
        let mut terms = [0.0; MAX_COMPONENTS];
        self.log_terms(&u, x[0], &mut terms)
    }

    fn log_density_grad(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let u = self.unpack(theta);
        let mut r = [0.0; MAX_COMPONENTS];
        let value = self.responsibilities(&u, x[0], &mut r);
        let s2 = self.sigma * self.sigma;
        let mut p = 0;
        for (j, spec) in self.means.iter().enumerate() {
            if matches!(spec, MeanSpec::Free) {
                grad[p] = r[j] * (x[0] - u.means[j]) / s2;
                p += 1;
            }
        }
        if self.fixed_weights.is_none() {
            for j in 1..u.k {
                grad[p + j - 1] = r[j] / u.weights[j] - r[0] / u.weights[0];
            }
        }
        value
    }

    fn log_density_hess(&self, theta: &[f64], x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        // H = (grad^2 f)/f - (grad f / f)(grad f / f)^T with f the mixture density.
        let d = theta.len();
        let u = self.unpack(theta);
        let mut r = [0.0; MAX_COMPONENTS];
        let value = self.responsibilities(&u, x[0], &mut r);
        let s2 = self.sigma * self.sigma;
        let x = x[0];
        // Parameter slot of each component's free mean, and of each free weight.
        let mut mean_slot = [usize::MAX; MAX_COMPONENTS];
        let mut p = 0;
        for (j, spec) in self.means.iter().enumerate() {
            if matches!(spec, MeanSpec::Free) {
                mean_slot[j] = p;
                grad[p] = r[j] * (x - u.means[j]) / s2;
                p += 1;
            }
        }
        let weight_base = p;
        let free_w = self.fixed_weights.is_none();
        if free_w {
            for j in 1..u.k {
                grad[weight_base + j - 1] = r[j] / u.weights[j] - r[0] / u.weights[0];
            }
        }
        hess.iter_mut().for_each(|h| *h = 0.0);
        for j in 0..u.k {
            let Some(a) = (mean_slot[j] != usize::MAX).then_some(mean_slot[j]) else { continue };
            let dx = x - u.means[j];
            hess[a * d + a] += r[j] * (dx * dx / (s2 * s2) - 1.0 / s2);
            if free_w {
                // d/dw_l of w_j phi_j (x - mu_j)/sigma^2, divided by f.
                let per_weight = r[j] / u.weights[j] * dx / s2;
                if j >= 1 {
                    let b = weight_base + j - 1;
                    hess[a * d + b] += per_weight;
                    hess[b * d + a] += per_weight;
                } else {
                    for l in 1..u.k {
                        let b = weight_base + l - 1;
                        hess[a * d + b] -= per_weight;
                        hess[b * d + a] -= per_weight;
                    }
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                hess[i * d + j] -= grad[i] * grad[j];
            }
        }
        value
    }

    fn analytic_derivatives(&self) -> bool {
        true
    }
}
