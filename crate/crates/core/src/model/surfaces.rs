use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::{Model, Objective, SurfaceKind};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::model::GaussianMixture;
use crate::quad;

/// `x ~ N(theta, sd^2 I)` in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalLocation {
    sd: f64,
    domain: Domain,
}

impl NormalLocation {
    pub fn new(sd: f64, domain: Domain) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::Config("normal location model needs sd > 0".into()));
        }
        Ok(Self { sd, domain })
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

impl Model for NormalLocation {
    fn param_dim(&self) -> usize {
        self.domain.dim()
    }

    fn obs_dim(&self) -> usize {
        self.domain.dim()
    }

    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn log_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        let s2 = self.sd * self.sd;
        let q: f64 = theta.iter().zip(x).map(|(t, x)| (x - t) * (x - t)).sum();
        -0.5 * q / s2 - 0.5 * theta.len() as f64 * (2.0 * PI * s2).ln()
    }

    fn log_density_grad(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let s2 = self.sd * self.sd;
        for ((g, t), x) in grad.iter_mut().zip(theta).zip(x) {
            *g = (x - t) / s2;
        }
        self.log_density(theta, x)
    }

    fn log_density_hess(&self, theta: &[f64], x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = theta.len();
        hess.iter_mut().for_each(|h| *h = 0.0);
        for j in 0..d {
            hess[j * d + j] = -1.0 / (self.sd * self.sd);
        }
        self.log_density_grad(theta, x, grad)
    }

    fn analytic_derivatives(&self) -> bool {
        true
    }
}

/// Concave bowl `-||theta - c||^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    center: Vec<f64>,
    domain: Domain,
}

impl Quadratic {
    pub fn new(center: Vec<f64>, domain: Domain) -> Result<Self> {
        if center.len() != domain.dim() {
            return Err(Error::Config("center dimension does not match the domain".into()));
        }
        Ok(Self { center, domain })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }
}

impl Objective for Quadratic {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::PopulationAnalytic
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.domain.check(theta)?;
        Ok(-0.5 * theta.iter().zip(&self.center).map(|(t, c)| (t - c) * (t - c)).sum::<f64>())
    }

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let v = self.value(theta)?;
        Ok((v, DVector::from_iterator(theta.len(), theta.iter().zip(&self.center).map(|(t, c)| c - t))))
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(theta)?;
        Ok(-DMatrix::identity(theta.len(), theta.len()))
    }
}

/// One-dimensional double well `-(theta^2 - 1)^2` with maxima at `-1` and `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWell {
    domain: Domain,
}

impl DoubleWell {
    pub fn new(domain: Domain) -> Result<Self> {
        if domain.dim() != 1 {
            return Err(Error::Config("double well is one-dimensional".into()));
        }
        Ok(Self { domain })
    }
}

impl Default for DoubleWell {
    fn default() -> Self {
        Self { domain: Domain::new(vec![-2.0], vec![2.0]).expect("static domain") }
    }
}

impl Objective for DoubleWell {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::PopulationAnalytic
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.domain.check(theta)?;
        let s = theta[0] * theta[0] - 1.0;
        Ok(-s * s)
    }

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let v = self.value(theta)?;
        let t = theta[0];
        Ok((v, DVector::from_element(1, -4.0 * t * (t * t - 1.0))))
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.domain.check(theta)?;
        let t = theta[0];
        Ok(DMatrix::from_element(1, 1, 4.0 - 12.0 * t * t))
    }
}

/// Expected log-likelihood `E_{p0} log p(X; theta)` for a scalar model
/// under a Gaussian-mixture truth.
///
/// The integral runs over a fixed composite Gauss-Legendre rule with panels a
/// quarter of the narrowest truth component wide, so the surface is a smooth
/// function of `theta` and its derivatives are exact derivatives of the
/// quadrature sum.
#[derive(Debug, Clone)]
pub struct PopulationSurface<M> {
    model: M,
    truth: GaussianMixture,
    nodes: Vec<f64>,
    /// Quadrature weight times truth density at each node.
    mass: Vec<f64>,
}

impl<M: Model> PopulationSurface<M> {
    /// Integrates over `[-2, 5]`.
    pub fn new(model: M, truth: GaussianMixture) -> Result<Self> {
        Self::with_interval(model, truth, -2.0, 5.0)
    }

    pub fn with_interval(model: M, truth: GaussianMixture, lo: f64, hi: f64) -> Result<Self> {
        if model.obs_dim() != 1 {
            return Err(Error::Config("population surface needs scalar observations".into()));
        }
        if !(lo < hi) {
            return Err(Error::Config("invalid integration interval".into()));
        }
        let sd_min = truth.sds().iter().cloned().fold(f64::INFINITY, f64::min);
        let panels = ((hi - lo) / (0.25 * sd_min)).ceil().clamp(8.0, 20_000.0) as usize;
        let (nodes, weights) = quad::composite_gauss_legendre(lo, hi, panels, 10);
        let mass = nodes.iter().zip(&weights).map(|(x, w)| w * truth.density(*x)).collect();
        Ok(Self { model, truth, nodes, mass })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn truth(&self) -> &GaussianMixture {
        &self.truth
    }

    /// Integral of `p0(x) * (log p, S, H)`, packed as `[value, grad.., hess..]`.
    fn moments(&self, theta: &[f64], order: usize) -> Result<Vec<f64>> {
        self.model.domain().check(theta)?;
        let d = theta.len();
        let width = match order {
            0 => 1,
            1 => 1 + d,
            _ => 1 + d + d * d,
        };
        let mut out = vec![0.0; width];
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        for (x, w) in self.nodes.iter().zip(&self.mass) {
            let xs = [*x];
            let v = match order {
                0 => self.model.log_density(theta, &xs),
                1 => self.model.log_density_grad(theta, &xs, &mut g),
                _ => self.model.log_density_hess(theta, &xs, &mut g, &mut h),
            };
            out[0] += w * v;
            if order >= 1 {
                out[1..1 + d].iter_mut().zip(&g).for_each(|(o, gj)| *o += w * gj);
            }
            if order >= 2 {
                out[1 + d..].iter_mut().zip(&h).for_each(|(o, hj)| *o += w * hj);
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Propagation("population integrand is not finite".into()));
        }
        Ok(out)
    }
}

impl<M: Model> Objective for PopulationSurface<M> {
    fn domain(&self) -> &Domain {
        self.model.domain()
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::PopulationAnalytic
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.moments(theta, 0)?[0])
    }

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let m = self.moments(theta, 1)?;
        Ok((m[0], DVector::from_column_slice(&m[1..])))
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        let d = theta.len();
        let m = self.moments(theta, 2)?;
        Ok(DMatrix::from_row_slice(d, d, &m[1 + d..]))
    }
}
