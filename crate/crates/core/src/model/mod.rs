//! Objective surfaces and parametric models.
//!
//! An [`Objective`] is a twice-differentiable scalar function on a box
//! domain. Sample-backed surfaces additionally expose per-observation
//! scores through [`EmpiricalObjective`], which the sandwich covariance and
//! the score test need.

mod mixture;
mod surfaces;

use alloc::vec;
use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::domain::Domain;
use crate::error::{Error, Result};

pub use mixture::{GaussianMixture, MeanSpec, MixtureFit, MAX_COMPONENTS};
pub use surfaces::{DoubleWell, NormalLocation, PopulationSurface, Quadratic};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SurfaceKind {
    PopulationAnalytic,
    SampleLoglik,
    BootstrapLoglik,
    Kde,
}

pub trait Objective {
    fn domain(&self) -> &Domain;

    fn kind(&self) -> SurfaceKind;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        let v = self.value(theta)?;
        Ok((v, fd_gradient(|x| self.value(x), self.domain(), theta)?))
    }

    fn gradient(&self, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(self.value_gradient(theta)?.1)
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        fd_jacobian(|x| self.gradient(x), self.domain(), theta)
    }
}

/// A surface that is an average of per-observation log-likelihoods.
pub trait EmpiricalObjective: Objective {
    fn n(&self) -> usize;

    /// `n x d` matrix whose rows are `S(theta | X_i)`.
    fn observation_scores(&self, theta: &[f64]) -> Result<DMatrix<f64>>;
}

/// Parametric density `p(x; theta)` with derivative hooks. Derivatives
/// default to central finite differences.
pub trait Model {
    fn param_dim(&self) -> usize;

    fn obs_dim(&self) -> usize;

    fn domain(&self) -> &Domain;

    fn log_density(&self, theta: &[f64], x: &[f64]) -> f64;

    /// Writes `S(theta | x)` into `grad` and returns `log p(x; theta)`.
    fn log_density_grad(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        let g = fd_gradient_free(|t| self.log_density(t, x), theta);
        grad.copy_from_slice(g.as_slice());
        self.log_density(theta, x)
    }

    /// Writes the score and the row-major Hessian `H(theta | x)`.
    fn log_density_hess(&self, theta: &[f64], x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let d = theta.len();
        let value = self.log_density_grad(theta, x, grad);
        let mut tp = theta.to_vec();
        let mut gp = vec![0.0; d];
        let mut gm = vec![0.0; d];
        for j in 0..d {
            let h = fd_step(theta[j]);
            tp[j] = theta[j] + h;
            self.log_density_grad(&tp, x, &mut gp);
            tp[j] = theta[j] - h;
            self.log_density_grad(&tp, x, &mut gm);
            tp[j] = theta[j];
            for i in 0..d {
                hess[i * d + j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        symmetrize(hess, d);
        value
    }

    fn analytic_derivatives(&self) -> bool {
        false
    }
}

/// Finite-difference step `1e-6 * (1 + |theta_j|)`.
pub fn fd_step(theta_j: f64) -> f64 {
    1e-6 * (1.0 + theta_j.abs())
}

fn symmetrize(hess: &mut [f64], d: usize) {
    for i in 0..d {
        for j in (i + 1)..d {
            let m = 0.5 * (hess[i * d + j] + hess[j * d + i]);
            hess[i * d + j] = m;
            hess[j * d + i] = m;
        }
    }
}

/// Central differences of an unconstrained scalar function.
pub fn fd_gradient_free<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64]) -> DVector<f64> {
    let mut tp = theta.to_vec();
    DVector::from_iterator(
        theta.len(),
        (0..theta.len()).map(|j| {
            let h = fd_step(theta[j]);
            tp[j] = theta[j] + h;
            let up = f(&tp);
            tp[j] = theta[j] - h;
            let down = f(&tp);
            tp[j] = theta[j];
            (up - down) / (2.0 * h)
        }),
    )
}

/// Finite differences that stay inside `domain`: central where both
/// neighbours are admissible, one-sided otherwise.
pub fn fd_gradient<F: Fn(&[f64]) -> Result<f64>>(f: F, domain: &Domain, theta: &[f64]) -> Result<DVector<f64>> {
    let cols = fd_columns(|x| Ok(DVector::from_element(1, f(x)?)), domain, theta)?;
    Ok(DVector::from_iterator(theta.len(), cols.iter().map(|c| c[0])))
}

/// Finite-difference Jacobian of a vector field, symmetrized (used for
/// Hessians of gradient fields).
pub fn fd_jacobian<F: Fn(&[f64]) -> Result<DVector<f64>>>(g: F, domain: &Domain, theta: &[f64]) -> Result<DMatrix<f64>> {
    let cols = fd_columns(g, domain, theta)?;
    let jac = DMatrix::from_columns(&cols);
    Ok((&jac + jac.transpose()) * 0.5)
}

fn fd_columns<F: Fn(&[f64]) -> Result<DVector<f64>>>(g: F, domain: &Domain, theta: &[f64]) -> Result<alloc::vec::Vec<DVector<f64>>> {
    let mut tp = theta.to_vec();
    let mut center: Option<DVector<f64>> = None;
    let mut cols = alloc::vec::Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let h = fd_step(theta[j]);
        let up_ok = theta[j] + h <= domain.hi()[j];
        let down_ok = theta[j] - h >= domain.lo()[j];
        let col = match (up_ok, down_ok) {
            (true, true) | (false, false) => {
                tp[j] = theta[j] + h;
                let up = g(&tp)?;
                tp[j] = theta[j] - h;
                let down = g(&tp)?;
                (up - down) / (2.0 * h)
            }
            (true, false) => {
                tp[j] = theta[j] + h;
                let up = g(&tp)?;
                let c = match &center {
                    Some(c) => c.clone(),
                    None => g(theta)?,
                };
                center = Some(c.clone());
                (up - c) / h
            }
            (false, true) => {
                tp[j] = theta[j] - h;
                let down = g(&tp)?;
                let c = match &center {
                    Some(c) => c.clone(),
                    None => g(theta)?,
                };
                center = Some(c.clone());
                (c - down) / h
            }
        };
        tp[j] = theta[j];
        cols.push(col);
    }
    Ok(cols)
}

/// Sample (or bootstrap) log-likelihood `(1/n) sum_i log p(X_i; theta)`.
#[derive(Debug, Clone, Copy)]
pub struct SampleSurface<'a, M: ?Sized> {
    model: &'a M,
    data: &'a Dataset,
    kind: SurfaceKind,
}

impl<'a, M: Model + ?Sized> SampleSurface<'a, M> {
    pub fn new(model: &'a M, data: &'a Dataset) -> Result<Self> {
        if data.dim() != model.obs_dim() {
            return Err(Error::Config("observation dimension does not match the model".into()));
        }
        Ok(Self { model, data, kind: SurfaceKind::SampleLoglik })
    }

    /// Same surface, tagged as built from a bootstrap resample.
    pub fn bootstrap(model: &'a M, data: &'a Dataset) -> Result<Self> {
        Ok(Self { kind: SurfaceKind::BootstrapLoglik, ..Self::new(model, data)? })
    }

    pub fn model(&self) -> &'a M {
        self.model
    }

    pub fn data(&self) -> &'a Dataset {
        self.data
    }
}

impl<M: Model + ?Sized> Objective for SampleSurface<'_, M> {
    fn domain(&self) -> &Domain {
        self.model.domain()
    }

    fn kind(&self) -> SurfaceKind {
        self.kind
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        self.domain().check(theta)?;
        let mut sum = 0.0;
        for (i, x) in self.data.rows().enumerate() {
            let v = self.model.log_density(theta, x);
            if !v.is_finite() {
                return Err(Error::Evaluation { index: i });
            }
            sum += v;
        }
        Ok(sum / self.data.n() as f64)
    }

    fn value_gradient(&self, theta: &[f64]) -> Result<(f64, DVector<f64>)> {
        self.domain().check(theta)?;
        let d = theta.len();
        let mut sum = 0.0;
        let mut grad = DVector::zeros(d);
        let mut g = vec![0.0; d];
        for (i, x) in self.data.rows().enumerate() {
            let v = self.model.log_density_grad(theta, x, &mut g);
            if !v.is_finite() || g.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation { index: i });
            }
            sum += v;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        let n = self.data.n() as f64;
        Ok((sum / n, grad / n))
    }

    fn hessian(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.domain().check(theta)?;
        let d = theta.len();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        let mut acc = vec![0.0; d * d];
        for (i, x) in self.data.rows().enumerate() {
            let v = self.model.log_density_hess(theta, x, &mut g, &mut h);
            if !v.is_finite() || h.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation { index: i });
            }
            acc.iter_mut().zip(&h).for_each(|(a, b)| *a += b);
        }
        let n = self.data.n() as f64;
        Ok(DMatrix::from_row_slice(d, d, &acc) / n)
    }
}

impl<M: Model + ?Sized> EmpiricalObjective for SampleSurface<'_, M> {
    fn n(&self) -> usize {
        self.data.n()
    }

    fn observation_scores(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.domain().check(theta)?;
        let d = theta.len();
        let mut scores = DMatrix::zeros(self.data.n(), d);
        let mut g = vec![0.0; d];
        for (i, x) in self.data.rows().enumerate() {
            let v = self.model.log_density_grad(theta, x, &mut g);
            if !v.is_finite() || g.iter().any(|c| !c.is_finite()) {
                return Err(Error::Evaluation { index: i });
            }
            for j in 0..d {
                scores[(i, j)] = g[j];
            }
        }
        Ok(scores)
    }
}

/// Mean per-observation log-density `L_n(theta)`.
pub fn eval_loglik<M: Model + ?Sized>(model: &M, data: &Dataset, theta: &[f64]) -> Result<f64> {
    SampleSurface::new(model, data)?.value(theta)
}

/// Gradient and Hessian of `L_n` at `theta`.
pub fn eval_score_hessian<M: Model + ?Sized>(model: &M, data: &Dataset, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let surface = SampleSurface::new(model, data)?;
    Ok((surface.gradient(theta)?, surface.hessian(theta)?))
}

/// IID sample of size `n` from `truth`; a pure function of `(truth, n, seed)`.
pub fn simulate(truth: &GaussianMixture, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("simulate needs n >= 1".into()));
    }
    let mut rng = crate::rng::stream(seed, 0);
    Dataset::from_scalars((0..n).map(|_| truth.sample(&mut rng)).collect())
}
