//! Projected gradient ascent with Armijo backtracking, initialization
//! distributions, and the multi-start estimator.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::model::Objective;
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct AscentConfig {
    /// Initial trial step.
    pub s0: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Stop once the gradient sup-norm falls below this.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Eigenvalue threshold for classifying convergents.
    pub classify_tol: f64,
    pub record_trajectory: bool,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            s0: 0.1,
            shrink: 0.5,
            armijo: 1e-4,
            grad_tol: 1e-8,
            max_iter: 100_000,
            classify_tol: 1e-6,
            record_trajectory: false,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.shrink > 0.0 && self.shrink < 1.0 && self.grad_tol > 0.0 && self.armijo > 0.0 && self.armijo < 1.0)
        {
            return Err(Error::Config("ascent needs s0 > 0, 0 < shrink < 1, 0 < armijo < 1 and grad_tol > 0".into()));
        }
        if self.max_iter == 0 || !(self.classify_tol >= 0.0) {
            return Err(Error::Config("ascent needs max_iter >= 1 and classify_tol >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Classification {
    LocalMax,
    SaddleOrMin,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Termination {
    /// Gradient sup-norm below `grad_tol`.
    Gradient,
    /// Only the gradient components pushing out of the box remain.
    Boundary,
    /// The line search could not find an admissible step.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AscentResult {
    pub convergent: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub classification: Classification,
    /// Accepted iterates `(theta, value)`, starting with the start point.
    /// Empty unless requested in the config.
    pub trajectory: Vec<(Vec<f64>, f64)>,
}

/// Classifies a stationary point by the eigenvalues of `hessian`.
pub fn classify(hessian: &DMatrix<f64>, tol: f64) -> Classification {
    let eig = hessian.clone().symmetric_eigen().eigenvalues;
    if eig.iter().any(|e| !e.is_finite()) {
        Classification::Indeterminate
    } else if eig.iter().all(|&e| e < -tol) {
        Classification::LocalMax
    } else if eig.iter().any(|&e| e > tol) {
        Classification::SaddleOrMin
    } else {
        Classification::Indeterminate
    }
}

fn sup(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Zeroes gradient components that point out of the box at an active bound.
fn project(domain: &Domain, x: &[f64], g: &DVector<f64>) -> DVector<f64> {
    let mut pg = g.clone();
    for j in 0..x.len() {
        if (x[j] <= domain.lo()[j] && g[j] < 0.0) || (x[j] >= domain.hi()[j] && g[j] > 0.0) {
            pg[j] = 0.0;
        }
    }
    pg
}

fn as_divergence(err: Error, trajectory: &[(Vec<f64>, f64)]) -> Error {
    match err {
        Error::Evaluation { .. } | Error::Propagation(_) => {
            Error::Divergence { trajectory: trajectory.iter().map(|(x, _)| x.clone()).collect() }
        }
        other => other,
    }
}

/// Largest single-step displacement as a fraction of the domain diagonal.
pub const MAX_MOVE_FRACTION: f64 = 0.1;

/// Follows the discretized gradient flow of `surface` from `start`.
pub fn ascend<S: Objective + ?Sized>(surface: &S, start: &[f64], cfg: &AscentConfig) -> Result<AscentResult> {
    cfg.validate()?;
    let domain = surface.domain();
    domain.check(start)?;
    let mut x = start.to_vec();
    let mut trajectory: Vec<(Vec<f64>, f64)> = Vec::new();
    let (mut f, mut g) = match surface.value_gradient(&x) {
        Ok(v) => v,
        Err(e) => return Err(as_divergence(e, &[(x, f64::NAN)])),
    };
    trajectory.push((x.clone(), f));
    // Longest move allowed in one step; keeps steep starts from jumping
    // across a basin boundary.
    let max_move = (MAX_MOVE_FRACTION * domain.diagonal()).max(f64::MIN_POSITIVE);
    let mut step = cfg.s0;
    let mut prev: Option<(Vec<f64>, DVector<f64>)> = None;
    let mut iterations = 0;
    let termination = loop {
        if sup(&g) <= cfg.grad_tol {
            break Termination::Gradient;
        }
        let pg = project(domain, &x, &g);
        if sup(&pg) <= cfg.grad_tol {
            break Termination::Boundary;
        }
        if iterations >= cfg.max_iter {
            break Termination::MaxIter;
        }
        // Barzilai-Borwein trial step, falling back to growing the last accepted one.
        let mut s = match &prev {
            Some((xp, gp)) => {
                let dx = DVector::from_iterator(x.len(), x.iter().zip(xp).map(|(a, b)| a - b));
                let dg = &g - gp;
                let curv = -dx.dot(&dg);
                if curv > 0.0 && curv.is_finite() { dx.dot(&dx) / curv } else { 2.0 * step }
            }
            None => cfg.s0,
        };
        // Near convergence gradient differences are dominated by rounding and
        // the quotient can collapse; backtracking handles stiff directions.
        s = s.max(1e-3 * cfg.s0);
        let norm = pg.norm();
        if s * norm > max_move {
            s = max_move / norm;
        }
        // Below this, value differences are lost to rounding and the
        // sufficient-increase test falls back to the mean-gradient form, so
        // accepted values are non-decreasing up to `noise`.
        let noise = 64.0 * f64::EPSILON * f.abs().max(1.0);
        let accepted = loop {
            let mut trial: Vec<f64> = x.iter().zip(pg.iter()).map(|(a, d)| a + s * d).collect();
            domain.clamp(&mut trial);
            let moved: f64 = trial.iter().zip(&x).zip(g.iter()).map(|((t, a), gj)| gj * (t - a)).sum();
            let dist = trial.iter().zip(&x).fold(0.0f64, |m, (t, a)| m.max((t - a).abs()));
            let scale = 1.0 + x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            if dist <= 4.0 * f64::EPSILON * scale {
                break None;
            }
            let (ft, gt) = match surface.value_gradient(&trial) {
                Ok(v) => v,
                Err(e) => return Err(as_divergence(e, &trajectory)),
            };
            if ft >= f + cfg.armijo * moved {
                break Some((trial, ft, gt));
            }
            if (ft - f).abs() <= noise {
                let mean_slope: f64 = trial.iter().zip(&x).zip(g.iter().zip(gt.iter())).map(|((t, a), (g0, g1))| 0.5 * (g0 + g1) * (t - a)).sum();
                if mean_slope >= cfg.armijo * moved {
                    break Some((trial, ft, gt));
                }
            }
            s *= cfg.shrink;
        };
        let Some((next, fn_, gn)) = accepted else { break Termination::Stalled };
        prev = Some((core::mem::replace(&mut x, next), core::mem::replace(&mut g, gn)));
        f = fn_;
        step = s;
        iterations += 1;
        trajectory.push((x.clone(), f));
    };
    let classification = match termination {
        Termination::Boundary => Classification::Indeterminate,
        _ => match surface.hessian(&x) {
            Ok(h) => classify(&h, cfg.classify_tol),
            Err(_) => Classification::Indeterminate,
        },
    };
    if !cfg.record_trajectory {
        trajectory.clear();
    }
    Ok(AscentResult {
        convergent: x,
        value: f,
        iterations,
        converged: termination == Termination::Gradient,
        termination,
        classification,
        trajectory,
    })
}

/// Distribution of starting points. Every draw lies in the target domain.
#[derive(Debug, Clone, PartialEq)]
pub enum Initializer {
    UniformBox(Domain),
    PointMass { point: Vec<f64>, domain: Domain },
    /// The leading coordinates come from an observation drawn with
    /// replacement; any remaining coordinates are uniform on the box.
    EmpiricalResample { data: Dataset, domain: Domain },
    /// Normal with the sample mean and covariance of the data, clamped to the
    /// box; coordinates beyond the observation dimension are uniform.
    GaussianFit { mean: Vec<f64>, chol: DMatrix<f64>, domain: Domain },
}

impl Initializer {
    pub fn uniform(domain: Domain) -> Self {
        Self::UniformBox(domain)
    }

    pub fn point_mass(point: Vec<f64>, domain: Domain) -> Result<Self> {
        domain.check(&point)?;
        Ok(Self::PointMass { point, domain })
    }

    pub fn empirical(data: Dataset, domain: Domain) -> Self {
        Self::EmpiricalResample { data, domain }
    }

    pub fn gaussian_fit(data: &Dataset, domain: Domain) -> Result<Self> {
        let p = data.dim().min(domain.dim());
        let cov = data.covariance();
        let cov = cov.view((0, 0), (p, p)).into_owned();
        let chol = match cov.clone().cholesky() {
            Some(c) => c.l(),
            // Singular spread: fall back to the diagonal.
            None => DMatrix::from_diagonal(&cov.diagonal().map(|v| v.max(0.0).sqrt())),
        };
        Ok(Self::GaussianFit { mean: data.mean()[..p].to_vec(), chol, domain })
    }

    pub fn domain(&self) -> &Domain {
        match self {
            Self::UniformBox(d) => d,
            Self::PointMass { domain, .. } | Self::EmpiricalResample { domain, .. } | Self::GaussianFit { domain, .. } => domain,
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let domain = self.domain();
        let uniform = |rng: &mut Rng, j: usize| {
            let (l, h) = (domain.lo()[j], domain.hi()[j]);
            if l == h { l } else { l + (h - l) * rng.random::<f64>() }
        };
        let mut x = match self {
            Self::UniformBox(_) => (0..domain.dim()).map(|j| uniform(rng, j)).collect(),
            Self::PointMass { point, .. } => point.clone(),
            Self::EmpiricalResample { data, .. } => {
                let row = data.row(rng.random_range(0..data.n()));
                let p = row.len().min(domain.dim());
                let mut x = row[..p].to_vec();
                x.extend((p..domain.dim()).map(|j| uniform(rng, j)));
                x
            }
            Self::GaussianFit { mean, chol, .. } => {
                let p = mean.len();
                let z = DVector::from_iterator(p, (0..p).map(|_| StandardNormal.sample(rng)));
                let y = chol * z;
                let mut x: Vec<f64> = mean.iter().zip(y.iter()).map(|(m, e)| m + e).collect();
                x.extend((p..domain.dim()).map(|j| uniform(rng, j)));
                x
            }
        };
        domain.clamp(&mut x);
        x
    }

    /// Draw `index` of the stream seeded by `seed`.
    pub fn draw_indexed(&self, seed: u64, index: u64) -> Vec<f64> {
        self.draw(&mut rng::stream(seed, index))
    }
}

/// Something a multi-start run produces and selection ranks.
pub trait Candidate {
    fn point(&self) -> &[f64];
    fn objective(&self) -> f64;
}

impl Candidate for AscentResult {
    fn point(&self) -> &[f64] {
        &self.convergent
    }

    fn objective(&self) -> f64 {
        self.value
    }
}

/// The runs of a multi-start procedure and the selected estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Multistart<R> {
    pub starts: Vec<Vec<f64>>,
    pub runs: Vec<Result<R>>,
    pub selected: usize,
}

pub type MultistartOutcome = Multistart<AscentResult>;

impl<R: Candidate> Multistart<R> {
    /// Selects the successful run with the highest objective; ties go to the
    /// lowest run index.
    pub fn select(starts: Vec<Vec<f64>>, runs: Vec<Result<R>>) -> Result<Self> {
        let mut selected: Option<usize> = None;
        for (i, run) in runs.iter().enumerate() {
            if let Ok(r) = run {
                if !r.objective().is_finite() {
                    continue;
                }
                match selected {
                    Some(s) if runs[s].as_ref().map(|b| b.objective()).unwrap_or(f64::NEG_INFINITY) >= r.objective() => {}
                    _ => selected = Some(i),
                }
            }
        }
        let selected = selected.ok_or_else(|| Error::Estimation("every multi-start run failed".into()))?;
        Ok(Self { starts, runs, selected })
    }

    pub fn best(&self) -> &R {
        self.runs[self.selected].as_ref().expect("selected run succeeded")
    }

    pub fn estimator(&self) -> &[f64] {
        self.best().point()
    }

    pub fn value(&self) -> f64 {
        self.best().objective()
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.is_err()).count()
    }
}

/// `M` starting points; draw `r` uses stream `(seed, r)`.
pub fn draw_starts(init: &Initializer, m: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..m as u64).map(|r| init.draw_indexed(seed, r)).collect()
}

/// Ascends from each start and selects the best convergent.
pub fn multistart_from<S: Objective + ?Sized>(surface: &S, starts: Vec<Vec<f64>>, cfg: &AscentConfig) -> Result<MultistartOutcome> {
    if starts.is_empty() {
        return Err(Error::Config("multistart needs M >= 1".into()));
    }
    cfg.validate()?;
    let runs = starts.iter().map(|s| ascend(surface, s, cfg)).collect();
    Multistart::select(starts, runs)
}

/// Multi-start gradient ascent with `m` IID initializations.
pub fn multistart<S: Objective + ?Sized>(surface: &S, init: &Initializer, m: usize, cfg: &AscentConfig, seed: u64) -> Result<MultistartOutcome> {
    if m == 0 {
        return Err(Error::Config("multistart needs M >= 1".into()));
    }
    multistart_from(surface, draw_starts(init, m, seed), cfg)
}
