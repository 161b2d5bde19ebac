//! Sandwich covariance, the normal interval for a scalar functional, and
//! likelihood-ratio, score and Wald confidence regions.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::model::{fd_gradient_free, EmpiricalObjective, Objective};
pub use crate::special::chisq_quantile;
use crate::special::normal_quantile;

/// Largest condition number accepted when inverting a matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// A scalar functional `tau(theta)` with its gradient.
pub trait TauFunction {
    fn eval(&self, theta: &[f64]) -> f64;

    fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        fd_gradient_free(|t| self.eval(t), theta)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Tau {
    /// `tau(theta) = theta_j`.
    Coordinate(usize),
    /// `tau(theta) = a^T theta`.
    Linear(Vec<f64>),
}

impl Default for Tau {
    fn default() -> Self {
        Tau::Coordinate(0)
    }
}

impl TauFunction for Tau {
    fn eval(&self, theta: &[f64]) -> f64 {
        match self {
            Tau::Coordinate(j) => theta[*j],
            Tau::Linear(a) => a.iter().zip(theta).map(|(a, t)| a * t).sum(),
        }
    }

    fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        match self {
            Tau::Coordinate(j) => DVector::from_fn(theta.len(), |i, _| if i == *j { 1.0 } else { 0.0 }),
            Tau::Linear(a) => DVector::from_column_slice(a),
        }
    }
}

/// Closure-backed functional with a finite-difference gradient.
pub struct FnTau<F>(pub F);

impl<F: Fn(&[f64]) -> f64> TauFunction for FnTau<F> {
    fn eval(&self, theta: &[f64]) -> f64 {
        (self.0)(theta)
    }
}

/// Inverse of a symmetric matrix, refusing condition numbers above
/// [`MAX_CONDITION`].
pub fn symmetric_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    let max = eigenvalues.iter().fold(0.0f64, |a, e| a.max(e.abs()));
    let min = eigenvalues.iter().fold(f64::INFINITY, |a, e| a.min(e.abs()));
    if !(min > 0.0) || !(max / min < MAX_CONDITION) || eigenvalues.iter().any(|e| !e.is_finite()) {
        return Err(Error::Conditioning { eigenvalues });
    }
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| 1.0 / e));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    Ok((&inv + inv.transpose()) * 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CovarianceKind {
    /// `H^-1 J H^-1`, robust to misspecification.
    #[default]
    Sandwich,
    /// Inverse observed information `(-H)^-1`.
    Information,
}

/// n-scaled asymptotic covariance at an estimate, with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct SandwichCovariance {
    pub matrix: DMatrix<f64>,
    /// Mean Hessian `H_n(theta)`.
    pub hessian: DMatrix<f64>,
    pub hessian_inv: DMatrix<f64>,
    /// Mean score outer product `(1/n) sum S S^T`.
    pub meat: DMatrix<f64>,
    pub kind: CovarianceKind,
}

impl SandwichCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn score_outer_product<S: EmpiricalObjective + ?Sized>(surface: &S, theta: &[f64]) -> Result<DMatrix<f64>> {
    let scores = surface.observation_scores(theta)?;
    Ok(scores.transpose() * &scores / surface.n() as f64)
}

/// `H_n(theta)^-1 (1/n sum S S^T) H_n(theta)^-1`.
pub fn sandwich_cov<S: EmpiricalObjective + ?Sized>(surface: &S, theta: &[f64]) -> Result<SandwichCovariance> {
    covariance(surface, theta, CovarianceKind::Sandwich)
}

pub fn covariance<S: EmpiricalObjective + ?Sized>(surface: &S, theta: &[f64], kind: CovarianceKind) -> Result<SandwichCovariance> {
    let hessian = surface.hessian(theta)?;
    let hessian_inv = symmetric_inverse(&hessian)?;
    let meat = score_outer_product(surface, theta)?;
    let matrix = match kind {
        CovarianceKind::Sandwich => &hessian_inv * &meat * &hessian_inv,
        CovarianceKind::Information => -hessian_inv.clone(),
    };
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(SandwichCovariance { matrix, hessian, hessian_inv, meat, kind })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RegionMethod {
    Lrt,
    Score,
    Wald,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CiMethod {
    Normal,
    WaldInduced,
    Bootstrap,
    EmNormal,
    TauImage(RegionMethod),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    /// Inclusive membership.
    pub fn contains(&self, t: f64) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn overlaps(&self, other: &ConfidenceInterval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config("alpha must lie in (0, 1)".into()))
    }
}

/// `tau(theta) +- z_{1-alpha/2} sqrt(g^T cov g / n)`.
pub fn normal_ci<T: TauFunction + ?Sized>(theta: &[f64], cov: &SandwichCovariance, tau: &T, n: usize, alpha: f64) -> Result<ConfidenceInterval> {
    check_alpha(alpha)?;
    let half = z_half_width(theta, &cov.matrix, tau, n, normal_quantile(1.0 - alpha / 2.0))?;
    let center = tau.eval(theta);
    Ok(ConfidenceInterval { lo: center - half, hi: center + half, level: 1.0 - alpha, method: CiMethod::Normal })
}

fn z_half_width<T: TauFunction + ?Sized>(theta: &[f64], cov: &DMatrix<f64>, tau: &T, n: usize, z: f64) -> Result<f64> {
    let g = tau.gradient(theta);
    let var = (g.transpose() * cov * &g)[(0, 0)];
    let half = z * (var.max(0.0) / n as f64).sqrt();
    if !half.is_finite() || n == 0 {
        return Err(Error::Propagation("interval half-width is not finite".into()));
    }
    Ok(half)
}

/// A confidence region given by `statistic(theta) <= threshold`.
pub trait ConfidenceRegion {
    fn method(&self) -> RegionMethod;

    fn level(&self) -> f64;

    fn dim(&self) -> usize;

    /// Chi-square critical value `zeta_{d, 1-alpha}`.
    fn threshold(&self) -> f64;

    fn statistic(&self, theta: &[f64]) -> Result<f64>;

    /// Inclusive membership test.
    fn contains(&self, theta: &[f64]) -> Result<bool> {
        Ok(self.statistic(theta)? <= self.threshold())
    }
}

/// `{theta : 2n (L_n(theta_hat) - L_n(theta)) <= zeta_{d,1-alpha}}`.
#[derive(Debug, Clone, Copy)]
pub struct LrtRegion<'a, S: ?Sized> {
    surface: &'a S,
    value_hat: f64,
    n: usize,
    zeta: f64,
    level: f64,
}

pub fn lrt_region<'a, S: Objective + ?Sized>(surface: &'a S, theta_hat: &[f64], n: usize, alpha: f64) -> Result<LrtRegion<'a, S>> {
    check_alpha(alpha)?;
    let d = surface.domain().dim();
    Ok(LrtRegion { surface, value_hat: surface.value(theta_hat)?, n, zeta: chisq_quantile(d, 1.0 - alpha), level: 1.0 - alpha })
}

impl<S: Objective + ?Sized> ConfidenceRegion for LrtRegion<'_, S> {
    fn method(&self) -> RegionMethod {
        RegionMethod::Lrt
    }

    fn level(&self) -> f64 {
        self.level
    }

    fn dim(&self) -> usize {
        self.surface.domain().dim()
    }

    fn threshold(&self) -> f64 {
        self.zeta
    }

    fn statistic(&self, theta: &[f64]) -> Result<f64> {
        Ok(2.0 * self.n as f64 * (self.value_hat - self.surface.value(theta)?))
    }
}

/// `{theta : n S_n(theta)^T I_n(theta)^-1 S_n(theta) <= zeta}` with
/// `I_n = (1/n) sum S S^T`.
#[derive(Debug, Clone, Copy)]
pub struct ScoreRegion<'a, S: ?Sized> {
    surface: &'a S,
    zeta: f64,
    level: f64,
}

pub fn score_region<S: EmpiricalObjective + ?Sized>(surface: &S, alpha: f64) -> Result<ScoreRegion<'_, S>> {
    check_alpha(alpha)?;
    Ok(ScoreRegion { surface, zeta: chisq_quantile(surface.domain().dim(), 1.0 - alpha), level: 1.0 - alpha })
}

impl<S: EmpiricalObjective + ?Sized> ConfidenceRegion for ScoreRegion<'_, S> {
    fn method(&self) -> RegionMethod {
        RegionMethod::Score
    }

    fn level(&self) -> f64 {
        self.level
    }

    fn dim(&self) -> usize {
        self.surface.domain().dim()
    }

    fn threshold(&self) -> f64 {
        self.zeta
    }

    /// Fails with a conditioning error where `I_n(theta)` is singular.
    fn statistic(&self, theta: &[f64]) -> Result<f64> {
        let g = self.surface.gradient(theta)?;
        if g.iter().all(|c| *c == 0.0) {
            return Ok(0.0);
        }
        let info_inv = symmetric_inverse(&score_outer_product(self.surface, theta)?)?;
        Ok(self.surface.n() as f64 * (g.transpose() * info_inv * &g)[(0, 0)])
    }
}

/// Ellipsoid `{theta : n (theta_hat - theta)^T Cov^-1 (theta_hat - theta) <= zeta}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaldRegion {
    center: Vec<f64>,
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
    n: usize,
    zeta: f64,
    level: f64,
}

pub fn wald_region(theta_hat: &[f64], cov: &SandwichCovariance, n: usize, alpha: f64) -> Result<WaldRegion> {
    check_alpha(alpha)?;
    let cov_inv = symmetric_inverse(&cov.matrix)?;
    Ok(WaldRegion {
        center: theta_hat.to_vec(),
        cov: cov.matrix.clone(),
        cov_inv,
        n,
        zeta: chisq_quantile(theta_hat.len(), 1.0 - alpha),
        level: 1.0 - alpha,
    })
}

impl WaldRegion {
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Exact image of the ellipsoid under a linear functional (first-order
    /// for non-linear `tau`): `tau(theta_hat) +- sqrt(zeta g^T Cov g / n)`.
    pub fn interval<T: TauFunction + ?Sized>(&self, tau: &T) -> Result<ConfidenceInterval> {
        let half = z_half_width(&self.center, &self.cov, tau, self.n, self.zeta.sqrt())?;
        let c = tau.eval(&self.center);
        Ok(ConfidenceInterval { lo: c - half, hi: c + half, level: self.level, method: CiMethod::WaldInduced })
    }
}

impl ConfidenceRegion for WaldRegion {
    fn method(&self) -> RegionMethod {
        RegionMethod::Wald
    }

    fn level(&self) -> f64 {
        self.level
    }

    fn dim(&self) -> usize {
        self.center.len()
    }

    fn threshold(&self) -> f64 {
        self.zeta
    }

    fn statistic(&self, theta: &[f64]) -> Result<f64> {
        let diff = DVector::from_iterator(theta.len(), self.center.iter().zip(theta).map(|(c, t)| c - t));
        Ok(self.n as f64 * (diff.transpose() * &self.cov_inv * &diff)[(0, 0)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CellStatus {
    Member,
    Outside,
    /// The statistic could not be evaluated (e.g. singular information).
    Excluded,
}

/// Cells of a grid whose centers satisfy a region's predicate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Extraction {
    pub method: RegionMethod,
    pub level: f64,
    pub grid: Grid,
    pub cells: Vec<CellStatus>,
}

impl Extraction {
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        self.cells.iter().enumerate().filter(|(_, s)| **s == CellStatus::Member).map(|(i, _)| i)
    }

    pub fn member_count(&self) -> usize {
        self.members().count()
    }

    pub fn excluded_fraction(&self) -> f64 {
        self.cells.iter().filter(|s| **s == CellStatus::Excluded).count() as f64 / self.cells.len() as f64
    }

    /// More than 1% of cells could not be evaluated.
    pub fn warn_excluded(&self) -> bool {
        self.excluded_fraction() > 0.01
    }

    /// Whether the cell containing `theta` is a member.
    pub fn covers(&self, theta: &[f64]) -> bool {
        self.grid.locate(theta).is_some_and(|c| self.cells[c] == CellStatus::Member)
    }
}

/// Default extraction resolution per axis.
pub const DEFAULT_RESOLUTION: usize = 200;

/// Evaluates the region predicate at every cell center. Only available for
/// `d <= 2`.
pub fn extract<R: ConfidenceRegion + ?Sized>(region: &R, grid: &Grid) -> Result<Extraction> {
    if region.dim() > 2 || grid.domain().dim() != region.dim() {
        return Err(Error::Config("grid extraction needs d <= 2 and a matching grid".into()));
    }
    let cells = (0..grid.len())
        .map(|c| match region.contains(&grid.cell_center(c)) {
            Ok(true) => CellStatus::Member,
            Ok(false) => CellStatus::Outside,
            Err(_) => CellStatus::Excluded,
        })
        .collect();
    Ok(Extraction { method: region.method(), level: region.level(), grid: grid.clone(), cells })
}

/// Image of an extracted region under `tau`: the interval hull plus the
/// maximal runs of member values that are closer than one cell's `tau`-span.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TauImage {
    pub interval: ConfidenceInterval,
    pub segments: Vec<(f64, f64)>,
}

impl TauImage {
    pub fn disconnected(&self) -> bool {
        self.segments.len() > 1
    }
}

pub fn tau_image<T: TauFunction + ?Sized>(extraction: &Extraction, tau: &T) -> Result<TauImage> {
    let widths = extraction.grid.cell_widths();
    let mut values = Vec::new();
    let mut span = 0.0f64;
    for c in extraction.members() {
        let center = extraction.grid.cell_center(c);
        let g = tau.gradient(&center);
        span = span.max(g.iter().zip(&widths).map(|(g, w)| g.abs() * w).sum());
        values.push(tau.eval(&center));
    }
    if values.is_empty() {
        return Err(Error::EmptyRegion);
    }
    values.sort_by(f64::total_cmp);
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for v in values {
        match segments.last_mut() {
            Some(seg) if v - seg.1 <= span * (1.0 + 1e-9) => seg.1 = v,
            _ => segments.push((v, v)),
        }
    }
    let interval = ConfidenceInterval {
        lo: segments[0].0,
        hi: segments[segments.len() - 1].1,
        level: extraction.level,
        method: CiMethod::TauImage(extraction.method),
    };
    Ok(TauImage { interval, segments })
}
