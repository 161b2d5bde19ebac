//! EM for Gaussian mixtures with a common fixed standard deviation.
//!
//! The algorithm runs on a [`WeightedSample`], so the same code drives the
//! sample EM map (unit weights) and the population EM map (quadrature nodes
//! weighted by the true density).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::DMatrix;
#[allow(unused_imports)]
use num_traits::Float;

use crate::ascent::{draw_starts, Candidate, Initializer, Multistart};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::infer::{self, CiMethod, ConfidenceInterval, CovarianceKind, TauFunction};
use crate::model::{GaussianMixture, MeanSpec, MixtureFit, SampleSurface, MAX_COMPONENTS};
use crate::quad;

/// Scalar observations with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    x: Vec<f64>,
    w: Vec<f64>,
    total: f64,
}

impl WeightedSample {
    pub fn new(x: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if x.is_empty() || x.len() != w.len() || w.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("weighted sample needs matching non-negative weights".into()));
        }
        let total = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("weighted sample has no mass".into()));
        }
        Ok(Self { x, w, total })
    }

    /// Unit weight on every observation of a scalar dataset.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        if data.dim() != 1 {
            return Err(Error::Config("mixture EM needs scalar observations".into()));
        }
        Self::new(data.values().to_vec(), vec![1.0; data.n()])
    }

    /// Quadrature nodes on `[lo, hi]` weighted by the density of `truth`.
    pub fn population(truth: &GaussianMixture, lo: f64, hi: f64) -> Result<Self> {
        let sd_min = truth.sds().iter().cloned().fold(f64::INFINITY, f64::min);
        let panels = ((hi - lo) / (0.25 * sd_min)).ceil().clamp(8.0, 20_000.0) as usize;
        let (x, w) = quad::composite_gauss_legendre(lo, hi, panels, 10);
        let w = x.iter().zip(&w).map(|(x, w)| w * truth.density(*x)).collect();
        Self::new(x, w)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmState {
    pub theta: Vec<f64>,
    pub t: usize,
    /// Weighted mean log-density at `theta`.
    pub loglik: f64,
}

/// Posterior component probabilities, one row per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub matrix: DMatrix<f64>,
}

fn check_start(model: &MixtureFit, theta: &[f64]) -> Result<()> {
    if theta.len() != crate::model::Model::param_dim(model) || theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Config("EM start has the wrong dimension".into()));
    }
    let (_, weights) = model.components_at(theta);
    if weights.iter().any(|w| !(*w > 0.0 && *w < 1.0)) && weights.len() > 1 {
        return Err(Error::Config("EM start needs mixture weights in (0, 1)".into()));
    }
    Ok(())
}

pub fn responsibilities(model: &MixtureFit, sample: &WeightedSample, theta: &[f64]) -> Result<Responsibilities> {
    let u = model.unpack(theta);
    let mut matrix = DMatrix::zeros(sample.len(), u.k);
    let mut r = [0.0; MAX_COMPONENTS];
    for (i, x) in sample.x.iter().enumerate() {
        if !model.responsibilities(&u, *x, &mut r).is_finite() {
            return Err(Error::Evaluation { index: i });
        }
        for j in 0..u.k {
            matrix[(i, j)] = r[j];
        }
    }
    Ok(Responsibilities { matrix })
}

/// Weighted mean log-density of the mixture at `theta`.
pub fn loglik(model: &MixtureFit, sample: &WeightedSample, theta: &[f64]) -> Result<f64> {
    let u = model.unpack(theta);
    let mut terms = [0.0; MAX_COMPONENTS];
    let mut sum = 0.0;
    for (i, (x, w)) in sample.x.iter().zip(&sample.w).enumerate() {
        let v = model.log_terms(&u, *x, &mut terms);
        if !v.is_finite() {
            return Err(Error::Evaluation { index: i });
        }
        sum += w * v;
    }
    Ok(sum / sample.total)
}

/// One E-step and closed-form M-step.
pub fn em_step(model: &MixtureFit, sample: &WeightedSample, state: &EmState) -> Result<EmState> {
    let u = model.unpack(&state.theta);
    let k = u.k;
    let mut mass = [0.0; MAX_COMPONENTS];
    let mut moment = [0.0; MAX_COMPONENTS];
    let mut r = [0.0; MAX_COMPONENTS];
    for (i, (x, w)) in sample.x.iter().zip(&sample.w).enumerate() {
        if !model.responsibilities(&u, *x, &mut r).is_finite() {
            return Err(Error::Evaluation { index: i });
        }
        for j in 0..k {
            mass[j] += w * r[j];
            moment[j] += w * r[j] * x;
        }
    }
    if let Some(j) = (0..k).find(|&j| mass[j] < 1e-12) {
        return Err(Error::DegenerateComponent { component: j });
    }
    let means: Vec<f64> = model
        .mean_specs()
        .iter()
        .enumerate()
        .map(|(j, spec)| match spec {
            MeanSpec::Pinned(m) => *m,
            MeanSpec::Free => moment[j] / mass[j],
        })
        .collect();
    let weights: Vec<f64> = if model.weights_free() {
        mass[..k].iter().map(|m| m / sample.total).collect()
    } else {
        u.weights[..k].to_vec()
    };
    let theta = model.pack(&means, &weights);
    let loglik = loglik(model, sample, &theta)?;
    Ok(EmState { theta, t: state.t + 1, loglik })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmRun {
    pub terminal: EmState,
    /// Every state from the start to the terminal one.
    pub trace: Vec<EmState>,
    /// Stopped on the log-likelihood increment rather than `max_iter`.
    pub converged: bool,
}

impl Candidate for EmRun {
    fn point(&self) -> &[f64] {
        &self.terminal.theta
    }

    fn objective(&self) -> f64 {
        self.terminal.loglik
    }
}

/// Log-likelihood increment at which a run stops.
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Iterates [`em_step`] until the log-likelihood increment drops below `tol`.
pub fn em_run(model: &MixtureFit, sample: &WeightedSample, start: &[f64], tol: f64, max_iter: usize) -> Result<EmRun> {
    check_start(model, start)?;
    let mut state = EmState { theta: start.to_vec(), t: 0, loglik: loglik(model, sample, start)? };
    let mut trace = vec![state.clone()];
    let mut converged = false;
    while state.t < max_iter {
        let next = em_step(model, sample, &state)?;
        let increment = next.loglik - state.loglik;
        state = next;
        trace.push(state.clone());
        if increment.abs() < tol {
            converged = true;
            break;
        }
    }
    Ok(EmRun { terminal: state, trace, converged })
}

/// EM from `m` IID starts; the run with the highest log-likelihood wins.
pub fn em_multistart(
    model: &MixtureFit,
    sample: &WeightedSample,
    init: &Initializer,
    m: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<Multistart<EmRun>> {
    if m == 0 {
        return Err(Error::Config("multistart needs M >= 1".into()));
    }
    let starts = draw_starts(init, m, seed);
    let runs = starts.iter().map(|s| em_run(model, sample, s, tol, max_iter)).collect();
    Multistart::select(starts, runs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmRecoveryInputs {
    /// Radius of the concave neighbourhood of the MLE.
    pub r0: f64,
    /// Initialization mass of the ball of radius `r0 / 3` around the MLE.
    pub ball_mass: f64,
    pub m: usize,
}

impl EmRecoveryInputs {
    pub fn q_em(&self) -> f64 {
        self.ball_mass / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecoveryBound {
    /// `1 - (1 - q_EM)^M`.
    pub leading: f64,
    /// Terms that vanish as `n` grows and are not evaluated.
    pub remainder: String,
}

pub fn em_recovery_bound(inputs: &EmRecoveryInputs) -> Result<RecoveryBound> {
    let q = inputs.q_em();
    if !(inputs.r0 > 0.0 && q > 0.0 && q <= 0.5 && inputs.m >= 1) {
        return Err(Error::Config("recovery bound needs r0 > 0, 0 < ball mass <= 1 and M >= 1".into()));
    }
    Ok(RecoveryBound {
        leading: 1.0 - (1.0 - q).powf(inputs.m as f64),
        remainder: "- eta_n(q_EM) - c1 exp(-c2 n)".into(),
    })
}

/// Normal interval for `tau` at the EM estimate, using the sandwich (or
/// information) covariance of the sample log-likelihood.
pub fn em_normal_ci<T: TauFunction + ?Sized>(
    model: &MixtureFit,
    data: &Dataset,
    theta_em: &[f64],
    tau: &T,
    alpha: f64,
    kind: CovarianceKind,
) -> Result<ConfidenceInterval> {
    let surface = SampleSurface::new(model, data)?;
    let cov = infer::covariance(&surface, theta_em, kind)?;
    let ci = infer::normal_ci(theta_em, &cov, tau, data.n(), alpha)?;
    Ok(ConfidenceInterval { method: CiMethod::EmNormal, ..ci })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::model::Model;
    use core::f64::consts::PI;

    fn two_free(sigma: f64) -> MixtureFit {
        let domain = Domain::new(vec![-10.0, -10.0, 0.001], vec![10.0, 10.0, 0.999]).unwrap();
        MixtureFit::new(sigma, vec![MeanSpec::Free, MeanSpec::Free], None, domain).unwrap()
    }

    fn phi(x: f64, m: f64) -> f64 {
        (-(x - m) * (x - m) / 2.0).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn hand_computed_step() {
        let model = two_free(1.0);
        let sample = WeightedSample::from_dataset(&Dataset::from_scalars(vec![-1.0, 1.0]).unwrap()).unwrap();
        let start = [-1.0, 1.0, 0.5];
        let r11 = phi(-1.0, -1.0) / (phi(-1.0, -1.0) + phi(-1.0, 1.0));
        let r21 = phi(1.0, -1.0) / (phi(1.0, -1.0) + phi(1.0, 1.0));
        let mu1 = (r11 * -1.0 + r21 * 1.0) / (r11 + r21);
        let mu2 = ((1.0 - r11) * -1.0 + (1.0 - r21) * 1.0) / (2.0 - r11 - r21);
        let next = em_step(&model, &sample, &EmState { theta: start.to_vec(), t: 0, loglik: 0.0 }).unwrap();
        assert!((next.theta[0] - mu1).abs() < 1e-14);
        assert!((next.theta[1] - mu2).abs() < 1e-14);
        assert!((next.theta[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn identical_components_are_a_fixed_point() {
        let model = two_free(0.5);
        let data = Dataset::from_scalars(vec![-0.3, 0.2, 1.4, 0.8]).unwrap();
        let sample = WeightedSample::from_dataset(&data).unwrap();
        let r = responsibilities(&model, &sample, &[0.4, 0.4, 0.3]).unwrap();
        for i in 0..4 {
            assert!((r.matrix[(i, 0)] - 0.7).abs() < 1e-14);
            assert!((r.matrix.row(i).sum() - 1.0).abs() < 1e-12);
        }
        let run = em_run(&model, &sample, &[0.4, 0.4, 0.3], DEFAULT_TOL, 100).unwrap();
        assert!(run.terminal.t <= 2);
        assert!((run.terminal.theta[0] - run.terminal.theta[1]).abs() < 1e-12);
    }

    #[test]
    fn one_point_data_pulls_means_onto_it() {
        let model = two_free(1.0);
        let sample = WeightedSample::from_dataset(&Dataset::from_scalars(vec![0.7]).unwrap()).unwrap();
        let next = em_step(&model, &sample, &EmState { theta: vec![-2.0, 3.0, 0.4], t: 0, loglik: 0.0 }).unwrap();
        assert!((next.theta[0] - 0.7).abs() < 1e-14 && (next.theta[1] - 0.7).abs() < 1e-14);
    }

    #[test]
    fn starved_component_is_degenerate() {
        let model = two_free(0.1);
        let sample = WeightedSample::from_dataset(&Dataset::from_scalars(vec![0.0, 0.1]).unwrap()).unwrap();
        let err = em_step(&model, &sample, &EmState { theta: vec![0.0, 9.0, 0.5], t: 0, loglik: 0.0 });
        assert_eq!(err, Err(Error::DegenerateComponent { component: 1 }));
    }

    #[test]
    fn recovery_bound_arithmetic() {
        let b = em_recovery_bound(&EmRecoveryInputs { r0: 1.0, ball_mass: 0.5, m: 10 }).unwrap();
        assert!((b.leading - (1.0 - 0.75f64.powi(10))).abs() < 1e-15);
        assert!((b.leading - 0.943686).abs() < 1e-6);
        let b = em_recovery_bound(&EmRecoveryInputs { r0: 1.0, ball_mass: 1.0, m: 1 }).unwrap();
        assert_eq!(b.leading, 0.5);
    }

    #[test]
    fn pinned_mean_stays_put() {
        let model = MixtureFit::figure1();
        let data = Dataset::from_scalars(vec![-0.1, 0.05, 0.7, 0.9, 3.1]).unwrap();
        let sample = WeightedSample::from_dataset(&data).unwrap();
        let run = em_run(&model, &sample, &[2.0, 0.3], DEFAULT_TOL, 1000).unwrap();
        assert_eq!(run.terminal.theta.len(), model.param_dim());
        assert!(run.trace.windows(2).all(|w| w[1].loglik >= w[0].loglik - 1e-10));
    }
}
