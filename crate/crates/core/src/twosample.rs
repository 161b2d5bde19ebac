//! Pooled-anchor two-sample comparison with a permutation p-value.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;

use crate::ascent::{self, AscentConfig, Initializer};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::infer::{self, ConfidenceInterval, CovarianceKind, TauFunction};
use crate::model::{Model, SampleSurface};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TwoSampleResult {
    pub theta_opt: Vec<f64>,
    pub theta_x: Vec<f64>,
    pub theta_y: Vec<f64>,
    pub statistic: f64,
    pub p_value: f64,
    pub permutations: usize,
    /// Permuted statistics in permutation order.
    pub permuted: Vec<f64>,
}

fn anchored_fit<M: Model + ?Sized>(model: &M, data: &Dataset, anchor: &[f64], cfg: &AscentConfig) -> Result<Vec<f64>> {
    let surface = SampleSurface::new(model, data)?;
    ascent::ascend(&surface, anchor, cfg)
        .map(|r| r.convergent)
        .map_err(|e| Error::TwoSample(format!("ascent from the pooled anchor failed: {e}")))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pools the samples, fits the pooled likelihood by multi-start, then ascends
/// each sample (and each label permutation) from that one anchor.
///
/// The anchor uses seed `derive_seed(seed, 0)`; permutation `p` shuffles with
/// stream `p` of `derive_seed(seed, 1)`.
#[allow(clippy::too_many_arguments)]
pub fn two_sample_test<M: Model + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    model: &M,
    init: &Initializer,
    m: usize,
    permutations: usize,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<TwoSampleResult> {
    if x.dim() != y.dim() {
        return Err(Error::Config("samples must share the observation dimension".into()));
    }
    let pooled = x.concat(y)?;
    let surface = SampleSurface::new(model, &pooled)?;
    let theta_opt = ascent::multistart(&surface, init, m, cfg, rng::derive_seed(seed, 0))?.estimator().to_vec();
    let theta_x = anchored_fit(model, x, &theta_opt, cfg)?;
    let theta_y = anchored_fit(model, y, &theta_opt, cfg)?;
    let statistic = distance(&theta_x, &theta_y);
    let perm_seed = rng::derive_seed(seed, 1);
    let mut permuted = Vec::with_capacity(permutations);
    let mut index: Vec<usize> = (0..pooled.n()).collect();
    for p in 0..permutations {
        index.sort_unstable();
        index.shuffle(&mut rng::stream(perm_seed, p as u64));
        let (ix, iy) = index.split_at(x.n());
        let tx = anchored_fit(model, &pooled.select(ix)?, &theta_opt, cfg)?;
        let ty = anchored_fit(model, &pooled.select(iy)?, &theta_opt, cfg)?;
        permuted.push(distance(&tx, &ty));
    }
    let exceed = permuted.iter().filter(|t| **t >= statistic).count();
    let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
    Ok(TwoSampleResult { theta_opt, theta_x, theta_y, statistic, p_value, permutations, permuted })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CiOverlap {
    pub ci_x: ConfidenceInterval,
    pub ci_y: ConfidenceInterval,
    pub overlap: bool,
}

/// Alternative comparison: normal intervals for `tau` at each sample's
/// anchored estimate, declaring a difference when they do not overlap.
pub fn ci_overlap<M: Model + ?Sized, T: TauFunction + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    model: &M,
    result: &TwoSampleResult,
    tau: &T,
    alpha: f64,
) -> Result<CiOverlap> {
    let ci = |data: &Dataset, theta: &[f64]| -> Result<ConfidenceInterval> {
        let surface = SampleSurface::new(model, data)?;
        let cov = infer::covariance(&surface, theta, CovarianceKind::Sandwich)?;
        infer::normal_ci(theta, &cov, tau, data.n(), alpha)
    };
    let ci_x = ci(x, &result.theta_x)?;
    let ci_y = ci(y, &result.theta_y)?;
    Ok(CiOverlap { overlap: ci_x.overlaps(&ci_y), ci_x, ci_y })
}
