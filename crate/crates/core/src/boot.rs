//! Percentile bootstrap with every replicate started at the original
//! estimate.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::ascent::{self, AscentConfig, Classification, Termination};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::infer::{CiMethod, ConfidenceInterval, TauFunction};
use crate::model::{Model, SampleSurface};
use crate::rng;

/// Largest tolerated fraction of dropped replicates.
pub const MAX_DROP_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BootstrapDistribution {
    /// Sorted replicate values.
    pub values: Vec<f64>,
    pub b: usize,
    pub diverged: usize,
}

impl BootstrapDistribution {
    pub fn from_replicates(replicates: Vec<Option<f64>>) -> Self {
        let b = replicates.len();
        let mut values: Vec<f64> = replicates.into_iter().flatten().collect();
        values.sort_by(f64::total_cmp);
        Self { diverged: b - values.len(), values, b }
    }

    /// Empirical quantile: order statistic `ceil(p * B)` (1-based, at least 1)
    /// of the retained values.
    pub fn quantile(&self, p: f64) -> f64 {
        order_statistic(&self.values, p)
    }

    /// Errors when every replicate or more than 5% of them were dropped.
    pub fn check_drop_rate(&self) -> Result<()> {
        if self.values.is_empty() || self.diverged as f64 > MAX_DROP_RATE * self.b as f64 {
            return Err(Error::Bootstrap { dropped: self.diverged, total: self.b });
        }
        Ok(())
    }
}

/// `sorted[ceil(p * len) - 1]`, with the index clamped to the sample.
pub fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let len = sorted.len();
    // The small offset keeps exact products such as 0.025 * 2000 from rounding up.
    let k = (p * len as f64 - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(len) - 1]
}

/// Value of `tau` at the bootstrap estimate of replicate `b`, or `None` when
/// the ascent failed or left the interior.
pub fn replicate<M: Model + ?Sized, T: TauFunction + ?Sized>(
    data: &Dataset,
    model: &M,
    theta_hat: &[f64],
    tau: &T,
    cfg: &AscentConfig,
    seed: u64,
    b: usize,
) -> Option<f64> {
    let resampled = data.resample(&mut rng::stream(seed, b as u64));
    let surface = SampleSurface::bootstrap(model, &resampled).ok()?;
    let r = ascent::ascend(&surface, theta_hat, cfg).ok()?;
    let usable = r.termination == Termination::Gradient
        || (r.termination == Termination::Stalled && r.classification == Classification::LocalMax);
    usable.then(|| tau.eval(&r.convergent))
}

/// Percentile interval `[G^-1(alpha/2), G^-1(1 - alpha/2)]` from `b`
/// resamples, each ascended from `theta_hat`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_ci<M: Model + ?Sized, T: TauFunction + ?Sized>(
    data: &Dataset,
    model: &M,
    theta_hat: &[f64],
    tau: &T,
    b: usize,
    alpha: f64,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<(ConfidenceInterval, BootstrapDistribution)> {
    if b == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config("bootstrap needs B >= 1 and 0 < alpha < 1".into()));
    }
    model.domain().check(theta_hat)?;
    let dist = BootstrapDistribution::from_replicates((0..b).map(|i| replicate(data, model, theta_hat, tau, cfg, seed, i)).collect());
    let ci = percentile_interval(&dist, alpha)?;
    Ok((ci, dist))
}

pub fn percentile_interval(dist: &BootstrapDistribution, alpha: f64) -> Result<ConfidenceInterval> {
    dist.check_drop_rate()?;
    Ok(ConfidenceInterval {
        lo: dist.quantile(alpha / 2.0),
        hi: dist.quantile(1.0 - alpha / 2.0),
        level: 1.0 - alpha,
        method: CiMethod::Bootstrap,
    })
}
