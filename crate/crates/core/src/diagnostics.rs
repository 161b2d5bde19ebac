//! Simulation-side measurements of the gaps between sample and population
//! quantities: gradient and Hessian sup-norm gaps on a grid, basin
//! probability gaps, and boundary-tube masses.
//!
//! Grid sup-norms are lower bounds on the true suprema.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::ascent::Initializer;
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::landscape::{BasinMap, CellLabel};
use crate::model::Objective;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UncertaintyLedger {
    /// Grid lower bound on `sup |grad L_n - grad L|_max`.
    pub eps1: f64,
    /// Grid lower bound on `sup |H_n - H|_max`.
    pub eps2: f64,
    /// Cells per axis of the grid behind `eps1` and `eps2`.
    pub gap_resolution: Vec<usize>,
    /// Cells where either surface failed to evaluate.
    pub gap_skipped: usize,
    /// `max_l |Pi_n(A_l) - Pi(A_l)|`.
    pub eps3: f64,
    /// `(r, Pi(B + r))` on a radius ladder.
    pub eps4_profile: Vec<(f64, f64)>,
    /// `(1 - q_1)^M`.
    pub init_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradientGaps {
    pub eps1: f64,
    pub eps2: f64,
    pub resolution: Vec<usize>,
    pub skipped: usize,
}

/// Largest gradient and Hessian max-norm differences over the cell centers.
pub fn measure_gaps<P: Objective + ?Sized, S: Objective + ?Sized>(population: &P, sample: &S, grid: &Grid) -> Result<GradientGaps> {
    if population.domain() != sample.domain() {
        return Err(Error::Config("surfaces must share a domain".into()));
    }
    let (mut eps1, mut eps2, mut skipped) = (0.0f64, 0.0f64, 0);
    for c in 0..grid.len() {
        let x = grid.cell_center(c);
        let eval = |s: &dyn Fn(&[f64]) -> Result<_>| s(&x);
        let pair = eval(&|t| Ok((population.gradient(t)?, population.hessian(t)?)))
            .and_then(|p| eval(&|t| Ok((sample.gradient(t)?, sample.hessian(t)?))).map(|s| (p, s)));
        match pair {
            Ok(((gp, hp), (gs, hs))) => {
                eps1 = eps1.max((gs - gp).amax());
                eps2 = eps2.max((hs - hp).amax());
            }
            Err(_) => skipped += 1,
        }
    }
    Ok(GradientGaps { eps1, eps2, resolution: grid.resolution().to_vec(), skipped })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinGaps {
    pub eps3: f64,
    pub per_basin: Vec<f64>,
    pub eps4_profile: Vec<(f64, f64)>,
    /// Draws falling outside the basin map.
    pub unmapped: usize,
}

/// `count` radii `r0, r0 * factor, r0 * factor^2, ...`.
pub fn geometric_ladder(r0: f64, factor: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| r0 * factor.powi(k as i32)).collect()
}

fn basin_fractions(map: &BasinMap, k: usize, draws: &[Vec<f64>]) -> (Vec<f64>, usize) {
    let mut counts = vec![0usize; k];
    let mut unmapped = 0;
    for x in draws {
        match map.grid.locate(x).map(|c| map.labels[c]) {
            Some(CellLabel::Basin(i)) if i < k => counts[i] += 1,
            Some(_) => {}
            None => unmapped += 1,
        }
    }
    (counts.iter().map(|c| *c as f64 / draws.len() as f64).collect(), unmapped)
}

/// Basin-probability gaps between two initializers, read off the population
/// basin map with common random numbers (draw `i` of both initializers uses
/// stream `i` of `seed`), and the `init_pop` mass of tubes around the
/// empirical basin boundary.
pub fn measure_basin_gaps(
    map: &BasinMap,
    k: usize,
    init_sample: &Initializer,
    init_pop: &Initializer,
    r: usize,
    radii: &[f64],
    seed: u64,
) -> Result<BasinGaps> {
    if r == 0 {
        return Err(Error::Config("basin gaps need R >= 1".into()));
    }
    let sample_draws: Vec<Vec<f64>> = (0..r as u64).map(|i| init_sample.draw_indexed(seed, i)).collect();
    let pop_draws: Vec<Vec<f64>> = (0..r as u64).map(|i| init_pop.draw_indexed(seed, i)).collect();
    let (fs, us) = basin_fractions(map, k, &sample_draws);
    let (fp, up) = basin_fractions(map, k, &pop_draws);
    let per_basin: Vec<f64> = fs.iter().zip(&fp).map(|(a, b)| (a - b).abs()).collect();
    let eps3 = per_basin.iter().fold(0.0f64, |m, g| m.max(*g));
    let boundary = map.boundary_points();
    let nearest: Vec<f64> = pop_draws
        .iter()
        .map(|x| {
            boundary
                .iter()
                .map(|b| b.iter().zip(x).map(|(p, q)| (p - q) * (p - q)).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    let mut sorted_radii = radii.to_vec();
    sorted_radii.sort_by(f64::total_cmp);
    let eps4_profile = sorted_radii
        .into_iter()
        .map(|rad| (rad, nearest.iter().filter(|d| **d <= rad).count() as f64 / r as f64))
        .collect();
    Ok(BasinGaps { eps3, per_basin, eps4_profile, unmapped: us.max(up) })
}

/// Coverage lost to initialization, `(1 - q_1)^M`.
pub fn init_loss(q1: f64, m: usize) -> f64 {
    (1.0 - q1).clamp(0.0, 1.0).powf(m as f64)
}

impl UncertaintyLedger {
    pub fn assemble(gaps: &GradientGaps, basins: &BasinGaps, q1: f64, m: usize) -> Self {
        Self {
            eps1: gaps.eps1,
            eps2: gaps.eps2,
            gap_resolution: gaps.resolution.clone(),
            gap_skipped: gaps.skipped,
            eps3: basins.eps3,
            eps4_profile: basins.eps4_profile.clone(),
            init_loss: init_loss(q1, m),
        }
    }
}
