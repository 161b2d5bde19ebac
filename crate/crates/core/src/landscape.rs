//! Local-maxima registries, basins of attraction, basin probabilities and
//! precision sets.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)]
use num_traits::Float;

use crate::ascent::{self, AscentConfig, AscentResult, Classification, Initializer, Termination};
use crate::domain::{Domain, Grid};
use crate::error::{Error, Result};
use crate::model::Objective;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Maximum {
    pub location: Vec<f64>,
    pub value: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn by_value_then_location(a: &Maximum, b: &Maximum) -> Ordering {
    b.value.total_cmp(&a.value).then_with(|| {
        a.location
            .iter()
            .zip(&b.location)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

/// Deduplicated local maxima sorted by value, highest first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaximaRegistry {
    maxima: Vec<Maximum>,
    merge_radius: f64,
}

/// `1e-3` times the domain diagonal.
pub fn default_merge_radius(domain: &Domain) -> f64 {
    1e-3 * domain.diagonal()
}

impl MaximaRegistry {
    /// Keeps the best candidate of every cluster closer than `merge_radius`.
    pub fn from_candidates<I: IntoIterator<Item = Maximum>>(candidates: I, merge_radius: f64) -> Result<Self> {
        let mut all: Vec<Maximum> = candidates.into_iter().filter(|m| m.value.is_finite()).collect();
        all.sort_by(by_value_then_location);
        let mut maxima: Vec<Maximum> = Vec::new();
        for m in all {
            if maxima.iter().all(|k| distance(&k.location, &m.location) > merge_radius) {
                maxima.push(m);
            }
        }
        if maxima.is_empty() {
            return Err(Error::Landscape("no local maximum found".into()));
        }
        Ok(Self { maxima, merge_radius })
    }

    pub fn maxima(&self) -> &[Maximum] {
        &self.maxima
    }

    pub fn len(&self) -> usize {
        self.maxima.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maxima.is_empty()
    }

    pub fn merge_radius(&self) -> f64 {
        self.merge_radius
    }

    /// Index of the registered maximum within `merge_radius` of `point`.
    pub fn nearest(&self, point: &[f64]) -> Option<usize> {
        self.maxima
            .iter()
            .enumerate()
            .map(|(i, m)| (i, distance(&m.location, point)))
            .filter(|(_, d)| *d <= self.merge_radius)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
    }

    /// Basin label of an ascent outcome, if it reached a registered maximum.
    pub fn label(&self, outcome: &Result<AscentResult>) -> Option<usize> {
        match outcome {
            Ok(r) if r.termination != Termination::Boundary => self.nearest(&r.convergent),
            _ => None,
        }
    }
}

/// Probing controls for [`build_registry_with`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeOptions {
    /// Cells per axis of the deterministic sweep.
    pub grid_per_axis: usize,
    /// Dedup radius; `None` means [`default_merge_radius`].
    pub merge_radius: Option<f64>,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self { grid_per_axis: 16, merge_radius: None }
    }
}

/// Registry from `probes` random ascents plus a 16-per-axis grid sweep.
pub fn build_registry<S: Objective + ?Sized>(surface: &S, init: &Initializer, probes: usize, cfg: &AscentConfig, seed: u64) -> Result<MaximaRegistry> {
    build_registry_with(surface, init, probes, cfg, seed, &ProbeOptions::default())
}

pub fn build_registry_with<S: Objective + ?Sized>(
    surface: &S,
    init: &Initializer,
    probes: usize,
    cfg: &AscentConfig,
    seed: u64,
    opts: &ProbeOptions,
) -> Result<MaximaRegistry> {
    if probes == 0 {
        return Err(Error::Config("build_registry needs probes >= 1".into()));
    }
    let domain = surface.domain();
    let mut starts = ascent::draw_starts(init, probes, seed);
    if opts.grid_per_axis > 0 {
        let grid = Grid::uniform(domain.clone(), opts.grid_per_axis)?;
        starts.extend((0..grid.len()).map(|c| grid.cell_center(c)));
    }
    let candidates = starts.iter().filter_map(|s| match ascent::ascend(surface, s, cfg) {
        Ok(r) if r.classification == Classification::LocalMax => Some(Maximum { location: r.convergent, value: r.value }),
        _ => None,
    });
    let radius = opts.merge_radius.unwrap_or_else(|| default_merge_radius(domain));
    MaximaRegistry::from_candidates(candidates, radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CellLabel {
    Basin(usize),
    Unresolved,
}

/// Basin labels of the cell centers of a grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinMap {
    pub grid: Grid,
    pub labels: Vec<CellLabel>,
}

impl BasinMap {
    /// Fraction of cells carrying each of the `k` basin labels.
    pub fn area_fractions(&self, k: usize) -> Vec<f64> {
        let mut counts = vec![0usize; k];
        for l in &self.labels {
            if let CellLabel::Basin(i) = l {
                if *i < k {
                    counts[*i] += 1;
                }
            }
        }
        counts.iter().map(|c| *c as f64 / self.labels.len() as f64).collect()
    }

    pub fn unresolved(&self) -> usize {
        self.labels.iter().filter(|l| **l == CellLabel::Unresolved).count()
    }

    /// Empirical basin boundary: midpoints between adjacent cells whose labels
    /// differ, plus the centers of unresolved cells.
    pub fn boundary_points(&self) -> Vec<Vec<f64>> {
        let d = self.grid.domain().dim();
        let mut points = Vec::new();
        for c in 0..self.labels.len() {
            let center = self.grid.cell_center(c);
            if self.labels[c] == CellLabel::Unresolved {
                points.push(center.clone());
            }
            for axis in 0..d {
                if let Some(nb) = self.grid.forward_neighbor(c, axis) {
                    if self.labels[nb] != self.labels[c] {
                        let other = self.grid.cell_center(nb);
                        points.push(center.iter().zip(&other).map(|(a, b)| 0.5 * (a + b)).collect());
                    }
                }
            }
        }
        points
    }
}

/// Ascends from every cell center of `grid` and labels the cell by the
/// registered maximum it reaches.
pub fn map_basins<S: Objective + ?Sized>(surface: &S, registry: &MaximaRegistry, grid: &Grid, cfg: &AscentConfig) -> Result<BasinMap> {
    if registry.is_empty() {
        return Err(Error::Landscape("empty registry".into()));
    }
    if !surface.domain().encloses(grid.domain()) {
        return Err(Error::Config("grid must lie inside the surface domain".into()));
    }
    let labels = (0..grid.len())
        .map(|c| match registry.label(&ascent::ascend(surface, &grid.cell_center(c), cfg)) {
            Some(i) => CellLabel::Basin(i),
            None => CellLabel::Unresolved,
        })
        .collect();
    Ok(BasinMap { grid: grid.clone(), labels })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum QMethod {
    MonteCarlo { draws: usize },
    GridWeighted { cells: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BasinProbabilities {
    pub q: Vec<f64>,
    /// Binomial standard errors (zero for grid weighting).
    pub se: Vec<f64>,
    pub tallies: Vec<usize>,
    pub unclassified: usize,
    pub method: QMethod,
}

impl BasinProbabilities {
    /// Probabilities given directly, e.g. for arithmetic checks.
    pub fn exact(q: Vec<f64>) -> Self {
        let k = q.len();
        Self { q, se: vec![0.0; k], tallies: vec![0; k], unclassified: 0, method: QMethod::GridWeighted { cells: 0 } }
    }

    pub fn from_tallies(tallies: Vec<usize>, unclassified: usize) -> Self {
        let r = tallies.iter().sum::<usize>() + unclassified;
        let rf = r.max(1) as f64;
        let q: Vec<f64> = tallies.iter().map(|t| *t as f64 / rf).collect();
        let se = q.iter().map(|p| (p * (1.0 - p) / rf).sqrt()).collect();
        Self { q, se, tallies, unclassified, method: QMethod::MonteCarlo { draws: r } }
    }

    /// Cell-count fractions of a basin map (uniform initialization over its grid).
    pub fn from_map(map: &BasinMap, k: usize) -> Self {
        let mut tallies = vec![0; k];
        for l in &map.labels {
            if let CellLabel::Basin(i) = l {
                tallies[*i] += 1;
            }
        }
        Self {
            q: map.area_fractions(k),
            se: vec![0.0; k],
            tallies,
            unclassified: map.unresolved(),
            method: QMethod::GridWeighted { cells: map.labels.len() },
        }
    }

    /// `Q_N = q_1 + ... + q_N`.
    pub fn cumulative(&self, n: usize) -> f64 {
        self.q.iter().take(n).sum()
    }
}

/// Monte Carlo basin probabilities: `r` draws from `init` (draw `i` on
/// stream `(seed, i)`), each ascended and tallied by registered maximum.
pub fn estimate_q<S: Objective + ?Sized>(
    surface: &S,
    registry: &MaximaRegistry,
    init: &Initializer,
    r: usize,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<BasinProbabilities> {
    if r == 0 {
        return Err(Error::Config("estimate_q needs R >= 1".into()));
    }
    let labels: Vec<Option<usize>> = (0..r as u64)
        .map(|i| registry.label(&ascent::ascend(surface, &init.draw_indexed(seed, i), cfg)))
        .collect();
    Ok(tally(&labels, registry.len()))
}

/// Aggregates per-draw labels into [`BasinProbabilities`].
pub fn tally(labels: &[Option<usize>], k: usize) -> BasinProbabilities {
    let mut tallies = vec![0; k];
    let mut unclassified = 0;
    for l in labels {
        match l {
            Some(i) => tallies[*i] += 1,
            None => unclassified += 1,
        }
    }
    BasinProbabilities::from_tallies(tallies, unclassified)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PrecisionSet {
    pub m: usize,
    pub delta: f64,
    pub n: usize,
    pub members: Vec<Maximum>,
    /// No `N` met the bound; every maximum was included.
    pub saturated: bool,
}

impl PrecisionSet {
    /// `(1 - Q_N)^M`, the probability that no run reaches the top `N`.
    pub fn miss_probability(q: &BasinProbabilities, n: usize, m: usize) -> f64 {
        (1.0 - q.cumulative(n)).max(0.0).powf(m as f64)
    }
}

/// Smallest `N` with `(1 - Q_N)^M <= delta`, and the top `N` maxima.
pub fn precision_set(registry: &MaximaRegistry, q: &BasinProbabilities, m: usize, delta: f64) -> Result<PrecisionSet> {
    if registry.is_empty() {
        return Err(Error::Landscape("empty registry".into()));
    }
    if !(delta > 0.0 && delta < 1.0) || m == 0 {
        return Err(Error::Config("precision set needs 0 < delta < 1 and M >= 1".into()));
    }
    if q.q.len() != registry.len() || !(q.q.iter().sum::<f64>() > 0.0) {
        return Err(Error::Config("basin probabilities must match the registry and have positive mass".into()));
    }
    let k = registry.len();
    let found = (1..=k).find(|&n| PrecisionSet::miss_probability(q, n, m) <= delta);
    let n = found.unwrap_or(k);
    Ok(PrecisionSet { m, delta, n, members: registry.maxima()[..n].to_vec(), saturated: found.is_none() })
}

/// Smallest `M` with `(1 - ball_mass)^M <= delta`.
pub fn min_initializations(delta: f64, ball_mass: f64) -> Result<usize> {
    if !(ball_mass > 0.0 && ball_mass < 1.0) {
        return Err(Error::Domain { point: vec![ball_mass] });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Config("min_initializations needs 0 < delta < 1".into()));
    }
    let miss = |m: usize| (1.0 - ball_mass).powf(m as f64);
    let mut m = (delta.ln() / (1.0 - ball_mass).ln()).ceil().max(1.0) as usize;
    // Guard the ceiling against rounding in the logarithms.
    while miss(m) > delta {
        m += 1;
    }
    while m > 1 && miss(m - 1) <= delta {
        m -= 1;
    }
    Ok(m)
}
