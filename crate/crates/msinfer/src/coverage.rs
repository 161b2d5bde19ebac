//! Monte Carlo coverage experiments against the population truth.

use anyhow::{anyhow, bail};
use msinfer_core::ascent::{multistart, AscentConfig, Initializer};
use msinfer_core::boot::bootstrap_ci;
use msinfer_core::diagnostics::{geometric_ladder, measure_basin_gaps, measure_gaps, UncertaintyLedger};
use msinfer_core::em::{em_multistart, em_normal_ci, WeightedSample, DEFAULT_MAX_ITER, DEFAULT_TOL};
use msinfer_core::infer::{lrt_region, normal_ci, sandwich_cov, score_region, wald_region, ConfidenceInterval, ConfidenceRegion, CovarianceKind};
use msinfer_core::landscape::map_basins;
use msinfer_core::model::{simulate, Objective, SampleSurface, SurfaceKind};
use msinfer_core::modehunt::{bandwidth_rule, mode_bootstrap_ci, Kde};
use msinfer_core::nalgebra::{DMatrix, DVector};
use msinfer_core::rng::derive_seed;
use msinfer_core::twosample::two_sample_test;
use msinfer_core::{Dataset, Domain, Grid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method};
use crate::fixture::{self, Fixture, FixtureModel, PopulationTruth, SmoothedNormal};

/// How region-valued methods are scored against the precision set.
pub const REGION_CERTIFICATION: &str = "membership of each population maximum (a sufficient condition for the tau-image to intersect)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub method: Method,
    pub trials: usize,
    /// Trials where the pipeline errored; they count as misses.
    pub failed: usize,
    pub hits_precision_set: usize,
    pub hits_mle: usize,
    pub rate_precision_set: f64,
    pub rate_mle: f64,
    /// Binomial standard errors of the empirical rates.
    pub se_precision_set: f64,
    pub se_mle: f64,
    /// `1 - alpha - delta`.
    pub target_precision_set: f64,
    /// `1 - alpha - (1 - q_1)^M`, with the EM basin probability for em-normal.
    pub target_mle: f64,
    /// Allowed shortfall: three binomial SEs at the target rate.
    pub tolerance_precision_set: f64,
    pub tolerance_mle: f64,
    pub pass_precision_set: bool,
    pub pass_mle: bool,
}

/// Rejection rate of the permutation test when both samples share the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Type1Summary {
    pub trials: usize,
    pub failed: usize,
    pub rejections: usize,
    pub rate: f64,
    pub se: f64,
    pub nominal: f64,
    /// Three binomial SEs at the nominal rate.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub config: ExperimentConfig,
    pub population: PopulationTruth,
    pub methods: Vec<MethodCoverage>,
    pub type1: Option<Type1Summary>,
    pub ledger: UncertaintyLedger,
    pub region_certification: String,
    pub pass: bool,
}

fn se(p: f64, t: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (p * (1.0 - p) / t as f64).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct Hit {
    precision_set: bool,
    mle: bool,
    failed: bool,
}

impl Hit {
    fn failed() -> Self {
        Self { failed: true, ..Self::default() }
    }

    fn interval(ci: &ConfidenceInterval, truth: &PopulationTruth) -> Self {
        Self {
            precision_set: truth.tau_precision_set.iter().any(|t| ci.contains(*t)),
            mle: ci.contains(truth.tau_mle),
            failed: false,
        }
    }

    fn region<R: ConfidenceRegion + ?Sized>(region: &R, truth: &PopulationTruth) -> Self {
        let inside = |p: &[f64]| region.contains(p).unwrap_or(false);
        Self {
            precision_set: truth.precision_set.members.iter().any(|m| inside(&m.location)),
            mle: inside(&truth.mle),
            failed: false,
        }
    }
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    fixture: Fixture,
    model: Option<FixtureModel>,
    truth: &'a PopulationTruth,
}

/// Seed of trial `i`; everything in the trial derives from it.
pub fn trial_seed(master: u64, i: usize) -> u64 {
    derive_seed(master, i as u64)
}

/// Simulated data of trial `i`.
pub fn trial_data(cfg: &ExperimentConfig, i: usize) -> anyhow::Result<Dataset> {
    let fixture = Fixture::parse(&cfg.fixture)?;
    Ok(simulate(&fixture.truth(), cfg.n, derive_seed(trial_seed(cfg.seed, i), 0))?)
}

impl Context<'_> {
    fn run_trial(&self, i: usize) -> (Vec<Hit>, Option<Option<bool>>) {
        let cfg = self.cfg;
        let ts = trial_seed(cfg.seed, i);
        let truth_dist = self.fixture.truth();
        let Ok(data) = simulate(&truth_dist, cfg.n, derive_seed(ts, 0)) else {
            return (vec![Hit::failed(); cfg.methods.len()], None);
        };
        let mut hits = Vec::with_capacity(cfg.methods.len());
        let mut type1 = None;
        let fitted = self.model.as_ref().map(|model| -> anyhow::Result<_> {
            let init = fixture::initializer(&fixture::init_spec(cfg, self.fixture), model.domain_ref(), &data)?;
            let surface = SampleSurface::new(model, &data)?;
            let fit = multistart(&surface, &init, cfg.m, &cfg.ascent, derive_seed(ts, 1))?;
            Ok(fit.estimator().to_vec())
        });
        for method in &cfg.methods {
            let hit = match method {
                Method::TwoSample => {
                    type1 = Some(self.two_sample(&data, ts).ok());
                    Hit::default()
                }
                Method::ModeBall => self.mode_ball(&data, ts).unwrap_or_else(|_| Hit::failed()),
                Method::EmNormal => self.em_normal(&data, ts).unwrap_or_else(|_| Hit::failed()),
                m => match &fitted {
                    Some(Ok(theta)) => self.parametric(*m, &data, theta, ts).unwrap_or_else(|_| Hit::failed()),
                    _ => Hit::failed(),
                },
            };
            hits.push(hit);
        }
        (hits, type1)
    }

    fn model(&self) -> anyhow::Result<&FixtureModel> {
        self.model.as_ref().ok_or_else(|| anyhow!("fixture `{}` has no parametric model", self.cfg.fixture))
    }

    fn parametric(&self, method: Method, data: &Dataset, theta: &[f64], ts: u64) -> anyhow::Result<Hit> {
        let cfg = self.cfg;
        let model = self.model()?;
        let surface = SampleSurface::new(model, data)?;
        let n = data.n();
        Ok(match method {
            Method::Normal => {
                let cov = sandwich_cov(&surface, theta)?;
                Hit::interval(&normal_ci(theta, &cov, &cfg.tau, n, cfg.alpha)?, self.truth)
            }
            Method::Wald => {
                let cov = sandwich_cov(&surface, theta)?;
                Hit::region(&wald_region(theta, &cov, n, cfg.alpha)?, self.truth)
            }
            Method::Lrt => Hit::region(&lrt_region(&surface, theta, n, cfg.alpha)?, self.truth),
            Method::Score => Hit::region(&score_region(&surface, cfg.alpha)?, self.truth),
            Method::Bootstrap => {
                let (ci, _) = bootstrap_ci(data, model, theta, &cfg.tau, cfg.b, cfg.alpha, &cfg.ascent, derive_seed(ts, 2))?;
                Hit::interval(&ci, self.truth)
            }
            other => bail!("{} is not a parametric method", other.name()),
        })
    }

    fn em_normal(&self, data: &Dataset, ts: u64) -> anyhow::Result<Hit> {
        let cfg = self.cfg;
        let mixture = self.model()?.mixture().ok_or_else(|| anyhow!("em-normal needs a mixture fixture"))?;
        let init = fixture::initializer(&fixture::init_spec(cfg, self.fixture), msinfer_core::model::Model::domain(mixture), data)?;
        let sample = WeightedSample::from_dataset(data)?;
        let fit = em_multistart(mixture, &sample, &init, cfg.m, DEFAULT_TOL, DEFAULT_MAX_ITER, derive_seed(ts, 3))?;
        let ci = em_normal_ci(mixture, data, fit.estimator(), &cfg.tau, cfg.alpha, CovarianceKind::Sandwich)?;
        Ok(Hit::interval(&ci, self.truth))
    }

    fn mode_ball(&self, data: &Dataset, ts: u64) -> anyhow::Result<Hit> {
        let h = bandwidth_rule(data, self.cfg.bandwidth)?;
        let ball = mode_bootstrap_ci(data, h, self.cfg.b, self.cfg.alpha, derive_seed(ts, 4))?;
        Ok(Hit {
            precision_set: self.truth.precision_set.members.iter().any(|m| ball.contains(&m.location)),
            mle: ball.contains(&self.truth.mle),
            failed: false,
        })
    }

    fn two_sample(&self, x: &Dataset, ts: u64) -> anyhow::Result<bool> {
        let cfg = self.cfg;
        let model = self.model()?;
        let y = simulate(&self.fixture.truth(), cfg.n, derive_seed(ts, 5))?;
        let pooled = x.concat(&y)?;
        let init = fixture::initializer(&fixture::init_spec(cfg, self.fixture), model.domain_ref(), &pooled)?;
        let r = two_sample_test(x, &y, model, &init, cfg.m, cfg.permutations, &cfg.ascent, derive_seed(ts, 6))?;
        Ok(r.p_value <= cfg.alpha)
    }
}

impl FixtureModel {
    fn domain_ref(&self) -> &Domain {
        msinfer_core::model::Model::domain(self)
    }
}

/// Runs `cfg.trials` independent trials; trial `i` depends only on
/// `(cfg, cfg.seed, i)`.
pub fn run_coverage(cfg: &ExperimentConfig) -> anyhow::Result<CoverageReport> {
    cfg.validate()?;
    let fixture = Fixture::parse(&cfg.fixture)?;
    if cfg.methods.is_empty() {
        bail!("no methods configured");
    }
    for m in &cfg.methods {
        let ok = match m {
            Method::ModeBall => fixture == Fixture::NormalMode,
            Method::EmNormal => fixture == Fixture::Figure1,
            _ => fixture != Fixture::NormalMode,
        };
        if !ok {
            bail!("method {} is not available for fixture {}", m.name(), cfg.fixture);
        }
    }
    let truth = fixture::population_truth(cfg)?;
    let ctx = Context { cfg, fixture, model: fixture.model(), truth: &truth };
    let outcomes: Vec<_> = (0..cfg.trials).into_par_iter().map(|i| ctx.run_trial(i)).collect();

    let t = cfg.trials;
    let methods: Vec<MethodCoverage> = cfg
        .methods
        .iter()
        .enumerate()
        .filter(|(_, m)| **m != Method::TwoSample)
        .map(|(j, m)| {
            let count = |f: fn(&Hit) -> bool| outcomes.iter().filter(|o| f(&o.0[j])).count();
            let (hp, hm, failed) = (count(|h| h.precision_set), count(|h| h.mle), count(|h| h.failed));
            let q = match m {
                Method::EmNormal => truth.q_em.unwrap_or(0.0),
                _ => truth.q1(),
            };
            let target_ps = 1.0 - cfg.alpha - cfg.delta;
            let target_mle = 1.0 - cfg.alpha - (1.0 - q).powf(cfg.m as f64);
            let (rp, rm) = (hp as f64 / t as f64, hm as f64 / t as f64);
            let (tol_ps, tol_mle) = (3.0 * se(target_ps, t), 3.0 * se(target_mle, t));
            MethodCoverage {
                method: *m,
                trials: t,
                failed,
                hits_precision_set: hp,
                hits_mle: hm,
                rate_precision_set: rp,
                rate_mle: rm,
                se_precision_set: se(rp, t),
                se_mle: se(rm, t),
                target_precision_set: target_ps,
                target_mle,
                tolerance_precision_set: tol_ps,
                tolerance_mle: tol_mle,
                pass_precision_set: rp >= target_ps - tol_ps,
                pass_mle: rm >= target_mle - tol_mle,
            }
        })
        .collect();

    let type1 = cfg.methods.contains(&Method::TwoSample).then(|| {
        let results: Vec<Option<bool>> = outcomes.iter().map(|o| o.1.flatten()).collect();
        let failed = results.iter().filter(|r| r.is_none()).count();
        let rejections = results.iter().filter(|r| **r == Some(true)).count();
        let rate = rejections as f64 / t as f64;
        let tolerance = 3.0 * se(cfg.alpha, t);
        Type1Summary {
            trials: t,
            failed,
            rejections,
            rate,
            se: se(rate, t),
            nominal: cfg.alpha,
            tolerance,
            pass: failed == 0 && (rate - cfg.alpha).abs() <= tolerance,
        }
    });

    let ledger = uncertainty_ledger(cfg, fixture, &truth)?;
    let pass = methods.iter().all(|m| m.pass_precision_set && m.pass_mle) && type1.as_ref().is_none_or(|s| s.pass);
    Ok(CoverageReport {
        config: cfg.clone(),
        population: (*truth).clone(),
        methods,
        type1,
        ledger,
        region_certification: REGION_CERTIFICATION.into(),
        pass,
    })
}

/// An objective seen on another box; used to compare surfaces that carry
/// different natural domains.
struct OnDomain<'a> {
    inner: &'a dyn Objective,
    domain: Domain,
}

impl Objective for OnDomain<'_> {
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn kind(&self) -> SurfaceKind {
        self.inner.kind()
    }
    fn value(&self, t: &[f64]) -> msinfer_core::Result<f64> {
        self.inner.value(t)
    }
    fn value_gradient(&self, t: &[f64]) -> msinfer_core::Result<(f64, DVector<f64>)> {
        self.inner.value_gradient(t)
    }
    fn hessian(&self, t: &[f64]) -> msinfer_core::Result<DMatrix<f64>> {
        self.inner.hessian(t)
    }
}

/// Gap diagnostics on trial 0's data.
pub fn uncertainty_ledger(cfg: &ExperimentConfig, fixture: Fixture, truth: &PopulationTruth) -> anyhow::Result<UncertaintyLedger> {
    let data = trial_data(cfg, 0)?;
    let radii = geometric_ladder(cfg.ledger_radii.r0, cfg.ledger_radii.factor, cfg.ledger_radii.count);
    let ascent = AscentConfig { record_trajectory: false, ..cfg.ascent.clone() };
    let k = truth.registry.len();
    let (gaps, basins) = match fixture.population()? {
        Some(pop) => {
            let model = fixture.model().expect("parametric fixture");
            let sample = SampleSurface::new(&model, &data)?;
            let init_pop = fixture::population_initializer(cfg, fixture, pop.domain())?;
            let init_sample = fixture::initializer(&fixture::init_spec(cfg, fixture), pop.domain(), &data)?;
            let grid = Grid::uniform(init_pop.domain().clone(), cfg.ledger_grid)?;
            let gaps = measure_gaps(&pop, &sample, &grid)?;
            let map = map_basins(&pop, &truth.registry, &grid, &ascent)?;
            let basins = measure_basin_gaps(&map, k, &init_sample, &init_pop, cfg.q_draws, &radii, derive_seed(cfg.seed, u64::MAX))?;
            (gaps, basins)
        }
        None => {
            let h = bandwidth_rule(&data, cfg.bandwidth)?;
            let pop = SmoothedNormal::new(h);
            let kde = Kde::new(data.clone(), h)?;
            let sample = OnDomain { inner: &kde, domain: pop.domain().clone() };
            let grid = Grid::uniform(pop.domain().clone(), cfg.ledger_grid)?;
            let gaps = measure_gaps(&pop, &sample, &grid)?;
            let map = map_basins(&pop, &truth.registry, &grid, &ascent)?;
            let init_pop = Initializer::uniform(pop.domain().clone());
            let init_sample = Initializer::empirical(data, pop.domain().clone());
            let basins = measure_basin_gaps(&map, k, &init_sample, &init_pop, cfg.q_draws, &radii, derive_seed(cfg.seed, u64::MAX))?;
            (gaps, basins)
        }
    };
    Ok(UncertaintyLedger::assemble(&gaps, &basins, truth.q1(), cfg.m))
}
