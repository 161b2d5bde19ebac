//! Built-in experiment fixtures and their cached population truth.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use anyhow::{anyhow, bail};
use msinfer_core::ascent::Initializer;
use msinfer_core::em::{em_run, WeightedSample, DEFAULT_MAX_ITER, DEFAULT_TOL};
use msinfer_core::infer::TauFunction;
use msinfer_core::landscape::{build_registry, estimate_q, precision_set, BasinProbabilities, MaximaRegistry, Maximum, PrecisionSet};
use msinfer_core::model::{simulate, GaussianMixture, MixtureFit, Model, NormalLocation, Objective, PopulationSurface, SurfaceKind};
use msinfer_core::nalgebra::{DMatrix, DVector};
use msinfer_core::rng::derive_seed;
use msinfer_core::{Dataset, Domain};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InitSpec, Method};

/// Seed root for everything computed about the population, so the truth is a
/// property of the fixture and not of the master seed.
const POPULATION_SEED: u64 = 0x5eed_0f_7a7e;

/// Size of the population proxy sample for data-driven initializers.
const PROXY_N: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// `N(theta, 1)` location model, truth `theta = 0`.
    NormalLocation,
    /// Two-component fit with sd 0.2 and the first mean pinned at 0 to the
    /// three-component truth `0.5 N(0, 0.04) + 0.45 N(0.75, 0.04) + 0.05 N(3, 0.04)`.
    Figure1,
    /// Standard normal data for mode hunting; the mode is 0.
    NormalMode,
}

impl Fixture {
    pub fn parse(id: &str) -> anyhow::Result<Self> {
        match id {
            "normal-location" => Ok(Self::NormalLocation),
            "figure1" => Ok(Self::Figure1),
            "normal-mode" => Ok(Self::NormalMode),
            other => bail!(
                "no population registry is available for model `{other}`; coverage runs need one of the fixtures \
                 `normal-location`, `figure1`, `normal-mode`"
            ),
        }
    }

    pub fn truth(self) -> GaussianMixture {
        match self {
            Self::Figure1 => GaussianMixture::figure1(),
            Self::NormalLocation | Self::NormalMode => GaussianMixture::normal(0.0, 1.0).expect("static truth"),
        }
    }

    /// Parametric model, absent for the nonparametric mode fixture.
    pub fn model(self) -> Option<FixtureModel> {
        match self {
            Self::NormalLocation => Some(FixtureModel::Location(
                NormalLocation::new(1.0, Domain::cube(1, -5.0, 5.0).expect("static domain")).expect("static model"),
            )),
            Self::Figure1 => Some(FixtureModel::Mixture(MixtureFit::figure1())),
            Self::NormalMode => None,
        }
    }

    /// Default initialization box.
    pub fn default_box(self) -> Domain {
        match self {
            Self::NormalLocation => Domain::cube(1, -5.0, 5.0),
            Self::Figure1 => Domain::new(vec![0.0, 0.01], vec![4.0, 0.99]),
            Self::NormalMode => Domain::cube(1, -4.0, 4.0),
        }
        .expect("static domain")
    }

    fn integration_interval(self) -> (f64, f64) {
        match self {
            Self::Figure1 => (-2.0, 5.0),
            Self::NormalLocation | Self::NormalMode => (-9.0, 9.0),
        }
    }

    pub fn population(self) -> anyhow::Result<Option<PopulationSurface<FixtureModel>>> {
        let Some(model) = self.model() else { return Ok(None) };
        let (lo, hi) = self.integration_interval();
        Ok(Some(PopulationSurface::with_interval(model, self.truth(), lo, hi)?))
    }
}

/// The fixtures' parametric models behind one type.
#[derive(Debug, Clone, PartialEq)]
pub enum FixtureModel {
    Location(NormalLocation),
    Mixture(MixtureFit),
}

impl FixtureModel {
    pub fn mixture(&self) -> Option<&MixtureFit> {
        match self {
            Self::Mixture(m) => Some(m),
            Self::Location(_) => None,
        }
    }

    fn inner(&self) -> &dyn Model {
        match self {
            Self::Location(m) => m,
            Self::Mixture(m) => m,
        }
    }
}

impl Model for FixtureModel {
    fn param_dim(&self) -> usize {
        self.inner().param_dim()
    }

    fn obs_dim(&self) -> usize {
        self.inner().obs_dim()
    }

    fn domain(&self) -> &Domain {
        self.inner().domain()
    }

    fn log_density(&self, theta: &[f64], x: &[f64]) -> f64 {
        self.inner().log_density(theta, x)
    }

    fn log_density_grad(&self, theta: &[f64], x: &[f64], grad: &mut [f64]) -> f64 {
        self.inner().log_density_grad(theta, x, grad)
    }

    fn log_density_hess(&self, theta: &[f64], x: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        self.inner().log_density_hess(theta, x, grad, hess)
    }

    fn analytic_derivatives(&self) -> bool {
        self.inner().analytic_derivatives()
    }
}

/// Expected Gaussian KDE of standard normal data at bandwidth `h`: the
/// `N(0, 1 + h^2)` density, as an objective on `[-4, 4]`.
#[derive(Debug, Clone)]
pub struct SmoothedNormal {
    var: f64,
    domain: Domain,
}

impl SmoothedNormal {
    pub fn new(h: f64) -> Self {
        Self { var: 1.0 + h * h, domain: Fixture::NormalMode.default_box() }
    }
}

impl Objective for SmoothedNormal {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn kind(&self) -> SurfaceKind {
        SurfaceKind::PopulationAnalytic
    }

    fn value(&self, t: &[f64]) -> msinfer_core::Result<f64> {
        self.domain.check(t)?;
        Ok((-0.5 * t[0] * t[0] / self.var).exp() / (2.0 * std::f64::consts::PI * self.var).sqrt())
    }

    fn value_gradient(&self, t: &[f64]) -> msinfer_core::Result<(f64, DVector<f64>)> {
        let p = self.value(t)?;
        Ok((p, DVector::from_element(1, -p * t[0] / self.var)))
    }

    fn hessian(&self, t: &[f64]) -> msinfer_core::Result<DMatrix<f64>> {
        let p = self.value(t)?;
        Ok(DMatrix::from_element(1, 1, p * (t[0] * t[0] / self.var - 1.0) / self.var))
    }
}

/// Builds the initializer a spec describes; data-driven specs use `data`.
pub fn initializer(spec: &InitSpec, domain: &Domain, data: &Dataset) -> anyhow::Result<Initializer> {
    Ok(match spec {
        InitSpec::Uniform { lo, hi } => {
            let b = Domain::new(lo.clone(), hi.clone())?;
            if !domain.encloses(&b) {
                bail!("initialization box must lie inside the parameter domain");
            }
            Initializer::uniform(b)
        }
        InitSpec::Empirical => Initializer::empirical(data.clone(), domain.clone()),
        InitSpec::GaussianFit => Initializer::gaussian_fit(data, domain.clone())?,
        InitSpec::PointMass { point } => Initializer::point_mass(point.clone(), domain.clone())?,
    })
}

pub fn init_spec(cfg: &ExperimentConfig, fixture: Fixture) -> InitSpec {
    cfg.init.clone().unwrap_or_else(|| {
        let b = fixture.default_box();
        InitSpec::Uniform { lo: b.lo().to_vec(), hi: b.hi().to_vec() }
    })
}

pub fn is_data_driven(spec: &InitSpec) -> bool {
    matches!(spec, InitSpec::Empirical | InitSpec::GaussianFit)
}

/// Population counterpart of the configured initializer: the same spec, fed
/// a large sample from the truth when it is data-driven.
pub fn population_initializer(cfg: &ExperimentConfig, fixture: Fixture, domain: &Domain) -> anyhow::Result<Initializer> {
    let spec = init_spec(cfg, fixture);
    let proxy = if is_data_driven(&spec) {
        simulate(&fixture.truth(), PROXY_N, derive_seed(POPULATION_SEED, 1))?
    } else {
        Dataset::from_scalars(vec![0.0])?
    };
    initializer(&spec, domain, &proxy)
}

/// Population quantities every trial is scored against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationTruth {
    pub registry: MaximaRegistry,
    pub q: BasinProbabilities,
    pub precision_set: PrecisionSet,
    /// Global maximizer of the population objective.
    pub mle: Vec<f64>,
    pub tau_mle: f64,
    /// `tau` at each precision-set member.
    pub tau_precision_set: Vec<f64>,
    /// Probability that population EM from one draw reaches the MLE.
    pub q_em: Option<f64>,
    pub em_draws: usize,
}

impl PopulationTruth {
    pub fn q1(&self) -> f64 {
        self.q.q[0]
    }
}

type Cache = Mutex<BTreeMap<String, Arc<PopulationTruth>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(BTreeMap::new()))
}

/// Computes (or fetches) the population truth for `cfg`'s fixture.
pub fn population_truth(cfg: &ExperimentConfig) -> anyhow::Result<Arc<PopulationTruth>> {
    let fixture = Fixture::parse(&cfg.fixture)?;
    let key = serde_json::to_string(&(
        &cfg.fixture,
        init_spec(cfg, fixture),
        &cfg.tau,
        cfg.m,
        cfg.delta,
        cfg.q_draws,
        cfg.methods.contains(&Method::EmNormal).then_some(cfg.em_q_draws),
        cfg.registry_probes,
        &cfg.ascent,
    ))?;
    if let Some(hit) = cache().lock().expect("population cache").get(&key) {
        return Ok(hit.clone());
    }
    let truth = Arc::new(compute_truth(cfg, fixture)?);
    cache().lock().expect("population cache").insert(key, truth.clone());
    Ok(truth)
}

fn compute_truth(cfg: &ExperimentConfig, fixture: Fixture) -> anyhow::Result<PopulationTruth> {
    let Some(pop) = fixture.population()? else {
        // Unimodal density: the mode is 0 and every start reaches it.
        let top = Maximum { location: vec![0.0], value: SmoothedNormal::new(0.0).value(&[0.0])? };
        let registry = MaximaRegistry::from_candidates([top.clone()], 1e-3)?;
        let q = BasinProbabilities::exact(vec![1.0]);
        let precision_set = precision_set(&registry, &q, cfg.m, cfg.delta)?;
        return Ok(PopulationTruth {
            registry,
            q,
            precision_set,
            mle: vec![0.0],
            tau_mle: 0.0,
            tau_precision_set: vec![0.0],
            q_em: None,
            em_draws: 0,
        });
    };
    let init = population_initializer(cfg, fixture, pop.domain())?;
    let registry = build_registry(&pop, &init, cfg.registry_probes, &cfg.ascent, derive_seed(POPULATION_SEED, 2))?;
    let q = estimate_q(&pop, &registry, &init, cfg.q_draws, &cfg.ascent, derive_seed(POPULATION_SEED, 3))?;
    let precision_set = precision_set(&registry, &q, cfg.m, cfg.delta)?;
    let mle = registry.maxima()[0].location.clone();
    let tau_precision_set = precision_set.members.iter().map(|m| cfg.tau.eval(&m.location)).collect();
    let (q_em, em_draws) = match (cfg.methods.contains(&Method::EmNormal), fixture.model()) {
        (true, Some(FixtureModel::Mixture(model))) => {
            let (lo, hi) = fixture.integration_interval();
            let sample = WeightedSample::population(&fixture.truth(), lo, hi)?;
            let seed = derive_seed(POPULATION_SEED, 4);
            let hits = (0..cfg.em_q_draws as u64)
                .filter(|&i| {
                    em_run(&model, &sample, &init.draw_indexed(seed, i), DEFAULT_TOL, DEFAULT_MAX_ITER)
                        .is_ok_and(|r| registry.nearest(&r.terminal.theta) == Some(0) && distance(&r.terminal.theta, &mle) <= registry.merge_radius())
                })
                .count();
            (Some(hits as f64 / cfg.em_q_draws as f64), cfg.em_q_draws)
        }
        (true, _) => return Err(anyhow!("em-normal needs a mixture fixture")),
        _ => (None, 0),
    };
    Ok(PopulationTruth { tau_mle: cfg.tau.eval(&mle), registry, q, precision_set, mle, tau_precision_set, q_em, em_draws })
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
