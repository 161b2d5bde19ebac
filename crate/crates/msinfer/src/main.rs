use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use msinfer::config::{ExperimentConfig, Method};
use msinfer::coverage::run_coverage;
use msinfer::fixture::{self, Fixture, FixtureModel};
use msinfer::io;
use msinfer_core::ascent::{multistart, AscentConfig, Initializer};
use msinfer_core::boot::bootstrap_ci;
use msinfer_core::em::{em_multistart, em_normal_ci, WeightedSample, DEFAULT_MAX_ITER, DEFAULT_TOL};
use msinfer_core::infer::{
    extract, lrt_region, normal_ci, sandwich_cov, score_region, tau_image, wald_region, ConfidenceInterval, ConfidenceRegion, CovarianceKind,
    Extraction, TauFunction, TauImage,
};
use msinfer_core::landscape::{map_basins, BasinProbabilities};
use msinfer_core::model::{simulate, Model, SampleSurface};
use msinfer_core::modehunt::{bandwidth_rule, mode_bootstrap_ci, mode_estimate};
use msinfer_core::rng::derive_seed;
use msinfer_core::twosample::{ci_overlap, two_sample_test};
use msinfer_core::{Dataset, Grid};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "msinfer", version, about = "Multi-start estimation, basin analysis and confidence sets")]
struct Cli {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiKind {
    Normal,
    Wald,
    Lrt,
    Score,
    Bootstrap,
    EmNormal,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a sample from the fixture truth.
    Simulate,
    /// Multi-start gradient ascent on the sample likelihood.
    Fit {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Population maxima, basin probabilities, precision set and basin raster.
    Basins,
    /// One confidence construction at the multi-start estimate.
    Ci {
        #[arg(long, value_enum)]
        method: CiKind,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Percentile bootstrap interval.
    Bootstrap {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Multi-start EM for the mixture fixture.
    Em {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// KDE mode and bootstrap mode ball.
    Mode {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Pooled-anchor permutation test.
    Twosample {
        #[arg(long, requires = "data_y")]
        data_x: Option<PathBuf>,
        #[arg(long)]
        data_y: Option<PathBuf>,
    },
    /// Monte Carlo coverage experiment.
    Coverage,
    /// CSV plot data from a coverage report.
    EmitPlots {
        #[arg(long)]
        report: PathBuf,
    },
}

struct Env {
    cfg: ExperimentConfig,
    fixture: Fixture,
    out: PathBuf,
}

impl Env {
    fn model(&self) -> anyhow::Result<FixtureModel> {
        self.fixture.model().ok_or_else(|| anyhow!("fixture `{}` has no parametric model", self.cfg.fixture))
    }

    /// Data from `path`, or a sample of size `n` from the fixture truth.
    fn data(&self, path: Option<&Path>, stream: u64) -> anyhow::Result<Dataset> {
        match path {
            Some(p) => io::read_dataset(p),
            None => Ok(simulate(&self.fixture.truth(), self.cfg.n, derive_seed(self.cfg.seed, stream))?),
        }
    }

    fn initializer(&self, model: &FixtureModel, data: &Dataset) -> anyhow::Result<Initializer> {
        fixture::initializer(&fixture::init_spec(&self.cfg, self.fixture), model.domain(), data)
    }

    fn fit(&self, model: &FixtureModel, data: &Dataset, ascent: &AscentConfig) -> anyhow::Result<msinfer_core::ascent::MultistartOutcome> {
        let init = self.initializer(model, data)?;
        let surface = SampleSurface::new(model, data)?;
        Ok(multistart(&surface, &init, self.cfg.m, ascent, derive_seed(self.cfg.seed, 100))?)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct RunView {
    start: Vec<f64>,
    convergent: Option<Vec<f64>>,
    value: Option<f64>,
    iterations: Option<usize>,
    termination: Option<String>,
    classification: Option<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct FitReport {
    fixture: String,
    seed: u64,
    n: usize,
    m: usize,
    estimator: Vec<f64>,
    value: f64,
    selected: usize,
    failures: usize,
    runs: Vec<RunView>,
}

#[derive(Serialize)]
struct RegionSummary {
    resolution: usize,
    members: usize,
    excluded_fraction: f64,
    tau_image: Option<TauImage>,
}

#[derive(Serialize)]
struct CiReport {
    method: String,
    seed: u64,
    theta_hat: Vec<f64>,
    tau_hat: f64,
    interval: Option<ConfidenceInterval>,
    region: Option<RegionSummary>,
}

fn simulate_cmd(env: &Env) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Summary {
        fixture: String,
        n: usize,
        seed: u64,
        mean: Vec<f64>,
        sd: Vec<f64>,
    }
    let data = env.data(None, 0)?;
    io::write_dataset(&env.path("data.txt"), &data)?;
    io::write_json(
        &env.path("simulate.json"),
        &Summary { fixture: env.cfg.fixture.clone(), n: data.n(), seed: env.cfg.seed, mean: data.mean(), sd: data.sd() },
    )
}

fn fit_cmd(env: &Env, data: Option<&Path>) -> anyhow::Result<()> {
    let model = env.model()?;
    let data = env.data(data, 0)?;
    let ascent = AscentConfig { record_trajectory: true, ..env.cfg.ascent.clone() };
    let fit = env.fit(&model, &data, &ascent)?;
    let runs = fit
        .starts
        .iter()
        .zip(&fit.runs)
        .map(|(s, r)| match r {
            Ok(r) => RunView {
                start: s.clone(),
                convergent: Some(r.convergent.clone()),
                value: Some(r.value),
                iterations: Some(r.iterations),
                termination: Some(format!("{:?}", r.termination)),
                classification: Some(format!("{:?}", r.classification)),
                error: None,
            },
            Err(e) => RunView {
                start: s.clone(),
                convergent: None,
                value: None,
                iterations: None,
                termination: None,
                classification: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let trajectories: Vec<_> = fit.runs.iter().map(|r| r.as_ref().map(|r| r.trajectory.clone()).unwrap_or_default()).collect();
    io::emit_trajectories(&env.path("trajectories.csv"), model.param_dim(), &trajectories)?;
    io::write_json(
        &env.path("fit.json"),
        &FitReport {
            fixture: env.cfg.fixture.clone(),
            seed: env.cfg.seed,
            n: data.n(),
            m: env.cfg.m,
            estimator: fit.estimator().to_vec(),
            value: fit.value(),
            selected: fit.selected,
            failures: fit.failures(),
            runs,
        },
    )
}

fn basins_cmd(env: &Env) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct BasinReport<'a> {
        population: &'a fixture::PopulationTruth,
        grid: usize,
        area_fractions: BasinProbabilities,
        boundary_points: usize,
    }
    let truth = fixture::population_truth(&env.cfg)?;
    let Some(pop) = env.fixture.population()? else {
        bail!("fixture `{}` has no parametric population surface", env.cfg.fixture);
    };
    let init = fixture::population_initializer(&env.cfg, env.fixture, msinfer_core::model::Objective::domain(&pop))?;
    let grid = Grid::uniform(init.domain().clone(), env.cfg.ledger_grid)?;
    let map = map_basins(&pop, &truth.registry, &grid, &env.cfg.ascent)?;
    io::emit_basin_map(&env.path("basins.csv"), &map)?;
    io::write_json(
        &env.path("basins.json"),
        &BasinReport {
            population: &truth,
            grid: env.cfg.ledger_grid,
            area_fractions: BasinProbabilities::from_map(&map, truth.registry.len()),
            boundary_points: map.boundary_points().len(),
        },
    )
}

fn region_summary<R: ConfidenceRegion>(env: &Env, region: &R, init: &Initializer) -> anyhow::Result<(RegionSummary, Option<Extraction>)> {
    if region.dim() > 2 {
        return Ok((RegionSummary { resolution: 0, members: 0, excluded_fraction: 0.0, tau_image: None }, None));
    }
    let grid = Grid::uniform(init.domain().clone(), env.cfg.region_grid)?;
    let ex = extract(region, &grid)?;
    let image = tau_image(&ex, &env.cfg.tau).ok();
    Ok((
        RegionSummary { resolution: env.cfg.region_grid, members: ex.member_count(), excluded_fraction: ex.excluded_fraction(), tau_image: image },
        Some(ex),
    ))
}

fn ci_cmd(env: &Env, kind: CiKind, data: Option<&Path>) -> anyhow::Result<()> {
    let cfg = &env.cfg;
    let model = env.model()?;
    let data = env.data(data, 0)?;
    let n = data.n();
    let (theta, interval, region) = if let CiKind::EmNormal = kind {
        let mixture = model.mixture().ok_or_else(|| anyhow!("em-normal needs a mixture fixture"))?;
        let init = env.initializer(&model, &data)?;
        let sample = WeightedSample::from_dataset(&data)?;
        let fit = em_multistart(mixture, &sample, &init, cfg.m, DEFAULT_TOL, DEFAULT_MAX_ITER, derive_seed(cfg.seed, 101))?;
        let theta = fit.estimator().to_vec();
        let ci = em_normal_ci(mixture, &data, &theta, &cfg.tau, cfg.alpha, CovarianceKind::Sandwich)?;
        (theta, Some(ci), None)
    } else {
        let theta = env.fit(&model, &data, &cfg.ascent)?.estimator().to_vec();
        let surface = SampleSurface::new(&model, &data)?;
        let init = env.initializer(&model, &data)?;
        match kind {
            CiKind::Normal => {
                let cov = sandwich_cov(&surface, &theta)?;
                let ci = normal_ci(&theta, &cov, &cfg.tau, n, cfg.alpha)?;
                (theta, Some(ci), None)
            }
            CiKind::Bootstrap => {
                let (ci, _) = bootstrap_ci(&data, &model, &theta, &cfg.tau, cfg.b, cfg.alpha, &cfg.ascent, derive_seed(cfg.seed, 102))?;
                (theta, Some(ci), None)
            }
            CiKind::Wald => {
                let cov = sandwich_cov(&surface, &theta)?;
                let region = wald_region(&theta, &cov, n, cfg.alpha)?;
                let ci = region.interval(&cfg.tau)?;
                let r = region_summary(env, &region, &init)?;
                (theta, Some(ci), Some(r))
            }
            CiKind::Lrt => {
                let region = lrt_region(&surface, &theta, n, cfg.alpha)?;
                let r = region_summary(env, &region, &init)?;
                (theta, None, Some(r))
            }
            CiKind::Score => {
                let region = score_region(&surface, cfg.alpha)?;
                let r = region_summary(env, &region, &init)?;
                (theta, None, Some(r))
            }
            CiKind::EmNormal => unreachable!("handled above"),
        }
    };
    let region = match region {
        Some((summary, Some(ex))) => {
            io::emit_region(&env.path("region.csv"), &ex)?;
            Some(summary)
        }
        Some((summary, None)) => Some(summary),
        None => None,
    };
    let method = match kind {
        CiKind::Normal => Method::Normal,
        CiKind::Wald => Method::Wald,
        CiKind::Lrt => Method::Lrt,
        CiKind::Score => Method::Score,
        CiKind::Bootstrap => Method::Bootstrap,
        CiKind::EmNormal => Method::EmNormal,
    };
    io::write_json(
        &env.path("ci.json"),
        &CiReport { method: method.name().into(), seed: cfg.seed, tau_hat: cfg.tau.eval(&theta), theta_hat: theta, interval, region },
    )
}

fn bootstrap_cmd(env: &Env, data: Option<&Path>) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Report {
        seed: u64,
        theta_hat: Vec<f64>,
        interval: ConfidenceInterval,
        b: usize,
        diverged: usize,
    }
    let cfg = &env.cfg;
    let model = env.model()?;
    let data = env.data(data, 0)?;
    let theta = env.fit(&model, &data, &cfg.ascent)?.estimator().to_vec();
    let (ci, dist) = bootstrap_ci(&data, &model, &theta, &cfg.tau, cfg.b, cfg.alpha, &cfg.ascent, derive_seed(cfg.seed, 102))?;
    io::emit_values(&env.path("bootstrap.csv"), &dist.values)?;
    io::write_json(&env.path("bootstrap.json"), &Report { seed: cfg.seed, theta_hat: theta, interval: ci, b: dist.b, diverged: dist.diverged })
}

fn em_cmd(env: &Env, data: Option<&Path>) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Report {
        seed: u64,
        estimator: Vec<f64>,
        loglik: f64,
        selected: usize,
        iterations: usize,
        converged: bool,
        run_logliks: Vec<Option<f64>>,
        interval: Option<ConfidenceInterval>,
    }
    let cfg = &env.cfg;
    let model = env.model()?;
    let mixture = model.mixture().ok_or_else(|| anyhow!("em needs a mixture fixture"))?;
    let data = env.data(data, 0)?;
    let init = env.initializer(&model, &data)?;
    let sample = WeightedSample::from_dataset(&data)?;
    let fit = em_multistart(mixture, &sample, &init, cfg.m, DEFAULT_TOL, DEFAULT_MAX_ITER, derive_seed(cfg.seed, 101))?;
    let best = fit.best();
    io::emit_em_trace(&env.path("em_trace.csv"), model.param_dim(), &best.trace)?;
    let interval = em_normal_ci(mixture, &data, fit.estimator(), &cfg.tau, cfg.alpha, CovarianceKind::Sandwich).ok();
    io::write_json(
        &env.path("em.json"),
        &Report {
            seed: cfg.seed,
            estimator: fit.estimator().to_vec(),
            loglik: best.terminal.loglik,
            selected: fit.selected,
            iterations: best.terminal.t,
            converged: best.converged,
            run_logliks: fit.runs.iter().map(|r| r.as_ref().ok().map(|r| r.terminal.loglik)).collect(),
            interval,
        },
    )
}

fn mode_cmd(env: &Env, data: Option<&Path>) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Report {
        seed: u64,
        bandwidth: f64,
        mode: Vec<f64>,
        kde_value: f64,
        ball: msinfer_core::modehunt::ModeBall,
    }
    let cfg = &env.cfg;
    let data = env.data(data, 0)?;
    let h = bandwidth_rule(&data, cfg.bandwidth)?;
    let search = mode_estimate(&data, h, derive_seed(cfg.seed, 103))?;
    let ball = mode_bootstrap_ci(&data, h, cfg.b, cfg.alpha, derive_seed(cfg.seed, 104))?;
    io::emit_values(&env.path("mode_distances.csv"), &ball.distances)?;
    io::write_json(
        &env.path("mode.json"),
        &Report { seed: cfg.seed, bandwidth: h, mode: search.best.location, kde_value: search.best.kde_value, ball },
    )
}

fn twosample_cmd(env: &Env, x: Option<&Path>, y: Option<&Path>) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Report {
        seed: u64,
        result: msinfer_core::twosample::TwoSampleResult,
        ci_overlap: Option<msinfer_core::twosample::CiOverlap>,
    }
    let cfg = &env.cfg;
    let model = env.model()?;
    let x = env.data(x, 0)?;
    let y = env.data(y, 1)?;
    let init = env.initializer(&model, &x.concat(&y)?)?;
    let result = two_sample_test(&x, &y, &model, &init, cfg.m, cfg.permutations, &cfg.ascent, derive_seed(cfg.seed, 105))?;
    let overlap = ci_overlap(&x, &y, &model, &result, &cfg.tau, cfg.alpha).ok();
    io::emit_values(&env.path("permutations.csv"), &result.permuted)?;
    io::write_json(&env.path("twosample.json"), &Report { seed: cfg.seed, result, ci_overlap: overlap })
}

fn coverage_cmd(env: &Env) -> anyhow::Result<bool> {
    let report = run_coverage(&env.cfg)?;
    io::write_json(&env.path("report.json"), &report)?;
    io::emit_report(&env.path("report.csv"), &report)?;
    for m in &report.methods {
        eprintln!(
            "{:<10} precision-set {:.4} (target {:.4}) mle {:.4} (target {:.4})",
            m.method.name(),
            m.rate_precision_set,
            m.target_precision_set,
            m.rate_mle,
            m.target_mle
        );
    }
    if let Some(t) = &report.type1 {
        eprintln!("two-sample rejection rate {:.4} (nominal {:.4})", t.rate, t.nominal);
    }
    Ok(report.pass)
}

fn emit_plots_cmd(env: &Env, report: &Path) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(report).with_context(|| format!("reading {}", report.display()))?;
    let report: msinfer::CoverageReport = serde_json::from_str(&text)?;
    io::emit_report(&env.path("report.csv"), &report)
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let fixture = Fixture::parse(&cfg.fixture)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let env = Env { cfg, fixture, out: cli.out };
    match &cli.command {
        Command::Simulate => simulate_cmd(&env)?,
        Command::Fit { data } => fit_cmd(&env, data.as_deref())?,
        Command::Basins => basins_cmd(&env)?,
        Command::Ci { method, data } => ci_cmd(&env, *method, data.as_deref())?,
        Command::Bootstrap { data } => bootstrap_cmd(&env, data.as_deref())?,
        Command::Em { data } => em_cmd(&env, data.as_deref())?,
        Command::Mode { data } => mode_cmd(&env, data.as_deref())?,
        Command::Twosample { data_x, data_y } => twosample_cmd(&env, data_x.as_deref(), data_y.as_deref())?,
        Command::Coverage => return coverage_cmd(&env),
        Command::EmitPlots { report } => emit_plots_cmd(&env, report)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
