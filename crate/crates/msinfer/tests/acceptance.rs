//! Acceptance suite: one pass/fail line per criterion. Pass criterion
//! numbers to run a subset and `--strict` to exit non-zero on any failure.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use msinfer::config::{ExperimentConfig, InitSpec, Method};
use msinfer::coverage::{run_coverage, CoverageReport, MethodCoverage};
use msinfer_core::ascent::{AscentConfig, Initializer};
use msinfer_core::em::{em_run, WeightedSample, DEFAULT_MAX_ITER, DEFAULT_TOL};
use msinfer_core::landscape::{build_registry, min_initializations, precision_set, BasinProbabilities, MaximaRegistry, Maximum};
use msinfer_core::model::{simulate, GaussianMixture, MixtureFit, NormalLocation, Objective, PopulationSurface, SampleSurface};
use msinfer_core::modehunt::{bandwidth_rule, meanshift_trajectory, BandwidthRule, Kde};
use msinfer_core::rng::stream;
use msinfer_core::Domain;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Binomial standard error at rate `p` over `t` trials.
fn se(p: f64, t: usize) -> f64 {
    (p.clamp(0.0, 1.0) * (1.0 - p.clamp(0.0, 1.0)) / t as f64).sqrt()
}

fn method<'a>(r: &'a CoverageReport, m: Method) -> &'a MethodCoverage {
    r.methods.iter().find(|c| c.method == m).expect("method in report")
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed <= Duration::from_secs(limit_s), format!("{:.1}s/{limit_s}s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 1

fn fd_grad(s: &dyn Objective, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let h = 1e-5 * (1.0 + x[j].abs());
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[j] += h;
            b[j] -= h;
            (s.value(&a).unwrap() - s.value(&b).unwrap()) / (2.0 * h)
        })
        .collect()
}

fn fd_hess(s: &dyn Objective, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            let (hi, hj) = (1e-4 * (1.0 + x[i].abs()), 1e-4 * (1.0 + x[j].abs()));
            let f = |si: f64, sj: f64| {
                let mut p = x.to_vec();
                p[i] += si * hi;
                p[j] += sj * hj;
                s.value(&p).unwrap()
            };
            out[i * d + j] = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * hi * hj);
        }
    }
    out
}

fn derivative_errors(s: &dyn Objective, seed: u64) -> (f64, f64, f64) {
    let dom = s.domain();
    let mut rng = stream(seed, 0);
    let (mut eg, mut eh, mut asym) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..50 {
        let x: Vec<f64> = dom
            .lo()
            .iter()
            .zip(dom.hi())
            .map(|(l, h)| {
                let m = 0.02 * (h - l);
                rng.random_range(l + m..h - m)
            })
            .collect();
        let g = s.gradient(&x).unwrap();
        let fg = fd_grad(s, &x);
        let scale = 1.0 + fg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        eg = eg.max(g.iter().zip(&fg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale);
        let h = s.hessian(&x).unwrap();
        let fh = fd_hess(s, &x);
        let d = x.len();
        let hscale = 1.0 + fh.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..d {
                eh = eh.max((h[(i, j)] - fh[i * d + j]).abs() / hscale);
                asym = asym.max((h[(i, j)] - h[(j, i)]).abs());
            }
        }
    }
    (eg, eh, asym)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let figure1 = MixtureFit::figure1();
    let location = NormalLocation::new(1.0, Domain::cube(1, -5.0, 5.0).unwrap()).unwrap();
    let mix_data = simulate(&GaussianMixture::figure1(), 500, 1).unwrap();
    let loc_data = simulate(&GaussianMixture::normal(0.0, 1.0).unwrap(), 400, 2).unwrap();
    let pop = PopulationSurface::new(figure1.clone(), GaussianMixture::figure1()).unwrap();
    let kde = Kde::new(simulate(&GaussianMixture::normal(0.0, 1.0).unwrap(), 200, 3).unwrap(), 0.4).unwrap();
    let surfaces: Vec<(&str, Box<dyn Objective + '_>)> = vec![
        ("figure1", Box::new(SampleSurface::new(&figure1, &mix_data).unwrap())),
        ("figure1-population", Box::new(pop)),
        ("normal-location", Box::new(SampleSurface::new(&location, &loc_data).unwrap())),
        ("kde", Box::new(kde)),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (name, s)) in surfaces.iter().enumerate() {
        let (eg, eh, asym) = derivative_errors(s.as_ref(), 10 + i as u64);
        pass &= eg <= 1e-4 && eh <= 1e-3 && asym <= 1e-8;
        parts.push(format!("{name} g {eg:.1e} H {eh:.1e}"));
    }
    let (ok, t) = within(start.elapsed(), 5);
    outcome(pass && ok, format!("{}; {t}", parts.join(", ")))
}

// ---------------------------------------------------------------- 2

/// Population log-likelihood of the two-component fit by composite Simpson.
struct SimpsonOracle {
    nodes: Vec<f64>,
    mass: Vec<f64>,
}

impl SimpsonOracle {
    fn new() -> Self {
        let (a, b, k) = (-2.5, 5.5, 3200usize);
        let h = (b - a) / k as f64;
        let phi = |x: f64, m: f64, s: f64| (-(x - m) * (x - m) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        let p0 = |x: f64| 0.5 * phi(x, 0.0, 0.2) + 0.45 * phi(x, 0.75, 0.2) + 0.05 * phi(x, 3.0, 0.2);
        let mut nodes = Vec::new();
        let mut mass = Vec::new();
        for i in 0..=k {
            let x = a + i as f64 * h;
            let w = if i == 0 || i == k { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            nodes.push(x);
            mass.push(w * h / 3.0 * p0(x));
        }
        Self { nodes, mass }
    }

    fn value(&self, mu: f64, rho: f64) -> f64 {
        let c = -(0.2f64 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let (l0, l1) = ((1.0 - rho).ln(), rho.ln());
        self.nodes
            .iter()
            .zip(&self.mass)
            .map(|(x, w)| {
                let a = l0 - x * x / 0.08;
                let b = l1 - (x - mu) * (x - mu) / 0.08;
                let m = a.max(b);
                w * (c + m + ((a - m).exp() + (b - m).exp()).ln())
            })
            .sum()
    }
}

fn grid_oracle_maxima() -> Vec<[f64; 2]> {
    let oracle = SimpsonOracle::new();
    let (lo, hi) = ([-1.0, 0.005], [5.0, 0.995]);
    let k = 400;
    let w = [(hi[0] - lo[0]) / k as f64, (hi[1] - lo[1]) / k as f64];
    let center = |i: usize, j: usize| [lo[0] + (i as f64 + 0.5) * w[0], lo[1] + (j as f64 + 0.5) * w[1]];
    let values: Vec<f64> = (0..k * k)
        .map(|c| {
            let p = center(c / k, c % k);
            oracle.value(p[0], p[1])
        })
        .collect();
    let mut found: Vec<[f64; 2]> = Vec::new();
    for i in 1..k - 1 {
        for j in 1..k - 1 {
            let v = values[i * k + j];
            let is_max = (-1i64..=1).all(|di| {
                (-1i64..=1).all(|dj| (di == 0 && dj == 0) || values[(i as i64 + di) as usize * k + (j as i64 + dj) as usize] < v)
            });
            if !is_max {
                continue;
            }
            // Zoom: 21x21 local grids, each a fifth of the previous span.
            let mut best = center(i, j);
            let mut span = [w[0], w[1]];
            for _ in 0..10 {
                let mut top = (f64::NEG_INFINITY, best);
                for a in 0..=20 {
                    for b in 0..=20 {
                        let p = [best[0] + span[0] * (a as f64 / 10.0 - 1.0), best[1] + span[1] * (b as f64 / 10.0 - 1.0)];
                        let v = oracle.value(p[0], p[1]);
                        if v > top.0 {
                            top = (v, p);
                        }
                    }
                }
                best = top.1;
                span = [span[0] / 5.0, span[1] / 5.0];
            }
            if found.iter().all(|f| (f[0] - best[0]).abs() > 1e-2 || (f[1] - best[1]).abs() > 1e-2) {
                found.push(best);
            }
        }
    }
    found
}

fn criterion_2() -> Outcome {
    let pop = PopulationSurface::new(MixtureFit::figure1(), GaussianMixture::figure1()).unwrap();
    let start = Instant::now();
    let init = Initializer::uniform(pop.domain().clone());
    let registry = build_registry(&pop, &init, 32, &AscentConfig::default(), 1).unwrap();
    let (ok_time, t) = within(start.elapsed(), 30);
    let oracle = grid_oracle_maxima();
    let matched = registry.len() == 2
        && oracle.len() == 2
        && registry.maxima().iter().all(|m| {
            oracle.iter().any(|o| (o[0] - m.location[0]).abs() <= 1e-3 && (o[1] - m.location[1]).abs() <= 1e-3)
        });
    let locs: Vec<String> = registry.maxima().iter().map(|m| format!("({:.5}, {:.5})", m.location[0], m.location[1])).collect();
    let orc: Vec<String> = oracle.iter().map(|o| format!("({:.5}, {:.5})", o[0], o[1])).collect();
    outcome(matched && ok_time, format!("registry {} vs oracle {}; {t}", locs.join(" "), orc.join(" ")))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let registry =
        MaximaRegistry::from_candidates((0..3).map(|i| Maximum { location: vec![i as f64], value: -(i as f64) }), 1e-3).unwrap();
    let ps = precision_set(&registry, &BasinProbabilities::exact(vec![0.6, 0.3, 0.1]), 5, 0.05).unwrap();
    let m = min_initializations(0.05, 0.3).unwrap();
    let (ok, t) = within(start.elapsed(), 1);
    outcome(ps.n == 1 && m == 9 && ok, format!("N = {}, M = {m}; {t}", ps.n))
}

// ---------------------------------------------------------------- 4

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        fixture: "normal-location".into(),
        n: 400,
        m: 3,
        alpha: 0.05,
        b: 200,
        trials: 500,
        methods: vec![Method::Normal, Method::Wald, Method::Lrt, Method::Score, Method::Bootstrap],
        seed: 4,
        q_draws: 1000,
        ..ExperimentConfig::default()
    };
    let report = run_coverage(&cfg).unwrap();
    let band = 3.0 * se(0.95, cfg.trials);
    let mut pass = true;
    let mut parts = Vec::new();
    for m in &report.methods {
        pass &= (m.rate_mle - 0.95).abs() <= band;
        parts.push(format!("{} {:.3}", m.method.name(), m.rate_mle));
    }
    let (ok, t) = within(start.elapsed(), 300);
    outcome(pass && ok, format!("{} in 0.95 +- {band:.4}; {t}", parts.join(", ")))
}

// ---------------------------------------------------------------- 5, 6, 8

fn figure1_config(m: usize, methods: Vec<Method>, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        fixture: "figure1".into(),
        n: 500,
        m,
        delta: 0.05,
        alpha: 0.05,
        b: 200,
        trials,
        init: Some(InitSpec::Uniform { lo: vec![0.0, 0.01], hi: vec![4.0, 0.99] }),
        methods,
        seed,
        q_draws: 10_000,
        ..ExperimentConfig::default()
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let cfg = figure1_config(3, vec![Method::Normal, Method::Bootstrap], 400, 5);
    let report = run_coverage(&cfg).unwrap();
    let q1 = report.population.q.q[0];
    let t = cfg.trials;
    let target_ps = 1.0 - cfg.alpha - cfg.delta;
    let target_mle = 1.0 - cfg.alpha - (1.0 - q1).powi(cfg.m as i32);
    let mut pass = true;
    let mut parts = vec![format!("q1 {q1:.4}")];
    for m in [Method::Normal, Method::Bootstrap] {
        let c = method(&report, m);
        pass &= c.rate_precision_set >= target_ps - 3.0 * se(target_ps, t);
        pass &= c.rate_mle >= target_mle - 3.0 * se(target_mle, t);
        parts.push(format!("{} set {:.3}/{target_ps:.3} mle {:.3}/{target_mle:.3}", m.name(), c.rate_precision_set, c.rate_mle));
    }
    let (ok, tm) = within(start.elapsed(), 1800);
    outcome(pass && ok, format!("{}; {tm}", parts.join(", ")))
}

fn criterion_6() -> Outcome {
    let cfg = figure1_config(1, vec![Method::Lrt, Method::Wald], 400, 6);
    let report = run_coverage(&cfg).unwrap();
    let lrt = method(&report, Method::Lrt);
    let wald = method(&report, Method::Wald);
    let target = 1.0 - cfg.alpha;
    let floor = target - 3.0 * se(target, cfg.trials);
    let wald_below = wald.rate_mle < floor;
    outcome(
        lrt.rate_mle >= floor,
        format!("lrt {:.3} >= {floor:.3}; wald {:.3}{}", lrt.rate_mle, wald.rate_mle, if wald_below { " (below)" } else { "" }),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let model = MixtureFit::figure1();
    let init = Initializer::uniform(Domain::new(vec![0.0, 0.01], vec![4.0, 0.99]).unwrap());
    let (mut monotone, mut worst_score, mut interior) = (true, 0.0f64, 0);
    for run in 0..100u64 {
        let data = simulate(&GaussianMixture::figure1(), 500, 700 + run).unwrap();
        let sample = WeightedSample::from_dataset(&data).unwrap();
        let Ok(r) = em_run(&model, &sample, &init.draw_indexed(77, run), DEFAULT_TOL, DEFAULT_MAX_ITER) else {
            continue;
        };
        monotone &= r.trace.windows(2).all(|w| w[1].loglik >= w[0].loglik - 1e-10);
        let s = SampleSurface::new(&model, &data).unwrap();
        let t = &r.terminal.theta;
        let dom = s.domain();
        let inside = dom.lo().iter().zip(dom.hi()).zip(t).all(|((l, h), x)| *x > *l && *x < *h);
        if inside {
            interior += 1;
            worst_score = worst_score.max(s.gradient(t).unwrap().amax());
        }
    }
    let (ok, tm) = within(start.elapsed(), 60);
    outcome(
        monotone && worst_score <= 1e-5 && interior > 0 && ok,
        format!("monotone {monotone}, {interior} interior terminals, max score {worst_score:.1e}; {tm}"),
    )
}

fn criterion_8() -> Outcome {
    let mut cfg = figure1_config(3, vec![Method::EmNormal], 300, 8);
    cfg.em_q_draws = 2000;
    let report = run_coverage(&cfg).unwrap();
    let q = report.population.q_em.expect("EM basin probability");
    let target = 1.0 - cfg.alpha - (1.0 - q).powi(cfg.m as i32);
    let c = method(&report, Method::EmNormal);
    let floor = target - 3.0 * se(target, cfg.trials);
    outcome(c.rate_mle >= floor, format!("q_em {q:.4}; em-normal {:.3} >= {floor:.3}", c.rate_mle))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let start = Instant::now();
    // Largest relative density drop along any trajectory, measured against the
    // rounding bound of an n-term kernel sum.
    let mut worst_drop = 0.0f64;
    let resolution = 2.0 * 500.0 * f64::EPSILON / 2.0;
    for seed in 0..20u64 {
        let data = simulate(&GaussianMixture::normal(0.0, 1.0).unwrap(), 500, 900 + seed).unwrap();
        let h = bandwidth_rule(&data, BandwidthRule::Undersmooth).unwrap();
        let kde = Kde::new(data.clone(), h).unwrap();
        for i in (0..data.n()).step_by(25) {
            let path = meanshift_trajectory(&kde, data.row(i), 1e-8, 10_000).unwrap();
            for w in path.windows(2) {
                let (a, b) = (kde.density(&w[0]), kde.density(&w[1]));
                worst_drop = worst_drop.max((a - b) / a);
            }
        }
    }
    let cfg = ExperimentConfig {
        fixture: "normal-mode".into(),
        n: 500,
        alpha: 0.05,
        b: 500,
        trials: 200,
        methods: vec![Method::ModeBall],
        bandwidth: BandwidthRule::Undersmooth,
        seed: 9,
        q_draws: 1000,
        ..ExperimentConfig::default()
    };
    let report = run_coverage(&cfg).unwrap();
    let c = method(&report, Method::ModeBall);
    let floor = 0.95 - 3.0 * se(0.95, cfg.trials);
    let (ok, tm) = within(start.elapsed(), 1200);
    let monotone = worst_drop <= resolution;
    outcome(monotone && c.rate_mle >= floor && ok, format!("worst relative density drop {worst_drop:.1e} (resolution {resolution:.1e}); ball {:.3} >= {floor:.3}; {tm}", c.rate_mle))
}

// ---------------------------------------------------------------- 10

fn criterion_10() -> Outcome {
    let cfg = ExperimentConfig {
        fixture: "figure1".into(),
        n: 200,
        m: 3,
        alpha: 0.05,
        trials: 200,
        permutations: 199,
        methods: vec![Method::TwoSample],
        seed: 10,
        q_draws: 2000,
        ..ExperimentConfig::default()
    };
    let report = run_coverage(&cfg).unwrap();
    let t = report.type1.expect("type-1 summary");
    let band = 3.0 * se(0.05, cfg.trials);
    outcome(t.failed == 0 && (t.rate - 0.05).abs() <= band, format!("rejection rate {:.3} in 0.05 +- {band:.4}; {} failed", t.rate, t.failed))
}

// ---------------------------------------------------------------- 11

fn run_cli(dir: &Path, config: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_msinfer"))
        .arg("--config")
        .arg(config)
        .arg("--seed")
        .arg("31")
        .arg("--out")
        .arg(dir)
        .args(args)
        .status()
        .map(|s| s.code() == Some(0) || s.code() == Some(2))
        .unwrap_or(false)
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json" || x == "csv" || x == "txt"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn criterion_11() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let config = root.path().join("config.json");
    let cfg = ExperimentConfig {
        fixture: "figure1".into(),
        n: 150,
        m: 3,
        b: 20,
        trials: 4,
        methods: vec![Method::Normal, Method::Wald, Method::Lrt, Method::Score, Method::Bootstrap, Method::EmNormal, Method::TwoSample],
        q_draws: 100,
        em_q_draws: 50,
        registry_probes: 4,
        permutations: 9,
        ledger_grid: 6,
        region_grid: 30,
        ..ExperimentConfig::default()
    };
    std::fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let mode_config = root.path().join("mode.json");
    let mode_cfg = ExperimentConfig { fixture: "normal-mode".into(), b: 50, ..cfg.clone() };
    std::fs::write(&mode_config, serde_json::to_string_pretty(&mode_cfg).unwrap()).unwrap();
    let commands: Vec<(&str, &Path, Vec<&str>)> = vec![
        ("simulate", &config, vec!["simulate"]),
        ("fit", &config, vec!["fit"]),
        ("basins", &config, vec!["basins"]),
        ("ci-normal", &config, vec!["ci", "--method", "normal"]),
        ("ci-lrt", &config, vec!["ci", "--method", "lrt"]),
        ("ci-score", &config, vec!["ci", "--method", "score"]),
        ("ci-wald", &config, vec!["ci", "--method", "wald"]),
        ("ci-em", &config, vec!["ci", "--method", "em-normal"]),
        ("bootstrap", &config, vec!["bootstrap"]),
        ("em", &config, vec!["em"]),
        ("mode", &mode_config, vec!["mode"]),
        ("twosample", &config, vec!["twosample"]),
        ("coverage", &config, vec!["coverage"]),
    ];
    let mut failures = Vec::new();
    let mut compared = 0;
    for (name, cfg_path, args) in &commands {
        let runs: Vec<_> = (0..2)
            .map(|k| {
                let dir = root.path().join(format!("{name}-{k}"));
                std::fs::create_dir_all(&dir).unwrap();
                let ok = run_cli(&dir, cfg_path, args);
                (ok, read_outputs(&dir))
            })
            .collect();
        if !(runs[0].0 && runs[1].0) || runs[0].1.is_empty() || runs[0].1 != runs[1].1 {
            failures.push(name.to_string());
        }
        compared += runs[0].1.len();
    }
    // Plot emission from a saved report.
    let report = root.path().join("coverage-0").join("report.json");
    let plots: Vec<_> = (0..2)
        .map(|k| {
            let dir = root.path().join(format!("plots-{k}"));
            std::fs::create_dir_all(&dir).unwrap();
            let ok = run_cli(&dir, &config, &["emit-plots", "--report", report.to_str().unwrap()]);
            (ok, read_outputs(&dir))
        })
        .collect();
    if !(plots[0].0 && plots[1].0) || plots[0].1.is_empty() || plots[0].1 != plots[1].1 {
        failures.push("emit-plots".into());
    }
    // The report parses back to an identical value.
    let text = std::fs::read_to_string(&report).unwrap_or_default();
    let roundtrip = serde_json::from_str::<CoverageReport>(&text)
        .map(|r| serde_json::to_string_pretty(&r).unwrap() + "\n" == text)
        .unwrap_or(false);
    if !roundtrip {
        failures.push("report round-trip".into());
    }
    outcome(
        failures.is_empty(),
        format!("{} subcommands, {compared} files identical across runs; failures: {failures:?}", commands.len() + 1),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 derivative correctness", criterion_1),
        ("2 landscape oracle", criterion_2),
        ("3 precision-set arithmetic", criterion_3),
        ("4 classical sanity", criterion_4),
        ("5 figure-1 coverage", criterion_5),
        ("6 LRT validity with M = 1", criterion_6),
        ("7 EM monotonicity and stationarity", criterion_7),
        ("8 EM normal interval coverage", criterion_8),
        ("9 meanshift and mode ball", criterion_9),
        ("10 two-sample type-1 error", criterion_10),
        ("11 CLI determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let strict = std::env::args().any(|a| a == "--strict");
    let (mut ran, mut failed) = (0, 0);
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.starts_with(&format!("{f} "))) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} [{:.1}s] {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    // Failing criteria are reported above; `--strict` also turns them into a
    // non-zero exit status.
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
