use msinfer_core::ascent::{multistart, AscentConfig, Initializer};
use msinfer_core::boot::{bootstrap_ci, order_statistic, percentile_interval, BootstrapDistribution};
use msinfer_core::infer::{
    covariance, extract, lrt_region, normal_ci, sandwich_cov, score_region, tau_image, wald_region, CellStatus, ConfidenceRegion,
    CovarianceKind, Tau,
};
use msinfer_core::model::{simulate, GaussianMixture, MixtureFit, NormalLocation, Objective, SampleSurface};
use msinfer_core::{Dataset, Domain, Grid};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

fn normal_data(n: usize, seed: u64) -> Dataset {
    simulate(&GaussianMixture::normal(0.3, 1.0).unwrap(), n, seed).unwrap()
}

fn location() -> NormalLocation {
    NormalLocation::new(1.0, Domain::cube(1, -5.0, 5.0).unwrap()).unwrap()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
}

#[test]
fn normal_location_closed_forms() {
    let data = normal_data(400, 1);
    let model = location();
    let s = SampleSurface::new(&model, &data).unwrap();
    let (xbar, var) = mean_var(data.values());
    let theta = [xbar];
    let z = Normal::new(0.0, 1.0).unwrap().inverse_cdf(0.975);
    let zeta = ChiSquared::new(1.0).unwrap().inverse_cdf(0.95);
    let n = 400.0;

    let cov = sandwich_cov(&s, &theta).unwrap();
    assert!((cov.matrix[(0, 0)] - var).abs() < 1e-10);
    let ci = normal_ci(&theta, &cov, &Tau::Coordinate(0), 400, 0.05).unwrap();
    assert!((ci.lo - (xbar - z * (var / n).sqrt())).abs() < 1e-9);
    assert!((ci.hi - (xbar + z * (var / n).sqrt())).abs() < 1e-9);

    let info = covariance(&s, &theta, CovarianceKind::Information).unwrap();
    assert!((info.matrix[(0, 0)] - 1.0).abs() < 1e-10);

    // 2n (L(xbar) - L(t)) = n (t - xbar)^2 for unit variance.
    let lrt = lrt_region(&s, &theta, 400, 0.05).unwrap();
    let edge = (zeta / n).sqrt();
    assert!(lrt.contains(&[xbar + edge * (1.0 - 1e-9)]).unwrap());
    assert!(!lrt.contains(&[xbar + edge * (1.0 + 1e-6)]).unwrap());

    // Score statistic n (xbar - t)^2 / mean((x - t)^2).
    let score = score_region(&s, 0.05).unwrap();
    for t in [xbar - 0.1, xbar + 0.05, xbar + 0.2] {
        let d = xbar - t;
        let stat = n * d * d / (var + d * d);
        assert!((score.statistic(&[t]).unwrap() - stat).abs() < 1e-8 * stat.max(1.0));
    }
}

#[test]
fn wald_interval_matches_normal_ci_in_one_dimension() {
    for seed in 0..5 {
        let data = normal_data(100, seed);
        let model = location();
        let s = SampleSurface::new(&model, &data).unwrap();
        let (xbar, _) = mean_var(data.values());
        let cov = sandwich_cov(&s, &[xbar]).unwrap();
        let a = normal_ci(&[xbar], &cov, &Tau::Coordinate(0), 100, 0.1).unwrap();
        let b = wald_region(&[xbar], &cov, 100, 0.1).unwrap().interval(&Tau::Coordinate(0)).unwrap();
        assert!((a.lo - b.lo).abs() < 1e-9 && (a.hi - b.hi).abs() < 1e-9);
    }
}

fn figure1_fit(seed: u64, m: usize) -> (Dataset, Vec<f64>) {
    let data = simulate(&GaussianMixture::figure1(), 300, seed).unwrap();
    let model = MixtureFit::figure1();
    let s = SampleSurface::new(&model, &data).unwrap();
    let init = Initializer::uniform(Domain::new(vec![0.0, 0.01], vec![4.0, 0.99]).unwrap());
    let fit = multistart(&s, &init, m, &AscentConfig::default(), seed).unwrap();
    (data, fit.estimator().to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lrt_region_is_likelihood_monotone(a0 in -1.0f64..5.0, a1 in 0.005f64..0.995, b0 in -1.0f64..5.0, b1 in 0.005f64..0.995) {
        let (data, hat) = figure1_fit(3, 5);
        let model = MixtureFit::figure1();
        let s = SampleSurface::new(&model, &data).unwrap();
        let lrt = lrt_region(&s, &hat, data.n(), 0.05).unwrap();
        let (a, b) = ([a0, a1], [b0, b1]);
        if lrt.contains(&a).unwrap() && s.value(&b).unwrap() >= s.value(&a).unwrap() {
            prop_assert!(lrt.contains(&b).unwrap());
        }
    }

    #[test]
    fn bootstrap_intervals_nest(values in prop::collection::vec(-5.0f64..5.0, 20..200), a in 0.01f64..0.5, b in 0.01f64..0.5) {
        let dist = BootstrapDistribution::from_replicates(values.iter().map(|v| Some(*v)).collect());
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let wide = percentile_interval(&dist, lo).unwrap();
        let narrow = percentile_interval(&dist, hi).unwrap();
        prop_assert!(wide.lo <= narrow.lo && wide.hi >= narrow.hi);
        prop_assert!(values.contains(&wide.lo) && values.contains(&wide.hi));
    }

    #[test]
    fn order_statistic_is_attained(values in prop::collection::vec(-5.0f64..5.0, 1..50), p in 0.0f64..1.0) {
        let mut v = values.clone();
        v.sort_by(f64::total_cmp);
        let q = order_statistic(&v, p);
        let k = ((p * v.len() as f64).ceil() as usize).max(1);
        prop_assert_eq!(q, v[k - 1]);
    }
}

#[test]
fn lrt_extraction_shrinks_with_a_higher_anchor() {
    let data = simulate(&GaussianMixture::figure1(), 300, 4).unwrap();
    let model = MixtureFit::figure1();
    let s = SampleSurface::new(&model, &data).unwrap();
    let init = Initializer::uniform(Domain::new(vec![0.0, 0.01], vec![4.0, 0.99]).unwrap());
    let runs = multistart(&s, &init, 12, &AscentConfig::default(), 4).unwrap();
    let mut anchors: Vec<(f64, Vec<f64>)> =
        runs.runs.iter().filter_map(|r| r.as_ref().ok()).map(|r| (r.value, r.convergent.clone())).collect();
    anchors.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (low, high) = (&anchors[0].1, &anchors[anchors.len() - 1].1);
    let grid = Grid::uniform(s.domain().clone(), 60).unwrap();
    let wide = extract(&lrt_region(&s, low, 300, 0.05).unwrap(), &grid).unwrap();
    let tight = extract(&lrt_region(&s, high, 300, 0.05).unwrap(), &grid).unwrap();
    for (w, t) in wide.cells.iter().zip(&tight.cells) {
        assert!(*t != CellStatus::Member || *w == CellStatus::Member);
    }
    let image = tau_image(&tight, &Tau::Coordinate(0)).unwrap();
    assert!(image.interval.lo <= image.interval.hi);
}

#[test]
fn bootstrap_is_deterministic_and_starts_at_the_estimate() {
    let (data, hat) = figure1_fit(5, 5);
    let model = MixtureFit::figure1();
    let cfg = AscentConfig::default();
    let (a, da) = bootstrap_ci(&data, &model, &hat, &Tau::Coordinate(0), 60, 0.1, &cfg, 9).unwrap();
    let (b, db) = bootstrap_ci(&data, &model, &hat, &Tau::Coordinate(0), 60, 0.1, &cfg, 9).unwrap();
    assert_eq!(a, b);
    assert_eq!(da, db);
    assert!(da.values.contains(&a.lo) && da.values.contains(&a.hi));
}
