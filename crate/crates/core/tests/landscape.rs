use msinfer_core::ascent::{AscentConfig, Initializer};
use msinfer_core::landscape::{
    build_registry, estimate_q, map_basins, min_initializations, precision_set, BasinProbabilities, CellLabel, MaximaRegistry, Maximum,
};
use msinfer_core::model::{DoubleWell, GaussianMixture, MixtureFit, Objective, PopulationSurface};
use msinfer_core::{Domain, Grid};
use proptest::prelude::*;

fn registry(k: usize) -> MaximaRegistry {
    MaximaRegistry::from_candidates((0..k).map(|i| Maximum { location: vec![i as f64], value: -(i as f64) }), 1e-3).unwrap()
}

fn probabilities() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, 1..6).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    })
}

proptest! {
    #[test]
    fn cumulative_mass_is_monotone(q in probabilities()) {
        let p = BasinProbabilities::exact(q.clone());
        for n in 1..q.len() {
            prop_assert!(p.cumulative(n + 1) >= p.cumulative(n));
        }
    }

    #[test]
    fn precision_set_shrinks_with_m_and_delta(q in probabilities(), m in 1usize..20, d in 0.001f64..0.5) {
        let reg = registry(q.len());
        let p = BasinProbabilities::exact(q);
        let base = precision_set(&reg, &p, m, d).unwrap();
        let more_m = precision_set(&reg, &p, m + 1, d).unwrap();
        let more_d = precision_set(&reg, &p, m, (2.0 * d).min(0.99)).unwrap();
        prop_assert!(more_m.n <= base.n);
        prop_assert!(more_d.n <= base.n);
        // Nested: the larger-M set is a prefix of the smaller-M one.
        prop_assert_eq!(&base.members[..more_m.n], &more_m.members[..]);
    }

    #[test]
    fn min_initializations_is_the_smallest_sufficient_m(d in 0.001f64..0.9, mass in 0.001f64..0.99) {
        let m = min_initializations(d, mass).unwrap();
        prop_assert!((1.0 - mass).powi(m as i32) <= d);
        prop_assert!(m == 1 || (1.0 - mass).powi(m as i32 - 1) > d);
    }

    #[test]
    fn registry_is_sorted(values in prop::collection::vec(-10.0f64..10.0, 1..20)) {
        let reg = MaximaRegistry::from_candidates(
            values.iter().enumerate().map(|(i, v)| Maximum { location: vec![i as f64], value: *v }),
            1e-3,
        )
        .unwrap();
        prop_assert!(reg.maxima().windows(2).all(|w| w[0].value >= w[1].value));
    }
}

#[test]
fn arithmetic_examples() {
    let reg = registry(3);
    let ps = precision_set(&reg, &BasinProbabilities::exact(vec![0.6, 0.3, 0.1]), 5, 0.05).unwrap();
    assert_eq!(ps.n, 1);
    assert_eq!(min_initializations(0.05, 0.3).unwrap(), 9);
}

#[test]
fn double_well_registry_and_probabilities() {
    let w = DoubleWell::default();
    let cfg = AscentConfig::default();
    let init = Initializer::uniform(w.domain().clone());
    let reg = build_registry(&w, &init, 8, &cfg, 1).unwrap();
    assert_eq!(reg.len(), 2);
    let q = estimate_q(&w, &reg, &init, 2000, &cfg, 2).unwrap();
    assert_eq!(q.tallies.iter().sum::<usize>() + q.unclassified, 2000);
    for (p, se) in q.q.iter().zip(&q.se) {
        assert!((p - 0.5).abs() <= 3.0 * se.max(1e-3), "{q:?}");
    }
}

fn figure1() -> (PopulationSurface<MixtureFit>, MaximaRegistry, Initializer) {
    let pop = PopulationSurface::new(MixtureFit::figure1(), GaussianMixture::figure1()).unwrap();
    let init = Initializer::uniform(Domain::new(vec![0.0, 0.01], vec![4.0, 0.99]).unwrap());
    let reg = build_registry(&pop, &init, 16, &AscentConfig::default(), 3).unwrap();
    (pop, reg, init)
}

#[test]
fn basin_map_and_monte_carlo_agree() {
    let (pop, reg, init) = figure1();
    assert_eq!(reg.len(), 2);
    let cfg = AscentConfig::default();
    let map = map_basins(&pop, &reg, &Grid::uniform(init.domain().clone(), 30).unwrap(), &cfg).unwrap();
    let grid_q = BasinProbabilities::from_map(&map, reg.len());
    let mc = estimate_q(&pop, &reg, &init, 800, &cfg, 4).unwrap();
    for l in 0..reg.len() {
        // Grid discretization error plus Monte Carlo error.
        let tol = 3.0 * mc.se[l] + 2.0 / 30.0;
        assert!((grid_q.q[l] - mc.q[l]).abs() <= tol, "basin {l}: grid {} mc {}", grid_q.q[l], mc.q[l]);
    }
}

#[test]
fn basin_map_is_stable_under_refinement() {
    let (pop, reg, init) = figure1();
    let cfg = AscentConfig::default();
    let coarse = map_basins(&pop, &reg, &Grid::uniform(init.domain().clone(), 15).unwrap(), &cfg).unwrap();
    let fine = map_basins(&pop, &reg, &Grid::uniform(init.domain().clone(), 45).unwrap(), &cfg).unwrap();
    // Every coarse center is also the center of a fine cell (factor 3).
    let mut differ = 0;
    for c in 0..coarse.grid.len() {
        let f = fine.grid.locate(&coarse.grid.cell_center(c)).unwrap();
        if coarse.labels[c] != fine.labels[f] {
            differ += 1;
        }
    }
    assert_eq!(differ, 0);
    let qc = BasinProbabilities::from_map(&coarse, 2);
    let qf = BasinProbabilities::from_map(&fine, 2);
    assert!((qc.q[0] - qf.q[0]).abs() < 0.1, "{qc:?} {qf:?}");
    assert!(fine.labels.iter().all(|l| *l != CellLabel::Unresolved));
}
