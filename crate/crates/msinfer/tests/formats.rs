use msinfer::config::{ExperimentConfig, Method};
use msinfer::io::{emit_basin_map, emit_em_trace, emit_region, emit_report, emit_trajectories, emit_values, format_dataset, parse_dataset, read_dataset, write_dataset, write_json};
use msinfer::{run_coverage, CoverageReport, Fixture};
use msinfer_core::ascent::AscentConfig;
use msinfer_core::landscape::{map_basins, MaximaRegistry, Maximum};
use msinfer_core::model::DoubleWell;
use msinfer_core::{Dataset, Domain, Grid};
use proptest::prelude::*;

fn rows(path: &std::path::Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let body = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, body)
}

#[test]
fn config_defaults_and_validation() {
    let cfg: ExperimentConfig = serde_json::from_str(r#"{"fixture": "normal-location", "n": 50}"#).unwrap();
    assert_eq!(cfg.n, 50);
    assert_eq!(cfg.methods, vec![Method::Normal, Method::Bootstrap]);
    cfg.validate().unwrap();

    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"nn": 3}"#).is_err());
    let bad = ExperimentConfig { alpha: 1.5, ..ExperimentConfig::default() };
    assert!(bad.validate().is_err());
    let bad = ExperimentConfig { m: 0, ..ExperimentConfig::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn shipped_configs_load() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let cfg = ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e:#}", path.display()));
        Fixture::parse(&cfg.fixture).unwrap();
    }
}

#[test]
fn unknown_fixture_is_rejected_by_name() {
    let err = Fixture::parse("banana").unwrap_err().to_string();
    assert!(err.contains("banana") && err.contains("figure1"));
    let cfg = ExperimentConfig { fixture: "banana".into(), ..ExperimentConfig::default() };
    assert!(run_coverage(&cfg).is_err());
}

#[test]
fn dataset_text_parsing() {
    let d = parse_dataset("# header\n1 2\n3,4\n\n5\t6 # tail\n").unwrap();
    assert_eq!((d.n(), d.dim()), (3, 2));
    assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    assert!(parse_dataset("1 2\n3\n").is_err());
    assert!(parse_dataset("1 x\n").is_err());
}

proptest! {
    #[test]
    fn dataset_round_trips_exactly(values in prop::collection::vec(-1e6f64..1e6, 1..40), dim in 1usize..3) {
        let n = values.len() / dim;
        prop_assume!(n > 0);
        let data = Dataset::new(dim, values[..n * dim].to_vec()).unwrap();
        prop_assert_eq!(parse_dataset(&format_dataset(&data)).unwrap(), data.clone());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        write_dataset(&path, &data).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), data);
    }
}

#[test]
fn empty_outputs_still_carry_headers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    emit_trajectories(&p, 2, &[]).unwrap();
    let (h, body) = rows(&p);
    assert!(body.is_empty());
    assert!(h.len() >= 4, "{h:?}");

    emit_values(&p, &[]).unwrap();
    assert_eq!(rows(&p), (vec!["index".to_string(), "value".to_string()], vec![]));

    emit_em_trace(&p, 2, &[]).unwrap();
    assert!(rows(&p).1.is_empty());
}

#[test]
fn double_well_raster_has_two_labels_split_at_zero() {
    let domain = Domain::cube(1, -2.0, 2.0).unwrap();
    let surface = DoubleWell::new(domain.clone()).unwrap();
    let registry =
        MaximaRegistry::from_candidates([Maximum { location: vec![-1.0], value: 0.0 }, Maximum { location: vec![1.0], value: 0.0 }], 1e-3).unwrap();
    let map = map_basins(&surface, &registry, &Grid::uniform(domain, 40).unwrap(), &AscentConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("basins.csv");
    emit_basin_map(&p, &map).unwrap();
    let (h, body) = rows(&p);
    assert_eq!(h, ["cell", "theta0", "label"]);
    assert_eq!(body.len(), 40);
    let mut labels: Vec<&str> = body.iter().map(|r| r[2].as_str()).collect();
    for r in &body {
        let x: f64 = r[1].parse().unwrap();
        let want = if x < 0.0 { registry.nearest(&[-1.0]) } else { registry.nearest(&[1.0]) };
        assert_eq!(r[2], want.unwrap().to_string());
    }
    labels.dedup();
    assert_eq!(labels.len(), 2);
}

fn small_config() -> ExperimentConfig {
    ExperimentConfig {
        fixture: "normal-location".into(),
        n: 60,
        b: 30,
        trials: 12,
        methods: vec![Method::Normal, Method::Wald, Method::Lrt, Method::Score, Method::Bootstrap],
        q_draws: 50,
        registry_probes: 4,
        ledger_grid: 8,
        region_grid: 40,
        seed: 3,
        ..ExperimentConfig::default()
    }
}

#[test]
fn report_json_round_trips_losslessly() {
    let report = run_coverage(&small_config()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.json");
    write_json(&p, &report).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    let back: CoverageReport = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string_pretty(&back).unwrap() + "\n", text);

    let csv_path = dir.path().join("report.csv");
    emit_report(&csv_path, &report).unwrap();
    let (h, body) = rows(&csv_path);
    assert_eq!(h[0], "method");
    assert_eq!(body.len(), 2 * report.methods.len());
}

#[test]
fn coverage_is_deterministic_and_thread_independent() {
    let cfg = small_config();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&run_coverage(&cfg).unwrap()).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(1));
    assert_eq!(one, run(3));
}

#[test]
fn region_output_marks_every_cell() {
    use msinfer_core::infer::{extract, wald_region};
    let data = msinfer_core::model::simulate(&msinfer_core::model::GaussianMixture::normal(0.0, 1.0).unwrap(), 100, 1).unwrap();
    let model = msinfer_core::model::NormalLocation::new(1.0, Domain::cube(1, -5.0, 5.0).unwrap()).unwrap();
    let s = msinfer_core::model::SampleSurface::new(&model, &data).unwrap();
    let theta = data.mean();
    let cov = msinfer_core::infer::sandwich_cov(&s, &theta).unwrap();
    let region = wald_region(&theta, &cov, data.n(), 0.05).unwrap();
    let ex = extract(&region, &Grid::uniform(Domain::cube(1, -1.0, 1.0).unwrap(), 50).unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("region.csv");
    emit_region(&p, &ex).unwrap();
    let (h, body) = rows(&p);
    assert_eq!(h, ["cell", "theta0", "status"]);
    assert_eq!(body.len(), 50);
    assert!(body.iter().any(|r| r[2] == "member"));
    assert!(body.iter().all(|r| ["member", "outside", "excluded"].contains(&r[2].as_str())));
}
