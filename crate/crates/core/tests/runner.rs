use flowlab_core::config::{parse_config, ExperimentConfig};
use flowlab_core::experiments::{registry, run_experiment, UNDERPOWERED_BELOW};
use flowlab_core::report::{read_json, to_csv, write_report, Format, CSV_HEADER};
use flowlab_core::Error;

fn small(id: &str, replicas: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(id);
    cfg.replicas = replicas;
    cfg
}

#[test]
fn config_file_round_trip() {
    let cfg = parse_config(
        "# quick look at the convolution identity\n\
         experiment = A4\n\
         base_seed = 7\n\
         replicas = 200\n\
         dt = 1e-3\n\
         extra.refine = 10\n",
    )
    .unwrap();
    assert_eq!(cfg.experiment, "A4");
    assert_eq!(cfg.base_seed, 7);
    assert_eq!(cfg.replicas, 200);
    assert!((cfg.bandwidth - 1e-3f64.sqrt()).abs() < 1e-15);
    assert_eq!(cfg.dx, cfg.bandwidth);
    assert_eq!(cfg.extra_or("refine", 100u32).unwrap(), 10);
}

#[test]
fn convolution_lattice_passes_everywhere() {
    let reports = run_experiment(&ExperimentConfig::new("A4")).unwrap();
    assert_eq!(reports.len(), 27);
    assert!(reports.iter().all(|r| r.pass && r.experiment == "A4"));
    assert!(reports.iter().all(|r| !r.details.contains_key("underpowered")));
}

#[test]
fn small_runs_are_flagged() {
    const { assert!(100 < UNDERPOWERED_BELOW) };
    let reports = run_experiment(&small("A1", 100)).unwrap();
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r.details.get("underpowered").map(String::as_str), Some("true"));
        assert_eq!(r.n, 100);
    }
}

#[test]
fn reports_are_reproducible_byte_for_byte() {
    let cfg = small("A2", 200);
    let a = to_csv(&run_experiment(&cfg).unwrap()).unwrap();
    let b = to_csv(&run_experiment(&cfg).unwrap()).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with(&CSV_HEADER.join(",")));
    let mut other = cfg.clone();
    other.base_seed += 1;
    assert_ne!(a, to_csv(&run_experiment(&other).unwrap()).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = small("A5", 300);
    let run_with = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_experiment(&cfg).unwrap())
    };
    assert_eq!(run_with(1), run_with(4));
}

#[test]
fn unknown_experiment_is_an_error() {
    match run_experiment(&small("A99", 10)) {
        Err(Error::UnknownExperiment(id)) => assert_eq!(id, "A99"),
        other => panic!("expected an unknown-experiment error, got {other:?}"),
    }
}

#[test]
fn all_runs_every_registered_experiment_in_order() {
    let reports = run_experiment(&small("ALL", 100)).unwrap();
    let mut seen: Vec<&str> = Vec::new();
    for r in &reports {
        if seen.last() != Some(&r.experiment.as_str()) {
            seen.push(&r.experiment);
        }
    }
    let ids: Vec<&str> = registry().iter().map(|i| i.id).collect();
    assert_eq!(seen, ids);
    assert!(reports.iter().all(|r| r.statistic.is_finite() && r.threshold.is_finite()));
}

#[test]
fn json_report_round_trips_through_a_file() {
    let reports = run_experiment(&ExperimentConfig::new("A4")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a4.json");
    write_report(&reports, Format::Json, &path).unwrap();
    assert_eq!(read_json(&path).unwrap(), reports);
}
