use chemoflow::runner::csv::{read_rows, HEADER};
use chemoflow::runner::{run, scenarios, sweep_mu, CheckKind, ConfigError, RunConfig, RunError};

fn small() -> RunConfig {
    RunConfig::parse("nx = 16\nny = 12\nlx = 1.5\nt_end = 0.6\noutput_every = 0.15\n", &[]).unwrap()
}

#[test]
fn csv_has_header_and_one_row_per_tick() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.out_path = Some(dir.path().join("out.csv"));
    let out = run(&cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
    let rows = read_rows(&text).unwrap();
    assert_eq!(rows, out.rows);
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    assert_eq!(times, vec![0.0, 0.15, 0.3, 0.44999999999999996, 0.6]);
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    for r in &rows {
        assert!(r.values().iter().skip(1).all(|v| *v >= 0.0 && v.is_finite()));
        assert!(r.c_min > 0.0);
    }
}

#[test]
fn final_partial_interval_gets_a_row() {
    let mut cfg = small();
    cfg.params.t_end = 0.5;
    let out = run(&cfg).unwrap();
    let times: Vec<f64> = out.rows.iter().map(|r| r.t).collect();
    assert_eq!(*times.last().unwrap(), 0.5);
    assert_eq!(times.len(), 5);
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = small();
    a.params.init.preset = chemoflow::chemo::Preset::VortexFluid;
    let mut b = a.clone();
    a.out_path = Some(dir.path().join("a.csv"));
    b.out_path = Some(dir.path().join("b.csv"));
    run(&a).unwrap();
    run(&b).unwrap();
    let ta = std::fs::read(dir.path().join("a.csv")).unwrap();
    let tb = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn invalid_out_path_is_a_config_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small();
    cfg.out_path = Some(dir.path().join("missing").join("out.csv"));
    let err = run(&cfg).unwrap_err();
    assert!(matches!(err, RunError::Config(ConfigError::OutPath { .. })));
    assert_eq!(err.exit_code(), 2);
    cfg.out_path = Some(dir.path().to_path_buf());
    assert!(matches!(run(&cfg), Err(RunError::Config(ConfigError::OutPath { .. }))));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn logistic_scenario_reaches_equilibrium() {
    let out = run(&scenarios::logistic_uniform()).unwrap();
    assert!(out.rows.last().unwrap().dev_inf <= 1e-6);
    assert!(out.checks.iter().all(|c| c.passed()));
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenarios::stabilization();
    let path = dir.path().join("s.conf");
    std::fs::write(&path, cfg.to_config_string()).unwrap();
    assert_eq!(RunConfig::from_file(&path, &[]).unwrap(), cfg);
    let by_name = RunConfig::parse("scenario = stabilization\n", &[]).unwrap();
    assert_eq!(by_name, cfg);
}

#[test]
fn checks_are_reported_by_name() {
    let mut cfg = small();
    cfg.checks = CheckKind::ALL.to_vec();
    cfg.check_window = Some((0.3, 0.6));
    let out = run(&cfg).unwrap();
    assert_eq!(out.checks.len(), CheckKind::ALL.len());
    for c in &out.checks {
        if let Ok(b) = &c.outcome {
            assert_eq!(b.name, c.kind.name());
            assert!((0.0..=1.0).contains(&b.satisfied_fraction));
        }
    }
    assert!(out.check(CheckKind::Positivity).unwrap().passed());
    assert!(out.check(CheckKind::MaxPrinciple).unwrap().passed());
}

#[test]
fn sweep_single_duplicates_and_isolation() {
    let base = small();
    let one = sweep_mu(&base, &[2.0], 1).unwrap();
    assert_eq!(one.len(), 1);
    assert!(one[0].bounded && one[0].completed);

    let serial = sweep_mu(&base, &[3.0, 1.0, 3.0, 0.5], 1).unwrap();
    let parallel = sweep_mu(&base, &[0.5, 3.0, 3.0, 1.0], 3).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(serial.iter().map(|r| r.mu).collect::<Vec<_>>(), vec![0.5, 1.0, 3.0, 3.0]);
    assert_eq!(serial[2], serial[3]);
    assert_eq!(serial[1].final_dev_inf, one_run(&base, 1.0));

    assert!(sweep_mu(&base, &[], 1).is_err());
    assert!(sweep_mu(&base, &[0.0], 1).is_err());
    assert!(sweep_mu(&base, &[1.0], 0).is_err());
}

fn one_run(base: &RunConfig, mu: f64) -> Option<f64> {
    let mut cfg = base.clone();
    cfg.params.mu = mu;
    run(&cfg).ok().map(|o| o.rows.last().unwrap().dev_inf)
}

#[test]
fn solver_failure_is_reported_with_time() {
    let mut cfg = small();
    cfg.params.init.preset = chemoflow::chemo::Preset::VortexFluid;
    cfg.fluid.poisson_max_iter = Some(2);
    match run(&cfg) {
        Err(e @ RunError::Step { .. }) => {
            assert_eq!(e.exit_code(), 1);
            let text = e.to_string();
            assert!(text.contains("t = 0"), "{text}");
            assert!(text.contains("did not converge"), "{text}");
        }
        other => panic!("expected a step failure, got {:?}", other.map(|o| o.rows.len())),
    }
}
