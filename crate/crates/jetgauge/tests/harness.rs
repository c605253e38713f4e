use jetgauge::harness::*;
use jetgauge::Error;

fn scenario(label: &str, group: &str, fiber: &str, n: usize, trials: usize, suites: &[&str]) -> Scenario {
    Scenario {
        label: label.into(),
        base_dim: n,
        group: group.into(),
        matrix_size: 2,
        fiber: fiber.into(),
        degrees: Degrees::default(),
        trials,
        seed: None,
        tolerances: Tolerances::default(),
        suites: suites.iter().map(|s| s.to_string()).collect(),
    }
}

fn all_suites() -> Vec<&'static str> {
    SUITES.to_vec()
}

fn failures(report: &Report) -> Vec<String> {
    report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| format!("{}/{}/{}: {:e} > {:e}", c.scenario, c.suite, c.check, c.max_residual, c.tolerance))
        .collect()
}

#[test]
fn every_suite_passes_across_groups_and_fibers() {
    let s = all_suites();
    let config = Config {
        seed: 11,
        conventions: None,
        scenarios: vec![
            scenario("u1-linear", "U1", "linear", 2, 6, &s),
            scenario("so3-adjoint", "SO3", "adjoint", 3, 6, &s),
            scenario("su2-conj", "SU2", "conjugation", 2, 6, &s),
            scenario("gl2-left", "GL", "principal", 2, 6, &s),
            scenario("so3-twisted", "SO3", "callback", 1, 6, &s),
        ],
    };
    let out = run_config(&config, &RunOptions::default()).unwrap();
    assert!(out.report.pass, "{:#?}", failures(&out.report));
    let ledger = out.pinned.unwrap();
    assert_eq!((ledger.curvature_sign, ledger.covariant_derivative_sign), (-1, 1));
    assert_eq!(ledger.alternator_factor, 0.5);
    // the callback fiber has no closed form
    assert!(out.report.check("so3-twisted", "minimal_coupling.closed_form").is_none());
    assert!(out.report.check("u1-linear", "minimal_coupling.closed_form").is_some());
    // x dy needs a 2-dimensional base
    assert!(out.report.check("so3-twisted", "curvature_oracle.x_dy").is_none());
}

#[test]
fn ledger_dependent_suites_refuse_to_run_unpinned() {
    for suite in ["thm41", "thm42", "curvature_oracle"] {
        let config = Config {
            seed: 1,
            conventions: None,
            scenarios: vec![scenario("s", "U1", "linear", 2, 2, &[suite])],
        };
        let err = run_config(&config, &RunOptions::default()).unwrap_err();
        assert!(matches!(err, Error::ConventionUnpinned(_)), "{suite}: {err}");
    }
}

#[test]
fn ledger_is_read_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("conventions.json");
    let ledger = ConventionLedger { alternator_factor: 0.5, curvature_sign: -1, covariant_derivative_sign: 1 };
    ledger.save(&path).unwrap();
    let config = Config {
        seed: 1,
        conventions: Some(path.clone()),
        scenarios: vec![scenario("s", "SO3", "linear", 2, 3, &["thm41", "thm42"])],
    };
    let out = run_config(&config, &RunOptions::default()).unwrap();
    assert!(out.report.pass);
    assert!(out.pinned.is_none());
    assert_eq!(out.report.conventions, Some(ledger));

    // a wrong sign on disk is caught by the closed-form checks
    let wrong = ConventionLedger { curvature_sign: 1, ..ledger };
    wrong.save(&path).unwrap();
    let out = run_config(&config, &RunOptions::default()).unwrap();
    assert!(!out.report.check("s", "curvature.closed_form").unwrap().pass);
}

#[test]
fn runs_are_deterministic_and_round_trip() {
    let config = Config {
        seed: 5,
        conventions: None,
        scenarios: vec![scenario("s", "SU2", "adjoint", 2, 8, &["pin_conventions", "prop22", "thm42"])],
    };
    let a = run_config(&config, &RunOptions::default()).unwrap().report;
    let b = run_config(&config, &RunOptions::default()).unwrap().report;
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(Report::from_json(&a.to_json()).unwrap(), a);
    assert!(a.wall_time_ms.is_none());

    let c = run_config(&config, &RunOptions { seed: Some(6), ..Default::default() }).unwrap().report;
    assert_ne!(a.to_json(), c.to_json());
}

#[test]
fn csv_has_one_row_per_residual() {
    let config = Config { seed: 2, conventions: None, scenarios: vec![scenario("s", "U1", "linear", 1, 4, &["prop21"])] };
    let report = run_config(&config, &RunOptions::default()).unwrap().report;
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("suite,check,scenario,trial,residual"));
    let rows: usize = report.checks.iter().map(|c| c.residuals.len()).sum();
    assert_eq!(lines.count(), rows);
    assert!(csv.contains("prop21,difference_first.equivariance,s,3,"));
}

#[test]
fn tolerance_overrides() {
    let mut s = scenario("s", "U1", "linear", 1, 2, &["prop21"]);
    s.tolerances.rel = Some(1e-3);
    let config = Config { seed: 2, conventions: None, scenarios: vec![s] };
    let report = run_config(&config, &RunOptions::default()).unwrap().report;
    assert_eq!(report.check("s", "difference_first.equivariance").unwrap().tolerance, 1e-3);
    assert_eq!(report.check("s", "difference_first.reconstruction").unwrap().tolerance, 1e-12);
    let opts = RunOptions { tol_rel: Some(0.0), ..Default::default() };
    let report = run_config(&config, &opts).unwrap().report;
    assert_eq!(report.check("s", "difference_first.equivariance").unwrap().tolerance, 0.0);
}

#[test]
fn named_suite_applies_to_every_scenario() {
    let config = Config {
        seed: 2,
        conventions: None,
        scenarios: vec![
            scenario("a", "U1", "linear", 1, 2, &["axioms"]),
            scenario("b", "SO3", "linear", 1, 2, &[]),
        ],
    };
    let opts = RunOptions { suite: Some("prop21".into()), ..Default::default() };
    let report = run_config(&config, &opts).unwrap().report;
    assert!(report.checks.iter().all(|c| c.suite == "prop21"));
    assert!(report.check("b", "je_action.bisection_oracle").is_some());
    assert!(run_config(&config, &RunOptions { suite: Some("bogus".into()), ..Default::default() }).is_err());
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        r#"{"scenarios":[{"label":"a","base_dim":4,"group":"U1","trials":1,"suites":[]}]}"#,
        r#"{"scenarios":[{"label":"a","base_dim":1,"group":"E8","trials":1,"suites":[]}]}"#,
        r#"{"scenarios":[{"label":"a","base_dim":1,"group":"U1","trials":0,"suites":[]}]}"#,
        r#"{"scenarios":[{"label":"a","base_dim":1,"group":"U1","trials":1,"suites":["nope"]}]}"#,
        r#"{"scenarios":[{"label":"a","base_dim":1,"group":"U1","fiber":"spinor","trials":1,"suites":[]}]}"#,
        r#"{"scenarios":[{"label":"a","base_dim":1,"group":"U1","trials":1,"suites":[],"degrees":{"bisection":5,"section":1,"connection":1}}]}"#,
        r#"{"scenarios":[], "extra": 1}"#,
    ];
    for text in bad {
        assert!(matches!(Config::from_json(text), Err(Error::Config(_))), "{text}");
    }
    let ok = r#"{"seed":3,"scenarios":[{"label":"a","base_dim":2,"group":"GL","matrix_size":3,"trials":1,"suites":["axioms"]}]}"#;
    assert_eq!(Config::from_json(ok).unwrap().scenarios[0].degrees, Degrees::default());
}
