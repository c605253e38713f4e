//! Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

use std::time::Instant;

use jetgauge::connections::{curvature, ConnectionForm};
use jetgauge::harness::*;
use jetgauge::lie::{GroupKind, MatrixGroup};
use jetgauge::taylor::{seed_coordinates, Polynomial, TaylorScalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn scenario(group: &str, fiber: &str, n: usize, trials: usize, suites: &[&str]) -> Scenario {
    Scenario {
        label: format!("{group}-{fiber}-n{n}"),
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

fn run(seed: u64, scenarios: Vec<Scenario>) -> Report {
    let config = Config { seed, conventions: None, scenarios };
    run_config(&config, &RunOptions::default()).expect("run succeeds").report
}

/// Worst check among `names` (or all when empty), with its residual and tolerance.
fn worst<'a>(report: &'a Report, names: &[&str]) -> Option<&'a CheckReport> {
    report
        .checks
        .iter()
        .filter(|c| names.is_empty() || names.contains(&c.check.as_str()))
        .max_by(|a, b| (a.max_residual / a.tolerance.max(1e-300)).total_cmp(&(b.max_residual / b.tolerance.max(1e-300))))
}

fn verdict(criterion: u32, title: &str, pass: bool, detail: String) {
    println!("{} criterion {criterion} ({title}): {detail}", if pass { "PASS" } else { "FAIL" });
}

fn min_trials(report: &Report, names: &[&str]) -> usize {
    report.checks.iter().filter(|c| names.contains(&c.check.as_str())).map(|c| c.trials).min().unwrap_or(0)
}

fn failing(report: &Report, names: &[&str]) -> Vec<String> {
    report
        .checks
        .iter()
        .filter(|c| !c.pass && (names.is_empty() || names.contains(&c.check.as_str())))
        .map(|c| format!("{}/{}: {:e} > {:e}", c.scenario, c.check, c.max_residual, c.tolerance))
        .collect()
}

const AXIOM_CHECKS: &[&str] = &[
    "gauge_groupoid.associativity",
    "gauge_groupoid.unit_inverse",
    "gauge_groupoid.action",
    "gauge_groupoid.isotropy_embed",
    "jet_groupoid.associativity",
    "jet_groupoid.unit_inverse",
    "jet_groupoid.functoriality",
    "jet_groupoid.je_action",
    "jet_group.associativity",
    "jet_group.unit_inverse",
    "prolonged.right_action",
    "fiber_action.tangent",
    "fiber_action.jet",
    "fiber_action.linearized",
    "fiber_action.cp",
];

#[test]
fn criterion_1_algebraic_axioms() {
    let start = Instant::now();
    let report = run(
        101,
        vec![
            scenario("U1", "linear", 1, 500, &["axioms"]),
            scenario("U1", "linear", 2, 500, &["axioms"]),
            scenario("SO3", "adjoint", 1, 500, &["axioms"]),
            scenario("SO3", "linear", 2, 500, &["axioms"]),
        ],
    );
    let elapsed = start.elapsed().as_secs_f64();
    let axioms: Vec<_> = report.checks.iter().filter(|c| AXIOM_CHECKS.contains(&c.check.as_str())).collect();
    let max = axioms.iter().map(|c| c.max_residual).fold(0.0, f64::max);
    let all_tight = axioms.iter().all(|c| c.pass && c.tolerance <= 1e-12);
    let enough = axioms.len() == 4 * AXIOM_CHECKS.len() && min_trials(&report, AXIOM_CHECKS) >= 500;
    let pass = all_tight && enough && elapsed <= 30.0;
    verdict(1, "algebraic axioms", pass, format!("max residual {max:e} over {} checks, {elapsed:.1} s", axioms.len()));
    assert!(pass, "{:#?}", failing(&report, AXIOM_CHECKS));
}

#[test]
fn criterion_2_first_order_difference_equivariance() {
    let names = ["difference_first.equivariance"];
    let report = run(
        102,
        vec![
            scenario("U1", "linear", 2, 250, &["prop21"]),
            scenario("SO3", "adjoint", 2, 250, &["prop21"]),
            scenario("SU2", "conjugation", 3, 100, &["prop21"]),
        ],
    );
    let w = worst(&report, &names).unwrap();
    let trials: usize = report.checks.iter().filter(|c| c.check == names[0]).map(|c| c.trials).sum();
    let pass = report.pass && trials >= 500 && w.tolerance <= 1e-10;
    verdict(2, "first-order difference map", pass, format!("max residual {:e} over {trials} trials", w.max_residual));
    assert!(pass, "{:#?}", failing(&report, &[]));
}

#[test]
fn criterion_3_second_order_differences_and_flags() {
    let diagrams = ["difference_second.equivariance", "alternator.equivariance"];
    let flags = ["flags.semiholonomy_preserved", "flags.holonomy_preserved"];
    let report = run(
        103,
        vec![
            scenario("U1", "linear", 2, 150, &["prop22"]),
            scenario("SO3", "adjoint", 2, 150, &["prop22"]),
            scenario("SU2", "linear", 3, 100, &["prop22"]),
        ],
    );
    let d = worst(&report, &diagrams).unwrap();
    let f = worst(&report, &flags).unwrap();
    let trials: usize = report.checks.iter().filter(|c| c.check == diagrams[0]).map(|c| c.trials).sum();
    let pass = report.pass && trials >= 300 && d.tolerance <= 1e-9 && f.tolerance <= 1e-12;
    verdict(
        3,
        "second-order differences",
        pass,
        format!("diagram residual {:e}, flag residual {:e}, {trials} trials", d.max_residual, f.max_residual),
    );
    assert!(pass, "{:#?}", failing(&report, &[]));
}

#[test]
fn criterion_4_coupling_and_curvature_equivariance() {
    let names = ["minimal_coupling.equivariance", "curvature.equivariance"];
    let suites = ["pin_conventions", "thm41", "thm42"];
    let report = run(
        104,
        vec![
            scenario("U1", "linear", 2, 100, &suites),
            scenario("U1", "adjoint", 1, 100, &suites),
            scenario("SO3", "linear", 2, 100, &suites),
            scenario("SO3", "adjoint", 3, 100, &suites),
            scenario("SU2", "linear", 2, 100, &suites),
            scenario("SU2", "adjoint", 2, 100, &suites),
        ],
    );
    let w = worst(&report, &names).unwrap();
    let trials: usize = report.checks.iter().filter(|c| c.check == names[0]).map(|c| c.trials).sum();
    let pass = report.pass && trials >= 500 && w.tolerance <= 1e-9 && w.kind == ToleranceKind::Rel;
    verdict(4, "coupling and curvature equivariance", pass, format!("max relative residual {:e} over {trials} scenarios", w.max_residual));
    assert!(pass, "{:#?}", failing(&report, &[]));
}

#[test]
fn criterion_5_curvature_oracle() {
    let report = run(
        105,
        vec![
            scenario("SO3", "linear", 2, 100, &["pin_conventions", "curvature_oracle"]),
            scenario("SU2", "linear", 3, 100, &["curvature_oracle"]),
            scenario("U1", "linear", 2, 100, &["curvature_oracle"]),
        ],
    );
    let ledger = report.conventions.expect("pinned");
    let s = ledger.curvature_sign as f64;

    // x dy ⊗ X₀ on SO(3): F(∂₁, ∂₂) = s·X₀ with unit coefficient, everywhere
    let group = MatrixGroup::new(GroupKind::SO(3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut direct: f64 = 0.0;
    for k in 0..group.dim() {
        let x_poly = Polynomial { nvars: 2, terms: vec![(1.0, vec![1, 0])] };
        let mut coeffs = vec![vec![Polynomial::zero(2); group.dim()]; 2];
        coeffs[1][k] = x_poly;
        let a = ConnectionForm::polynomial(&group, coeffs).unwrap();
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let f = curvature(&a, &x).unwrap();
        direct = direct.max((f.component(0, 1) - &group.basis()[k] * s).amax());
    }

    let names =
        ["curvature_oracle.constant_bracket", "curvature_oracle.x_dy", "curvature_oracle.pure_gauge"];
    let w = worst(&report, &names).unwrap();
    let pass = report.pass && direct <= 1e-12 && names.iter().all(|n| report.checks.iter().any(|c| c.check == *n));
    verdict(
        5,
        "curvature oracle",
        pass,
        format!("sign s = {}, worst oracle residual {:e}, x dy residual {direct:e}", ledger.curvature_sign, w.max_residual),
    );
    assert!(pass, "{:#?}", failing(&report, &[]));
}

#[test]
fn criterion_6_jet_groupoid_is_gauge_groupoid() {
    let names = ["jggg.invariance", "jggg.round_trip", "jggg.morphism", "jggg_inverse.morphism"];
    let report = run(
        106,
        vec![
            scenario("U1", "linear", 2, 500, &["appendix"]),
            scenario("SO3", "adjoint", 2, 500, &["appendix"]),
            scenario("GL", "principal", 3, 200, &["appendix"]),
        ],
    );
    let tolerances_ok = names.iter().zip([1e-11, 1e-12, 1e-10, 1e-10]).all(|(n, t)| {
        report.checks.iter().filter(|c| c.check == *n).all(|c| c.tolerance <= t)
    });
    let w = worst(&report, &names).unwrap();
    let pass = report.pass && tolerances_ok && min_trials(&report, &names) >= 200;
    verdict(6, "jet groupoid of the gauge groupoid", pass, format!("worst {} at {:e}", w.check, w.max_residual));
    assert!(pass, "{:#?}", failing(&report, &[]));
}

/// Exact partial derivatives of a polynomial, from its monomials.
fn exact_derivatives(p: &Polynomial, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = x.len();
    let mono = |e: &[u32], d: &[usize]| -> f64 {
        let mut e = e.to_vec();
        let mut c = 1.0;
        for &i in d {
            if e[i] == 0 {
                return 0.0;
            }
            c *= e[i] as f64;
            e[i] -= 1;
        }
        c * e.iter().zip(x).map(|(&k, v)| v.powi(k as i32)).product::<f64>()
    };
    let grad = (0..n).map(|i| p.terms.iter().map(|(c, e)| c * mono(e, &[i])).sum()).collect();
    let hess = (0..n)
        .map(|i| (0..n).map(|j| p.terms.iter().map(|(c, e)| c * mono(e, &[i, j])).sum()).collect())
        .collect();
    (grad, hess)
}

fn composite(p: TaylorScalar, q: TaylorScalar) -> TaylorScalar {
    p.sin() * q.scale(0.5).exp()
}

#[test]
fn criterion_7_taylor_core() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let (mut symbolic, mut fd): (f64, f64) = (0.0, 0.0);
    let h = 1e-4;
    for trial in 0..500 {
        let n = 1 + trial % 3;
        let degree = 1 + (trial % 4) as u32;
        let p = Polynomial::random(n, degree, 1.0, &mut rng);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let seeded = seed_coordinates(&x).unwrap();

        let t = p.eval(&seeded);
        let (grad, hess) = exact_derivatives(&p, &x);
        let scale = grad.iter().chain(hess.iter().flatten()).fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..n {
            symbolic = symbolic.max((t.d(i) - grad[i]).abs() / scale);
            for j in 0..n {
                symbolic = symbolic.max((t.d2(i, j) - hess[i][j]).abs() / scale);
            }
        }

        // non-polynomial composite against central differences; unit-scale
        // inputs keep the O(h²) truncation error well below the bound
        let p = Polynomial::random(n, degree, 0.5, &mut rng);
        let q = Polynomial::random(n, degree, 0.5, &mut rng);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let seeded = seed_coordinates(&x).unwrap();
        let f = |y: &[f64]| p.eval_f64(y).sin() * (0.5 * q.eval_f64(y)).exp();
        let t = composite(p.eval(&seeded), q.eval(&seeded));
        let shifted = |moves: &[(usize, f64)]| {
            let mut y = x.clone();
            for &(i, d) in moves {
                y[i] += d;
            }
            f(&y)
        };
        for i in 0..n {
            let g = (shifted(&[(i, h)]) - shifted(&[(i, -h)])) / (2.0 * h);
            fd = fd.max((t.d(i) - g).abs());
            for j in 0..n {
                let hij = (shifted(&[(i, h), (j, h)]) - shifted(&[(i, h), (j, -h)]) - shifted(&[(i, -h), (j, h)])
                    + shifted(&[(i, -h), (j, -h)]))
                    / (4.0 * h * h);
                fd = fd.max((t.d2(i, j) - hij).abs());
            }
        }
    }
    let report = run(107, vec![scenario("U1", "linear", 3, 200, &["axioms"])]);
    let names = ["taylor.symbolic", "taylor.finite_difference"];
    let suite_ok = names.iter().all(|n| report.checks.iter().any(|c| c.check == *n && c.pass));
    let pass = symbolic <= 1e-12 && fd <= 1e-6 && suite_ok;
    verdict(7, "Taylor core", pass, format!("symbolic residual {symbolic:e}, finite-difference residual {fd:e}"));
    assert!(pass, "{:#?}", failing(&report, &names));
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = vec![
        scenario("SO3", "adjoint", 2, 20, &SUITES),
        scenario("U1", "callback", 1, 20, &["axioms", "prop21", "prop22"]),
    ];
    let config = Config { seed: 108, conventions: None, scenarios };
    let mut bytes = Vec::new();
    for (k, format) in [(0, Format::Json), (1, Format::Json), (2, Format::Csv), (3, Format::Csv)] {
        let report = run_config(&config, &RunOptions::default()).unwrap().report;
        let path = dir.path().join(format!("r{k}"));
        emit(&report, format, &path).unwrap();
        bytes.push(std::fs::read(&path).unwrap());
    }
    let round_trip = Report::from_json(std::str::from_utf8(&bytes[0]).unwrap()).unwrap();
    let json_rows: usize = round_trip.checks.iter().map(|c| c.residuals.len()).sum();
    let csv_rows = std::str::from_utf8(&bytes[2]).unwrap().lines().count() - 1;
    let pass = bytes[0] == bytes[1] && bytes[2] == bytes[3] && json_rows == csv_rows && round_trip.to_json().as_bytes() == bytes[0];
    verdict(8, "determinism", pass, format!("{} JSON bytes, {csv_rows} CSV rows", bytes[0].len()));
    assert!(pass);
}
