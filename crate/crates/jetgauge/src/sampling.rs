//! Random generators for bisections, sections, connections and jets.

use std::sync::Arc;

use rand::Rng;

use crate::bundles::{flatten, FiberKind, FiberSpace};
use crate::connections::{ConnectionForm, ConnectionJet, ConnectionValue};
use crate::error::Result;
use crate::groupoids::{
    Bisection, JetGroupoidElement, JetOfSection, SecondJetGroupoidElement, SecondJetOfSection,
};
use crate::lie::{sample_algebra_map, sample_element, AlgebraLinearMap, Mat, MatrixGroup};
use crate::prolongation::{FiberJet, FrameTangent, JetGroupElement, ProlongedPoint};
use crate::taylor::{Polynomial, SmoothMap, TaylorMatrix};

/// Coefficient scale of the nonlinear parts of random programs.
const SMALL: f64 = 0.3;

/// Random square matrix I + ε·R with det ≥ 0.25.
pub fn sample_frame(n: usize, rng: &mut impl Rng, spread: f64) -> Mat {
    loop {
        let a = Mat::identity(n, n) + Mat::from_fn(n, n, |_, _| rng.gen_range(-spread..=spread));
        if a.determinant() >= 0.25 {
            return a;
        }
    }
}

fn random_polys(nvars: usize, count: usize, degree: u32, scale: f64, rng: &mut impl Rng) -> Vec<Polynomial> {
    (0..count).map(|_| Polynomial::random(nvars, degree, scale, rng)).collect()
}

/// g(x) = g₀·exp(Σ_b p_b(x) X_b) with random polynomial p_b of degree ≤ `degree`.
fn random_group_program(
    group: &Arc<MatrixGroup>,
    n: usize,
    degree: u32,
    rng: &mut impl Rng,
) -> impl Fn(&[crate::taylor::TaylorScalar]) -> TaylorMatrix + Send + Sync + 'static {
    let g0 = TaylorMatrix::from_matrix(sample_element(group, rng, 1.0).matrix());
    let polys = random_polys(n, group.dim(), degree, 0.5, rng);
    let basis: Vec<TaylorMatrix> = group.basis().iter().map(TaylorMatrix::from_matrix).collect();
    let m = group.size();
    move |x| {
        let gen = polys.iter().zip(&basis).fold(TaylorMatrix::zeros(m, m), |acc, (p, b)| &acc + &b.scale(&p.eval(x)));
        &g0 * &gen.exp().expect("finite generator")
    }
}

/// A perturbation of the identity bisection: ψ(x) = x + c + small polynomial.
pub fn sample_bisection(group: &Arc<MatrixGroup>, n: usize, degree: u32, rng: &mut impl Rng) -> Result<Bisection> {
    let shift: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..=0.3)).collect();
    let perturb: Vec<Polynomial> = (0..n)
        .map(|_| {
            let mut p = Polynomial::random(n, degree.max(1), SMALL / n as f64, rng);
            p.terms.retain(|(_, e)| e.iter().sum::<u32>() >= 1);
            p
        })
        .collect();
    let psi = SmoothMap::new(n, n, move |x| {
        (0..n).map(|i| x[i] + perturb[i].eval(x) + shift[i]).collect()
    });
    Bisection::new(psi, group, random_group_program(group, n, degree, rng))
}

/// A strict bisection (ψ = id).
pub fn sample_gauge_transformation(
    group: &Arc<MatrixGroup>,
    n: usize,
    degree: u32,
    rng: &mut impl Rng,
) -> Bisection {
    Bisection::strict(group, n, random_group_program(group, n, degree, rng))
}

/// A random polynomial section of E of degree ≤ `degree`.
pub fn sample_section(fiber: &FiberSpace, n: usize, degree: u32, rng: &mut impl Rng) -> SmoothMap {
    let group = fiber.group().clone();
    match fiber.kind() {
        FiberKind::Linear | FiberKind::Callback => {
            let polys = random_polys(n, fiber.dim(), degree, 1.0, rng);
            SmoothMap::new(n, fiber.dim(), move |x| polys.iter().map(|p| p.eval(x)).collect())
        }
        FiberKind::Adjoint => {
            let polys = random_polys(n, group.dim(), degree, 1.0, rng);
            let basis: Vec<TaylorMatrix> = group.basis().iter().map(TaylorMatrix::from_matrix).collect();
            let m = group.size();
            SmoothMap::new(n, m * m, move |x| {
                polys
                    .iter()
                    .zip(&basis)
                    .fold(TaylorMatrix::zeros(m, m), |acc, (p, b)| &acc + &b.scale(&p.eval(x)))
                    .into_entries()
            })
        }
        FiberKind::Conjugation | FiberKind::LeftTranslation => {
            let prog = random_group_program(&group, n, degree, rng);
            let m = group.size();
            SmoothMap::new(n, m * m, move |x| prog(x).into_entries())
        }
    }
}

/// A random polynomial connection of degree ≤ `degree`.
pub fn sample_connection(group: &Arc<MatrixGroup>, n: usize, degree: u32, rng: &mut impl Rng) -> Result<ConnectionForm> {
    let coefficients = (0..n).map(|_| random_polys(n, group.dim(), degree, 1.0, rng)).collect();
    ConnectionForm::polynomial(group, coefficients)
}

/// Factors (θ_i, X_i) for a pure-gauge connection, cycling through the basis.
pub fn sample_pure_gauge_factors(
    group: &Arc<MatrixGroup>,
    n: usize,
    degree: u32,
    rng: &mut impl Rng,
) -> Vec<(Polynomial, Mat)> {
    let count = group.dim().max(2);
    (0..count)
        .map(|i| (Polynomial::random(n, degree.max(1), 0.7, rng), group.basis()[i % group.dim()].clone()))
        .collect()
}

pub fn sample_point(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-0.5..=0.5)).collect()
}

/// A random element of JG with source `x`.
pub fn sample_jg(group: &Arc<MatrixGroup>, x: &[f64], rng: &mut impl Rng) -> JetGroupoidElement {
    let n = x.len();
    let y = x.iter().map(|v| v + rng.gen_range(-0.3..=0.3)).collect();
    JetGroupoidElement {
        x_src: x.to_vec(),
        x_tgt: y,
        h: sample_element(group, rng, 1.0),
        frame: sample_frame(n, rng, 0.4),
        xi: sample_algebra_map(group, n, rng, 1.0),
    }
}

/// A random semiholonomous element of J̄²G with source `x`; generically not holonomous.
pub fn sample_j2g_semiholonomous(group: &Arc<MatrixGroup>, x: &[f64], rng: &mut impl Rng) -> SecondJetGroupoidElement {
    let n = x.len();
    let first = sample_jg(group, x, rng);
    let dframe = (0..n).map(|_| Mat::from_fn(n, n, |_, _| rng.gen_range(-0.5..=0.5))).collect();
    let dxi = (0..n).map(|_| sample_algebra_map(group, n, rng, 1.0)).collect();
    SecondJetGroupoidElement {
        base_slope: first.frame.clone(),
        group_slope: first.xi.clone(),
        first,
        dframe,
        dxi,
    }
}

/// A random first jet of E at `x`.
pub fn sample_je(fiber: &FiberSpace, x: &[f64], rng: &mut impl Rng) -> JetOfSection {
    let q = fiber.random_point(rng);
    let slope = fiber.random_slope(&q, x.len(), rng);
    JetOfSection { x: x.to_vec(), value: q, slope }
}

/// A second random jet at the same point of E as `u`.
pub fn sample_je_at(fiber: &FiberSpace, u: &JetOfSection, rng: &mut impl Rng) -> JetOfSection {
    JetOfSection { slope: fiber.random_slope(&u.value, u.x.len(), rng), ..u.clone() }
}

fn random_curl(fiber: &FiberSpace, q: &[f64], n: usize, rng: &mut impl Rng) -> Vec<Mat> {
    (0..n).map(|_| fiber.random_slope(q, n, rng)).collect()
}

/// A random semiholonomous second jet of E over `first`.
pub fn sample_j2e_over(fiber: &FiberSpace, first: &JetOfSection, rng: &mut impl Rng) -> SecondJetOfSection {
    let n = first.x.len();
    SecondJetOfSection { slope2: first.slope.clone(), curl: random_curl(fiber, &first.value, n, rng), first: first.clone() }
}

/// A random holonomous second jet of E over `first` (symmetric curl).
pub fn sample_j2e_holonomous_over(fiber: &FiberSpace, first: &JetOfSection, rng: &mut impl Rng) -> SecondJetOfSection {
    let mut u = sample_j2e_over(fiber, first, rng);
    let n = u.curl.len();
    let c = u.curl.clone();
    for mu in 0..n {
        for nu in 0..n {
            let sym = (c[mu].column(nu) + c[nu].column(mu)) * 0.5;
            u.curl[mu].set_column(nu, &sym);
        }
    }
    u
}

pub fn sample_cp(group: &Arc<MatrixGroup>, x: &[f64], rng: &mut impl Rng) -> ConnectionValue {
    ConnectionValue { x: x.to_vec(), a: sample_algebra_map(group, x.len(), rng, 1.0) }
}

/// A random element of J(CP); the derivative block is not symmetric.
pub fn sample_connection_jet(group: &Arc<MatrixGroup>, x: &[f64], rng: &mut impl Rng) -> ConnectionJet {
    let n = x.len();
    ConnectionJet {
        x: x.to_vec(),
        a: sample_algebra_map(group, n, rng, 1.0),
        da: (0..n).map(|_| sample_algebra_map(group, n, rng, 1.0)).collect(),
    }
}

pub fn sample_jet_group(group: &Arc<MatrixGroup>, n: usize, rng: &mut impl Rng) -> JetGroupElement {
    JetGroupElement {
        frame: sample_frame(n, rng, 0.4),
        g: sample_element(group, rng, 1.0),
        xi: sample_algebra_map(group, n, rng, 1.0),
    }
}

pub fn sample_prolonged_point(group: &Arc<MatrixGroup>, x: &[f64], rng: &mut impl Rng) -> ProlongedPoint {
    let n = x.len();
    ProlongedPoint {
        x: x.to_vec(),
        frame: sample_frame(n, rng, 0.4),
        g: sample_element(group, rng, 1.0),
        body_slope: sample_algebra_map(group, n, rng, 1.0),
    }
}

pub fn sample_frame_tangent(fiber: &FiberSpace, n: usize, rng: &mut impl Rng) -> FrameTangent {
    let q = fiber.random_point(rng);
    FrameTangent { v: (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect(), vq: fiber.random_tangent(&q, rng), q }
}

pub fn sample_fiber_jet(fiber: &FiberSpace, n: usize, rng: &mut impl Rng) -> FiberJet {
    let q = fiber.random_point(rng);
    FiberJet { slope: fiber.random_slope(&q, n, rng), q }
}

/// Random A₀ ∈ L(Rⁿ, 𝔤₀).
pub fn sample_cp_coordinate(group: &Arc<MatrixGroup>, n: usize, rng: &mut impl Rng) -> AlgebraLinearMap {
    sample_algebra_map(group, n, rng, 1.0)
}

/// Flattened identity of the group, the base point of E = P.
pub fn principal_identity(group: &Arc<MatrixGroup>) -> Vec<f64> {
    flatten(&Mat::identity(group.size(), group.size()))
}
