//! Connections: difference maps, the alternator, the connection bundle CP, the
//! associated connection on E, minimal coupling D and curvature F, together with
//! the actions of JG on CP and of J̄²G on J(CP).
//!
//! Sign conventions. A value `a` of CP at x is stored as the body slope of the
//! horizontal lift at (x, e) with the sign flipped: the lift is v ↦ −a(v). With
//! this choice D = ∂φ − (a)_Q(φ), which is ∂φ + aφ for a linear fiber, and the
//! curvature readout is −(da + [a, a]).

use std::fmt;
use std::sync::Arc;

use crate::bundles::{base_distance, flatten, unflatten, AssociatedPoint, FiberSpace, EPS_BASE};
use crate::error::{check_dim, Error, Result};
use crate::groupoids::{
    act_j2g_on_j2e, act_jg_on_je, JetGroupoidElement, JetOfSection, SecondJetGroupoidElement, SecondJetOfSection,
    EPS_SEMIHOLONOMOUS,
};
use crate::lie::{same_group, AlgebraLinearMap, GroupElement, Mat, MatrixGroup};
use crate::taylor::{seed_coordinates, Polynomial, SmoothMap, TaylorMatrix, TaylorScalar};

fn invert(a: &Mat) -> Result<Mat> {
    let det = a.determinant().abs();
    if det < crate::lie::EPS_DET {
        return Err(Error::SingularMatrix(det));
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix(det))
}

// ---------------------------------------------------------------------------
// Vertical-valued forms
// ---------------------------------------------------------------------------

/// L(Rⁿ, V_qE) at a point of E: column ν is the value on e_ν.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalOneForm {
    pub x: Vec<f64>,
    pub point: Vec<f64>,
    pub coefficients: Mat,
}

impl VerticalOneForm {
    /// (a, h)·V = T L_h ∘ V ∘ a⁻¹, landing over the target of `u`.
    pub fn transport(&self, u: &JetGroupoidElement, fiber: &FiberSpace) -> Result<Self> {
        let ainv = invert(&u.frame)?;
        Ok(Self {
            x: u.x_tgt.clone(),
            point: fiber.act(&u.h, &self.point)?,
            coefficients: fiber.push_slope(u.h.matrix(), &self.point, &self.coefficients)? * ainv,
        })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x)
            .max(base_distance(&self.point, &other.point))
            .max((&self.coefficients - &other.coefficients).amax())
    }
}

/// Bilinear L(Rⁿ ⊗ Rⁿ, V_qE): `coefficients[μ]` column ν is B(e_μ, e_ν).
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalBilinear {
    pub x: Vec<f64>,
    pub point: Vec<f64>,
    pub coefficients: Vec<Mat>,
}

fn bilinear_part(c: &[Mat], sign: f64) -> Vec<Mat> {
    let n = c.len();
    (0..n)
        .map(|mu| {
            let k = c[mu].nrows();
            Mat::from_fn(k, n, |i, nu| 0.5 * (c[mu][(i, nu)] + sign * c[nu][(i, mu)]))
        })
        .collect()
}

fn bilinear_transport(c: &[Mat], push: impl Fn(&Mat) -> Result<Mat>, ainv: &Mat) -> Result<Vec<Mat>> {
    let n = c.len();
    let pushed = c.iter().map(push).collect::<Result<Vec<_>>>()?;
    Ok((0..n)
        .map(|mu2| {
            let k = pushed[0].nrows();
            let mut out = Mat::zeros(k, n);
            for mu in 0..n {
                out += (&pushed[mu] * ainv) * ainv[(mu, mu2)];
            }
            out
        })
        .collect())
}

fn bilinear_distance(a: &[Mat], b: &[Mat]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).amax()))
}

impl VerticalBilinear {
    /// ½(B + Bᵀ).
    pub fn symmetric(&self) -> Self {
        Self { coefficients: bilinear_part(&self.coefficients, 1.0), ..self.clone() }
    }

    /// ½(B − Bᵀ).
    pub fn antisymmetric(&self) -> VerticalTwoForm {
        VerticalTwoForm {
            x: self.x.clone(),
            point: self.point.clone(),
            coefficients: bilinear_part(&self.coefficients, -1.0),
        }
    }

    pub fn transport(&self, u: &JetGroupoidElement, fiber: &FiberSpace) -> Result<Self> {
        let ainv = invert(&u.frame)?;
        let coefficients =
            bilinear_transport(&self.coefficients, |c| fiber.push_slope(u.h.matrix(), &self.point, c), &ainv)?;
        Ok(Self { x: u.x_tgt.clone(), point: fiber.act(&u.h, &self.point)?, coefficients })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x)
            .max(base_distance(&self.point, &other.point))
            .max(bilinear_distance(&self.coefficients, &other.coefficients))
    }
}

/// Antisymmetric bilinear L(Λ²Rⁿ, V_qE), same layout as [`VerticalBilinear`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalTwoForm {
    pub x: Vec<f64>,
    pub point: Vec<f64>,
    pub coefficients: Vec<Mat>,
}

impl VerticalTwoForm {
    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.coefficients.len();
        let mut d: f64 = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                d = d.max((self.coefficients[mu].column(nu) + self.coefficients[nu].column(mu)).amax());
            }
        }
        d
    }

    pub fn transport(&self, u: &JetGroupoidElement, fiber: &FiberSpace) -> Result<Self> {
        let ainv = invert(&u.frame)?;
        let coefficients =
            bilinear_transport(&self.coefficients, |c| fiber.push_slope(u.h.matrix(), &self.point, c), &ainv)?;
        Ok(Self { x: u.x_tgt.clone(), point: fiber.act(&u.h, &self.point)?, coefficients })
    }

    pub fn amax(&self) -> f64 {
        self.coefficients.iter().fold(0.0, |m, c| m.max(c.amax()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x)
            .max(base_distance(&self.point, &other.point))
            .max(bilinear_distance(&self.coefficients, &other.coefficients))
    }
}

/// Curvature value F ∈ L(Λ²Rⁿ, 𝔤₀) at x; `component(μ, ν)` = F(∂_μ, ∂_ν)
/// with the pairing (v ∧ w)(α, β) = α(v)β(w) − α(w)β(v).
#[derive(Debug, Clone)]
pub struct CurvatureValue {
    pub x: Vec<f64>,
    group: Arc<MatrixGroup>,
    components: Vec<Vec<Mat>>,
}

impl CurvatureValue {
    pub fn new(x: Vec<f64>, group: &Arc<MatrixGroup>, components: Vec<Vec<Mat>>) -> Result<Self> {
        let n = x.len();
        check_dim(n, components.len())?;
        for row in &components {
            check_dim(n, row.len())?;
            for c in row {
                let r = group.algebra_residual(c);
                if r > group.tolerance() {
                    return Err(Error::NotInAlgebra(r));
                }
            }
        }
        Ok(Self { x, group: group.clone(), components })
    }

    pub fn zero(group: &Arc<MatrixGroup>, x: &[f64]) -> Self {
        let (n, m) = (x.len(), group.size());
        Self { x: x.to_vec(), group: group.clone(), components: vec![vec![Mat::zeros(m, m); n]; n] }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    pub fn component(&self, mu: usize, nu: usize) -> &Mat {
        &self.components[mu][nu]
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        let n = self.components.len();
        let mut d: f64 = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                d = d.max((&self.components[mu][nu] + &self.components[nu][mu]).amax());
            }
        }
        d
    }

    /// (a, g)·F = Ad(g) ∘ F ∘ (a⁻¹ ∧ a⁻¹), landing at `x_tgt`.
    pub fn transport(&self, frame: &Mat, g: &GroupElement, x_tgt: &[f64]) -> Result<Self> {
        same_group(&self.group, g.group())?;
        let ainv = invert(frame)?;
        let n = self.components.len();
        let m = self.group.size();
        let ginv = g.inv()?;
        let ad: Vec<Vec<Mat>> = self
            .components
            .iter()
            .map(|row| row.iter().map(|c| g.matrix() * c * ginv.matrix()).collect())
            .collect();
        let components = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let mut out = Mat::zeros(m, m);
                        for mu in 0..n {
                            for nu in 0..n {
                                out += &ad[mu][nu] * (ainv[(mu, a)] * ainv[(nu, b)]);
                            }
                        }
                        out
                    })
                    .collect()
            })
            .collect();
        Ok(Self { x: x_tgt.to_vec(), group: self.group.clone(), components })
    }

    pub fn amax(&self) -> f64 {
        self.components.iter().flatten().fold(0.0, |m, c| m.max(c.amax()))
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .fold(base_distance(&self.x, &other.x), |m, (a, b)| m.max((a - b).amax()))
    }
}

// ---------------------------------------------------------------------------
// Difference maps and the alternator
// ---------------------------------------------------------------------------

/// u₁ − u₂ for first jets at the same point of E.
pub fn difference_first(u1: &JetOfSection, u2: &JetOfSection) -> Result<VerticalOneForm> {
    let d = base_distance(&u1.x, &u2.x).max(base_distance(&u1.value, &u2.value));
    if d > EPS_BASE {
        return Err(Error::BasePointMismatch(d));
    }
    check_dim(u1.slope.len(), u2.slope.len())?;
    Ok(VerticalOneForm { x: u1.x.clone(), point: u1.value.clone(), coefficients: &u1.slope - &u2.slope })
}

/// u′₁ − u′₂ over a common first jet.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondDifference {
    /// Difference of the second-order blocks.
    pub bilinear: VerticalBilinear,
    /// Difference of the projected slopes; zero when both inputs are semiholonomous.
    pub drift: VerticalOneForm,
}

pub fn difference_second(u1: &SecondJetOfSection, u2: &SecondJetOfSection) -> Result<SecondDifference> {
    let d = u1.first.distance(&u2.first);
    if d > EPS_BASE {
        return Err(Error::FirstJetMismatch(d));
    }
    let (x, point) = (u1.first.x.clone(), u1.first.value.clone());
    let coefficients = u1.curl.iter().zip(&u2.curl).map(|(a, b)| a - b).collect();
    Ok(SecondDifference {
        bilinear: VerticalBilinear { x: x.clone(), point: point.clone(), coefficients },
        drift: VerticalOneForm { x, point, coefficients: &u1.slope2 - &u2.slope2 },
    })
}

/// Antisymmetric part of u′ − u′⁰ for any holonomous u′⁰ over the same first jet.
pub fn alternator(u: &SecondJetOfSection) -> Result<VerticalTwoForm> {
    let d = u.semiholonomy_defect();
    if d > EPS_SEMIHOLONOMOUS {
        return Err(Error::NotSemiholonomous(d));
    }
    Ok(VerticalTwoForm {
        x: u.first.x.clone(),
        point: u.first.value.clone(),
        coefficients: bilinear_part(&u.curl, -1.0),
    })
}

// ---------------------------------------------------------------------------
// Connection bundle
// ---------------------------------------------------------------------------

/// A point of CP: x with its canonical coordinate a ∈ L(Rⁿ, 𝔤₀).
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionValue {
    pub x: Vec<f64>,
    pub a: AlgebraLinearMap,
}

impl ConnectionValue {
    pub fn new(x: Vec<f64>, a: AlgebraLinearMap) -> Result<Self> {
        check_dim(x.len(), a.len())?;
        Ok(Self { x, a })
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.a.group()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x).max(self.a.distance(&other.a))
    }
}

/// Connection program: x ↦ (A_ν(x))_ν with A_ν(x) ∈ 𝔤₀.
pub type ConnectionProgram = dyn Fn(&[TaylorScalar]) -> Vec<TaylorMatrix> + Send + Sync;

/// A local principal connection, i.e. a section of CP over the chart.
#[derive(Clone)]
pub struct ConnectionForm {
    group: Arc<MatrixGroup>,
    base_dim: usize,
    program: Arc<ConnectionProgram>,
}

impl fmt::Debug for ConnectionForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConnectionForm({:?}, n = {})", self.group.kind(), self.base_dim)
    }
}

impl ConnectionForm {
    pub fn new(
        group: &Arc<MatrixGroup>,
        base_dim: usize,
        program: impl Fn(&[TaylorScalar]) -> Vec<TaylorMatrix> + Send + Sync + 'static,
    ) -> Self {
        Self { group: group.clone(), base_dim, program: Arc::new(program) }
    }

    pub fn zero(group: &Arc<MatrixGroup>, base_dim: usize) -> Self {
        let m = group.size();
        Self::new(group, base_dim, move |_| vec![TaylorMatrix::zeros(m, m); base_dim])
    }

    pub fn constant(a: &AlgebraLinearMap) -> Self {
        let cols: Vec<TaylorMatrix> = a.columns().iter().map(TaylorMatrix::from_matrix).collect();
        Self::new(a.group(), a.len(), move |_| cols.clone())
    }

    /// A_ν(x) = Σ_b coefficients[ν][b](x) · basis_b.
    pub fn polynomial(group: &Arc<MatrixGroup>, coefficients: Vec<Vec<Polynomial>>) -> Result<Self> {
        let n = coefficients.len();
        for row in &coefficients {
            check_dim(group.dim(), row.len())?;
        }
        let basis: Vec<TaylorMatrix> = group.basis().iter().map(TaylorMatrix::from_matrix).collect();
        let m = group.size();
        Ok(Self::new(group, n, move |x| {
            coefficients
                .iter()
                .map(|row| {
                    row.iter().zip(&basis).fold(TaylorMatrix::zeros(m, m), |acc, (p, b)| &acc + &b.scale(&p.eval(x)))
                })
                .collect()
        }))
    }

    /// g⁻¹dg for g(x) = Π_i exp(θ_i(x) X_i), with the product taken left to right.
    pub fn pure_gauge(group: &Arc<MatrixGroup>, factors: Vec<(Polynomial, Mat)>) -> Result<Self> {
        let n = factors.first().map_or(0, |(p, _)| p.nvars);
        for (p, gen) in &factors {
            check_dim(n, p.nvars)?;
            let r = group.algebra_residual(gen);
            if r > group.tolerance() {
                return Err(Error::NotInAlgebra(r));
            }
        }
        let m = group.size();
        let derivs: Vec<Vec<Polynomial>> =
            factors.iter().map(|(p, _)| (0..n).map(|nu| p.derivative(nu)).collect()).collect();
        Ok(Self::new(group, n, move |x| {
            let k = factors.len();
            // tail[i] = (Π_{j>i} exp(θ_j X_j))⁻¹
            let mut tail = vec![TaylorMatrix::identity(m); k];
            for i in (0..k.saturating_sub(1)).rev() {
                let (p, gen) = &factors[i + 1];
                let inv = TaylorMatrix::from_matrix(&(-gen)).scale(&p.eval(x)).exp().expect("finite exponent");
                tail[i] = &tail[i + 1] * &inv;
            }
            (0..n)
                .map(|nu| {
                    (0..k).fold(TaylorMatrix::zeros(m, m), |acc, i| {
                        let gen = TaylorMatrix::from_matrix(&factors[i].1);
                        let head = tail[i].try_inverse(0.0).expect("group element");
                        let conj = &(&tail[i] * &gen) * &head;
                        &acc + &conj.scale(&derivs[i][nu].eval(x))
                    })
                })
                .collect()
        }))
    }

    /// The group program x ↦ Π_i exp(θ_i(x) X_i) matching [`ConnectionForm::pure_gauge`].
    pub fn pure_gauge_group(
        group: &Arc<MatrixGroup>,
        factors: Vec<(Polynomial, Mat)>,
    ) -> impl Fn(&[TaylorScalar]) -> TaylorMatrix + Send + Sync + 'static {
        let m = group.size();
        move |x| {
            factors.iter().fold(TaylorMatrix::identity(m), |acc, (p, gen)| {
                &acc * &TaylorMatrix::from_matrix(gen).scale(&p.eval(x)).exp().expect("finite exponent")
            })
        }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn eval_taylor(&self, x: &[TaylorScalar]) -> Vec<TaylorMatrix> {
        (self.program)(x)
    }

    pub fn at(&self, x: &[f64]) -> Result<ConnectionValue> {
        check_dim(self.base_dim, x.len())?;
        let xs: Vec<TaylorScalar> = x.iter().map(|&v| TaylorScalar::constant(v)).collect();
        let cols = self.eval_taylor(&xs).iter().map(|c| c.value()).collect();
        ConnectionValue::new(x.to_vec(), AlgebraLinearMap::new(&self.group, cols)?)
    }

    pub fn jet(&self, x: &[f64]) -> Result<ConnectionJet> {
        let n = self.base_dim;
        check_dim(n, x.len())?;
        let cols = self.eval_taylor(&seed_coordinates(x)?);
        check_dim(n, cols.len())?;
        let a = AlgebraLinearMap::new(&self.group, cols.iter().map(|c| c.value()).collect())?;
        let da = (0..n)
            .map(|mu| AlgebraLinearMap::new(&self.group, cols.iter().map(|c| c.partial(mu)).collect()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConnectionJet { x: x.to_vec(), a, da })
    }
}

/// Element of J(CP): `da[μ]` column ν is ∂_μ A_ν. No symmetry is imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionJet {
    pub x: Vec<f64>,
    pub a: AlgebraLinearMap,
    pub da: Vec<AlgebraLinearMap>,
}

impl ConnectionJet {
    pub fn new(x: Vec<f64>, a: AlgebraLinearMap, da: Vec<AlgebraLinearMap>) -> Result<Self> {
        let n = x.len();
        check_dim(n, a.len())?;
        check_dim(n, da.len())?;
        for d in &da {
            check_dim(n, d.len())?;
            same_group(a.group(), d.group())?;
        }
        Ok(Self { x, a, da })
    }

    pub fn value(&self) -> ConnectionValue {
        ConnectionValue { x: self.x.clone(), a: self.a.clone() }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.a.group()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.da
            .iter()
            .zip(&other.da)
            .fold(self.value().distance(&other.value()), |m, (p, q)| m.max(p.distance(q)))
    }
}

// ---------------------------------------------------------------------------
// Connections as jets of P
// ---------------------------------------------------------------------------

/// Representative of `c` in J_pP at p = (x, g), as a jet of a section of E = P.
pub fn lift_connection(c: &ConnectionValue, g: &GroupElement) -> Result<JetOfSection> {
    same_group(c.group(), g.group())?;
    let cols: Vec<Vec<f64>> = c.a.columns().iter().map(|a| flatten(&(-(a * g.matrix())))).collect();
    let m2 = g.matrix().len();
    JetOfSection::new(c.x.clone(), flatten(g.matrix()), Mat::from_fn(m2, c.x.len(), |i, nu| cols[nu][i]))
}

fn read_group(group: &Arc<MatrixGroup>, value: &[f64]) -> Result<GroupElement> {
    group.element(unflatten(value, group.size()))
}

/// Canonical coordinate of the class of a jet of P.
pub fn read_connection(group: &Arc<MatrixGroup>, w: &JetOfSection) -> Result<ConnectionValue> {
    let m = group.size();
    let ginv = read_group(group, &w.value)?.inv()?;
    let cols = (0..w.slope.ncols())
        .map(|nu| -(unflatten(w.slope.column(nu).as_slice(), m) * ginv.matrix()))
        .collect();
    ConnectionValue::new(w.x.clone(), AlgebraLinearMap::new(group, cols)?)
}

/// Semiholonomous 2-jet of P at (x, e) representing `cj`: the 1-jet of the
/// field of horizontal lifts along a section through e with slope −A.
pub fn lift_connection_jet(cj: &ConnectionJet) -> Result<SecondJetOfSection> {
    let group = cj.group();
    let (n, m) = (cj.x.len(), group.size());
    let slope_cols: Vec<Vec<f64>> = cj.a.columns().iter().map(|a| flatten(&(-a))).collect();
    let slope = Mat::from_fn(m * m, n, |i, nu| slope_cols[nu][i]);
    let curl = (0..n)
        .map(|mu| {
            let cols: Vec<Vec<f64>> = (0..n)
                .map(|nu| flatten(&(-&cj.da[mu].columns()[nu] + &cj.a.columns()[nu] * &cj.a.columns()[mu])))
                .collect();
            Mat::from_fn(m * m, n, |i, nu| cols[nu][i])
        })
        .collect();
    let first = JetOfSection::new(cj.x.clone(), flatten(&Mat::identity(m, m)), slope.clone())?;
    SecondJetOfSection::new(first, slope, curl)
}

/// Inverse of [`lift_connection_jet`] at an arbitrary base point (x, g).
pub fn read_connection_jet(group: &Arc<MatrixGroup>, w: &SecondJetOfSection) -> Result<ConnectionJet> {
    let m = group.size();
    let n = w.first.x.len();
    let ginv = read_group(group, &w.first.value)?.inv()?;
    let gi = ginv.matrix();
    let col = |s: &Mat, nu: usize| unflatten(s.column(nu).as_slice(), m);
    let a = read_connection(group, &w.first)?.a;
    let da = (0..n)
        .map(|mu| {
            let dg = col(&w.slope2, mu);
            let cols = (0..n)
                .map(|nu| -(col(&w.curl[mu], nu) * gi) + col(&w.first.slope, nu) * gi * &dg * gi)
                .collect();
            AlgebraLinearMap::new(group, cols)
        })
        .collect::<Result<Vec<_>>>()?;
    ConnectionJet::new(w.first.x.clone(), a, da)
}

// ---------------------------------------------------------------------------
// Actions on CP and J(CP)
// ---------------------------------------------------------------------------

/// Φ_CP: lift to J_pP at p = (x, e), act by Φ_JP, read back.
pub fn act_jg_on_cp(u: &JetGroupoidElement, c: &ConnectionValue) -> Result<ConnectionValue> {
    act_jg_on_cp_via(u, c, &c.group().identity())
}

/// Φ_CP computed through the representative at p = (x, g).
pub fn act_jg_on_cp_via(u: &JetGroupoidElement, c: &ConnectionValue, g: &GroupElement) -> Result<ConnectionValue> {
    let fiber = FiberSpace::left_translation(c.group());
    let w = act_jg_on_je(u, &lift_connection(c, g)?, &fiber)?;
    read_connection(c.group(), &w)
}

/// Φ_J(CP) through the identification J(CP) ≅ J̄²P.
pub fn act_j2g_on_jcp(u: &SecondJetGroupoidElement, cj: &ConnectionJet) -> Result<ConnectionJet> {
    let fiber = FiberSpace::left_translation(cj.group());
    let w = act_j2g_on_j2e(u, &lift_connection_jet(cj)?, &fiber)?;
    read_connection_jet(cj.group(), &w)
}

// ---------------------------------------------------------------------------
// Associated connection, minimal coupling, curvature
// ---------------------------------------------------------------------------

/// Γ^E at e: the jet of ρ_Q along the horizontal lift through (x, e) at fixed q.
pub fn associated_connection(c: &ConnectionValue, e: &AssociatedPoint, fiber: &FiberSpace) -> Result<JetOfSection> {
    let d = base_distance(&c.x, &e.x);
    if d > EPS_BASE {
        return Err(Error::BasePointMismatch(d));
    }
    let slope = fiber.fundamental_map(&c.a, &e.qhat)?;
    JetOfSection::new(e.x.clone(), e.qhat.clone(), slope)
}

/// D at the jet level: u − Γ^E(value of u).
pub fn minimal_coupling_jet(c: &ConnectionValue, u: &JetOfSection, fiber: &FiberSpace) -> Result<VerticalOneForm> {
    difference_first(u, &associated_connection(c, &u.point(), fiber)?)
}

/// Dφ(x) = jφ(x) − Γ^E(φ(x)).
pub fn minimal_coupling(
    a: &ConnectionForm,
    phi: &SmoothMap,
    fiber: &FiberSpace,
    x: &[f64],
) -> Result<VerticalOneForm> {
    same_group(a.group(), fiber.group())?;
    minimal_coupling_jet(&a.at(x)?, &crate::groupoids::jet_of_section(phi, x)?, fiber)
}

/// F at the jet level: alternator of the 2-jet of P representing `cj`, read in 𝔤₀
/// through the canonical representative; F(∂_μ, ∂_ν) = 2·Alt(μ, ν).
pub fn curvature_of_jet(cj: &ConnectionJet) -> Result<CurvatureValue> {
    let group = cj.group();
    let m = group.size();
    let n = cj.x.len();
    let alt = alternator(&lift_connection_jet(cj)?)?;
    let components = (0..n)
        .map(|mu| (0..n).map(|nu| unflatten(alt.coefficients[mu].column(nu).as_slice(), m) * 2.0).collect())
        .collect();
    CurvatureValue::new(cj.x.clone(), group, components)
}

pub fn curvature(a: &ConnectionForm, x: &[f64]) -> Result<CurvatureValue> {
    curvature_of_jet(&a.jet(x)?)
}

/// ∂_μA_ν − ∂_νA_μ + [A_μ, A_ν], the textbook local expression.
pub fn classical_field_strength(cj: &ConnectionJet) -> Result<CurvatureValue> {
    let n = cj.x.len();
    let a = cj.a.columns();
    let components = (0..n)
        .map(|mu| {
            (0..n)
                .map(|nu| {
                    &cj.da[mu].columns()[nu] - &cj.da[nu].columns()[mu] + &a[mu] * &a[nu] - &a[nu] * &a[mu]
                })
                .collect()
        })
        .collect();
    CurvatureValue::new(cj.x.clone(), cj.group(), components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::GroupKind;
    use approx::assert_abs_diff_eq;

    fn u1() -> Arc<MatrixGroup> {
        MatrixGroup::new(GroupKind::U1).unwrap()
    }

    #[test]
    fn alternator_of_upper_block() {
        let first = JetOfSection::new(vec![0.0, 0.0], vec![0.0], Mat::zeros(1, 2)).unwrap();
        let curl = vec![Mat::from_row_slice(1, 2, &[0.0, 1.0]), Mat::zeros(1, 2)];
        let u = SecondJetOfSection::new(first, Mat::zeros(1, 2), curl).unwrap();
        let alt = alternator(&u).unwrap();
        assert_abs_diff_eq!(alt.coefficients[0][(0, 1)], 0.5);
        assert_abs_diff_eq!(alt.coefficients[1][(0, 0)], -0.5);
    }

    #[test]
    fn x_dy_curvature_is_unit() {
        let g = u1();
        let x0 = g.basis()[0].clone();
        let y = x0.clone();
        let a = ConnectionForm::new(&g, 2, move |x| {
            vec![TaylorMatrix::zeros(2, 2), TaylorMatrix::from_matrix(&y).scale(&x[0])]
        });
        let f = curvature(&a, &[0.3, -0.2]).unwrap();
        assert_abs_diff_eq!((f.component(0, 1) + &x0).amax(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_connection_gives_flat_lift() {
        let g = u1();
        let fiber = FiberSpace::linear(&g);
        let c = ConnectionForm::zero(&g, 2).at(&[0.1, 0.2]).unwrap();
        let e = AssociatedPoint::new(vec![0.1, 0.2], vec![1.0, 2.0]);
        let gamma = associated_connection(&c, &e, &fiber).unwrap();
        assert_eq!(gamma.slope.amax(), 0.0);
    }
}
