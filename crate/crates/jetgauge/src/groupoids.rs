//! The gauge groupoid (P×P)/G₀, bisections, the jet groupoids JG and J̄²G, and
//! their actions on jets of sections of associated bundles.

use std::fmt;
use std::sync::Arc;

use crate::bundles::{base_distance, AssociatedPoint, FiberSpace, PrincipalPoint, EPS_BASE};
use crate::error::{check_dim, Error, Result};
use crate::lie::{same_group, AlgebraLinearMap, GroupElement, Mat, MatrixGroup, EPS_DET};
use crate::taylor::{seed_coordinates, SmoothMap, TaylorMatrix, TaylorScalar};

/// Tolerance for accepting an input as semiholonomous.
pub const EPS_SEMIHOLONOMOUS: f64 = 1e-10;

fn require_composable(a: &[f64], b: &[f64]) -> Result<()> {
    let d = base_distance(a, b);
    if d > EPS_BASE {
        Err(Error::Composability(d))
    } else {
        Ok(())
    }
}

fn invert_frame(a: &Mat) -> Result<Mat> {
    let det = a.determinant();
    if det.abs() < EPS_DET {
        return Err(Error::SingularMatrix(det.abs()));
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix(det.abs()))
}

// ---------------------------------------------------------------------------
// Gauge groupoid
// ---------------------------------------------------------------------------

/// [p₂, p₁] normalized so that p₁ = (x_src, e); `h` is then the group part of p₂.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeGroupoidElement {
    pub x_tgt: Vec<f64>,
    pub h: GroupElement,
    pub x_src: Vec<f64>,
}

impl GaugeGroupoidElement {
    pub fn new(x_tgt: Vec<f64>, h: GroupElement, x_src: Vec<f64>) -> Self {
        Self { x_tgt, h, x_src }
    }

    /// The class [p₂, p₁] of an arbitrary pair.
    pub fn from_pair(p2: &PrincipalPoint, p1: &PrincipalPoint) -> Result<Self> {
        Ok(Self { x_tgt: p2.x.clone(), h: p2.g.mul(&p1.g.inv()?)?, x_src: p1.x.clone() })
    }

    pub fn unit(group: &Arc<MatrixGroup>, x: &[f64]) -> Self {
        Self { x_tgt: x.to_vec(), h: group.identity(), x_src: x.to_vec() }
    }

    /// `self · first`, defined when `first` ends where `self` starts.
    pub fn compose(&self, first: &Self) -> Result<Self> {
        require_composable(&self.x_src, &first.x_tgt)?;
        Ok(Self { x_tgt: self.x_tgt.clone(), h: self.h.mul(&first.h)?, x_src: first.x_src.clone() })
    }

    pub fn invert(&self) -> Result<Self> {
        Ok(Self { x_tgt: self.x_src.clone(), h: self.h.inv()?, x_src: self.x_tgt.clone() })
    }

    /// [p′, p]·p = p′.
    pub fn act_on_p(&self, p: &PrincipalPoint) -> Result<PrincipalPoint> {
        require_composable(&self.x_src, &p.x)?;
        Ok(PrincipalPoint { x: self.x_tgt.clone(), g: self.h.mul(&p.g)? })
    }

    /// [p′, p]·[p, q] = [p′, q].
    pub fn act_on_assoc(&self, e: &AssociatedPoint, fiber: &FiberSpace) -> Result<AssociatedPoint> {
        require_composable(&self.x_src, &e.x)?;
        Ok(AssociatedPoint { x: self.x_tgt.clone(), qhat: fiber.act(&self.h, &e.qhat)? })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x_tgt, &other.x_tgt)
            .max(base_distance(&self.x_src, &other.x_src))
            .max(self.h.distance(&other.h))
    }
}

pub fn compose(g2: &GaugeGroupoidElement, g1: &GaugeGroupoidElement) -> Result<GaugeGroupoidElement> {
    g2.compose(g1)
}

/// Image of [p, g₀] in the isotropy of the gauge groupoid, taken as [p·g₀, p] so
/// that g₀ ↦ embed(p, g₀) is a homomorphism.
pub fn isotropy_embed(p: &PrincipalPoint, g0: &GroupElement) -> Result<GaugeGroupoidElement> {
    let pg = PrincipalPoint { x: p.x.clone(), g: p.g.mul(g0)? };
    GaugeGroupoidElement::from_pair(&pg, p)
}

// ---------------------------------------------------------------------------
// Bisections
// ---------------------------------------------------------------------------

/// Group-valued program x ↦ h(x).
pub type GroupProgram = dyn Fn(&[TaylorScalar]) -> TaylorMatrix + Send + Sync;

/// Bisection x ↦ (ψ(x), h(x), x) of the gauge groupoid.
#[derive(Clone)]
pub struct Bisection {
    psi: SmoothMap,
    group: Arc<MatrixGroup>,
    hmap: Arc<GroupProgram>,
}

impl fmt::Debug for Bisection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bisection({:?}, n = {})", self.group.kind(), self.psi.input_dim())
    }
}

impl Bisection {
    pub fn new(
        psi: SmoothMap,
        group: &Arc<MatrixGroup>,
        hmap: impl Fn(&[TaylorScalar]) -> TaylorMatrix + Send + Sync + 'static,
    ) -> Result<Self> {
        check_dim(psi.input_dim(), psi.output_dim())?;
        Ok(Self { psi, group: group.clone(), hmap: Arc::new(hmap) })
    }

    pub fn identity(group: &Arc<MatrixGroup>, n: usize) -> Self {
        let m = group.size();
        Self { psi: SmoothMap::identity(n), group: group.clone(), hmap: Arc::new(move |_| TaylorMatrix::identity(m)) }
    }

    /// A gauge transformation: ψ = id.
    pub fn strict(
        group: &Arc<MatrixGroup>,
        n: usize,
        hmap: impl Fn(&[TaylorScalar]) -> TaylorMatrix + Send + Sync + 'static,
    ) -> Self {
        Self { psi: SmoothMap::identity(n), group: group.clone(), hmap: Arc::new(hmap) }
    }

    pub fn base_dim(&self) -> usize {
        self.psi.input_dim()
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    pub fn psi(&self) -> &SmoothMap {
        &self.psi
    }

    pub fn eval_group(&self, x: &[TaylorScalar]) -> TaylorMatrix {
        (self.hmap)(x)
    }

    /// Pointwise product (β₂ ⋆ β₁)(x) = β₂(ψ₁(x)) · β₁(x).
    pub fn then(&self, second: &Bisection) -> Result<Bisection> {
        same_group(&self.group, &second.group)?;
        check_dim(self.base_dim(), second.base_dim())?;
        let (p1, h1) = (self.psi.clone(), self.hmap.clone());
        let h2 = second.hmap.clone();
        let psi = second.psi.compose(&self.psi)?;
        Ok(Bisection {
            psi,
            group: self.group.clone(),
            hmap: Arc::new(move |x| {
                let y = p1.eval(x).expect("dimension checked at construction");
                &h2(&y) * &h1(x)
            }),
        })
    }

    /// The groupoid element β(x).
    pub fn at(&self, x: &[f64]) -> Result<GaugeGroupoidElement> {
        let xs: Vec<TaylorScalar> = x.iter().map(|&v| TaylorScalar::constant(v)).collect();
        let y = self.psi.eval_f64(x)?;
        let h = self.group.element(self.eval_group(&xs).value())?;
        Ok(GaugeGroupoidElement { x_tgt: y, h, x_src: x.to_vec() })
    }
}

struct BisectionData {
    y: Vec<f64>,
    h: GroupElement,
    frame: Mat,
    dframe: Vec<Mat>,
    xi: Vec<Mat>,
    dxi: Vec<Vec<Mat>>,
}

fn bisection_data(b: &Bisection, x: &[f64]) -> Result<BisectionData> {
    let n = b.base_dim();
    check_dim(n, x.len())?;
    let seeds = seed_coordinates(x)?;
    let psi = b.psi.eval(&seeds)?;
    let frame = Mat::from_fn(n, n, |i, mu| psi[i].d(mu));
    let det = frame.determinant();
    if det.abs() < EPS_DET {
        return Err(Error::DegenerateBisection(det.abs()));
    }
    let dframe = (0..n).map(|mu| Mat::from_fn(n, n, |i, nu| psi[i].d2(mu, nu))).collect();
    let hm = b.eval_group(&seeds);
    let h = b.group.element(hm.value())?;
    let hinv = h.inv()?;
    let xi: Vec<Mat> = (0..n).map(|mu| hinv.matrix() * hm.partial(mu)).collect();
    let dxi = (0..n)
        .map(|mu| (0..n).map(|nu| hinv.matrix() * hm.second(mu, nu) - &xi[mu] * &xi[nu]).collect())
        .collect();
    Ok(BisectionData { y: psi.iter().map(|s| s.value()).collect(), h, frame, dframe, xi, dxi })
}

/// First jet of β at x.
pub fn jet_of_bisection(b: &Bisection, x: &[f64]) -> Result<JetGroupoidElement> {
    let d = bisection_data(b, x)?;
    Ok(JetGroupoidElement {
        x_src: x.to_vec(),
        x_tgt: d.y,
        h: d.h,
        frame: d.frame,
        xi: AlgebraLinearMap::new(&b.group, d.xi)?,
    })
}

/// Second jet of β at x; holonomous by construction.
pub fn second_jet_of_bisection(b: &Bisection, x: &[f64]) -> Result<SecondJetGroupoidElement> {
    let d = bisection_data(b, x)?;
    let xi = AlgebraLinearMap::new(&b.group, d.xi)?;
    let dxi = d.dxi.into_iter().map(|cols| AlgebraLinearMap::new(&b.group, cols)).collect::<Result<Vec<_>>>()?;
    let first = JetGroupoidElement { x_src: x.to_vec(), x_tgt: d.y, h: d.h, frame: d.frame.clone(), xi: xi.clone() };
    Ok(SecondJetGroupoidElement { first, base_slope: d.frame, group_slope: xi, dframe: d.dframe, dxi })
}

// ---------------------------------------------------------------------------
// Jet groupoid
// ---------------------------------------------------------------------------

/// 1-jet of a bisection at `x_src`: target, group part, frame A = Dψ, and the
/// body-frame group derivative Ξ with Dh·v = h·Ξ(v).
#[derive(Debug, Clone, PartialEq)]
pub struct JetGroupoidElement {
    pub x_src: Vec<f64>,
    pub x_tgt: Vec<f64>,
    pub h: GroupElement,
    pub frame: Mat,
    pub xi: AlgebraLinearMap,
}

impl JetGroupoidElement {
    pub fn new(x_src: Vec<f64>, x_tgt: Vec<f64>, h: GroupElement, frame: Mat, xi: AlgebraLinearMap) -> Result<Self> {
        let n = x_src.len();
        check_dim(n, x_tgt.len())?;
        check_dim(n, frame.nrows())?;
        check_dim(n, frame.ncols())?;
        check_dim(n, xi.len())?;
        same_group(h.group(), xi.group())?;
        let det = frame.determinant();
        if det.abs() < EPS_DET {
            return Err(Error::SingularMatrix(det.abs()));
        }
        Ok(Self { x_src, x_tgt, h, frame, xi })
    }

    pub fn unit(group: &Arc<MatrixGroup>, x: &[f64]) -> Self {
        let n = x.len();
        Self {
            x_src: x.to_vec(),
            x_tgt: x.to_vec(),
            h: group.identity(),
            frame: Mat::identity(n, n),
            xi: AlgebraLinearMap::zero(group, n),
        }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.h.group()
    }

    /// π_fr.
    pub fn frame_projection(&self) -> &Mat {
        &self.frame
    }

    /// π_JG to the gauge groupoid.
    pub fn target_element(&self) -> GaugeGroupoidElement {
        GaugeGroupoidElement { x_tgt: self.x_tgt.clone(), h: self.h.clone(), x_src: self.x_src.clone() }
    }

    /// `self · first`: the jet of the product of the underlying bisections.
    pub fn compose(&self, first: &Self) -> Result<Self> {
        require_composable(&self.x_src, &first.x_tgt)?;
        let h1inv = first.h.inv()?;
        let xi = h1inv.ad_map(&self.xi.compose_right(&first.frame))?.add(&first.xi)?;
        Ok(Self {
            x_src: first.x_src.clone(),
            x_tgt: self.x_tgt.clone(),
            h: self.h.mul(&first.h)?,
            frame: &self.frame * &first.frame,
            xi,
        })
    }

    pub fn invert(&self) -> Result<Self> {
        let ainv = invert_frame(&self.frame)?;
        Ok(Self {
            x_src: self.x_tgt.clone(),
            x_tgt: self.x_src.clone(),
            h: self.h.inv()?,
            frame: ainv.clone(),
            xi: self.h.ad_map(&self.xi.compose_right(&ainv))?.scale(-1.0),
        })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x_src, &other.x_src)
            .max(base_distance(&self.x_tgt, &other.x_tgt))
            .max(self.h.distance(&other.h))
            .max((&self.frame - &other.frame).amax())
            .max(self.xi.distance(&other.xi))
    }
}

/// Holonomy class of a second-order jet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Holonomy {
    General,
    Semiholonomous,
    Holonomous,
}

/// Element of J(JG): a first jet `first` together with the derivative of a
/// JG-valued bisection through it. `base_slope`/`group_slope` are the jet of the
/// projected bisection; the element is semiholonomous when they equal the frame
/// and Ξ of `first`. `dframe[μ]` = ∂_μ A and `dxi[μ]` = ∂_μ Ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondJetGroupoidElement {
    pub first: JetGroupoidElement,
    pub base_slope: Mat,
    pub group_slope: AlgebraLinearMap,
    pub dframe: Vec<Mat>,
    pub dxi: Vec<AlgebraLinearMap>,
}

impl SecondJetGroupoidElement {
    pub fn semiholonomous(first: JetGroupoidElement, dframe: Vec<Mat>, dxi: Vec<AlgebraLinearMap>) -> Result<Self> {
        let (a, xi) = (first.frame.clone(), first.xi.clone());
        Self::new(first, a, xi, dframe, dxi)
    }

    pub fn new(
        first: JetGroupoidElement,
        base_slope: Mat,
        group_slope: AlgebraLinearMap,
        dframe: Vec<Mat>,
        dxi: Vec<AlgebraLinearMap>,
    ) -> Result<Self> {
        let n = first.x_src.len();
        check_dim(n, dframe.len())?;
        check_dim(n, dxi.len())?;
        check_dim(n, group_slope.len())?;
        for (da, dx) in dframe.iter().zip(&dxi) {
            check_dim(n * n, da.len())?;
            check_dim(n, dx.len())?;
            same_group(first.group(), dx.group())?;
        }
        Ok(Self { first, base_slope, group_slope, dframe, dxi })
    }

    pub fn unit(group: &Arc<MatrixGroup>, x: &[f64]) -> Self {
        let n = x.len();
        Self {
            first: JetGroupoidElement::unit(group, x),
            base_slope: Mat::identity(n, n),
            group_slope: AlgebraLinearMap::zero(group, n),
            dframe: vec![Mat::zeros(n, n); n],
            dxi: vec![AlgebraLinearMap::zero(group, n); n],
        }
    }

    pub fn semiholonomy_defect(&self) -> f64 {
        (&self.base_slope - &self.first.frame).amax().max(self.group_slope.distance(&self.first.xi))
    }

    /// Failure of the second-order blocks to come from a genuine bisection:
    /// asymmetry of ∂A, and ∂_μΞ_ν − ∂_νΞ_μ + [Ξ_μ, Ξ_ν].
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.dframe.len();
        let xi = self.first.xi.columns();
        let mut d: f64 = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                for i in 0..n {
                    d = d.max((self.dframe[mu][(i, nu)] - self.dframe[nu][(i, mu)]).abs());
                }
                let curv = &self.dxi[mu].columns()[nu] - &self.dxi[nu].columns()[mu] + &xi[mu] * &xi[nu]
                    - &xi[nu] * &xi[mu];
                d = d.max(curv.amax());
            }
        }
        d
    }

    pub fn holonomy(&self, tol: f64) -> Holonomy {
        if self.semiholonomy_defect() > tol {
            Holonomy::General
        } else if self.symmetry_defect() > tol {
            Holonomy::Semiholonomous
        } else {
            Holonomy::Holonomous
        }
    }
}

// ---------------------------------------------------------------------------
// Jets of sections
// ---------------------------------------------------------------------------

/// 1-jet of a section of E at x: fiber value and slope (k×n).
#[derive(Debug, Clone, PartialEq)]
pub struct JetOfSection {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    pub slope: Mat,
}

impl JetOfSection {
    pub fn new(x: Vec<f64>, value: Vec<f64>, slope: Mat) -> Result<Self> {
        check_dim(value.len(), slope.nrows())?;
        check_dim(x.len(), slope.ncols())?;
        Ok(Self { x, value, slope })
    }

    pub fn point(&self) -> AssociatedPoint {
        AssociatedPoint { x: self.x.clone(), qhat: self.value.clone() }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x)
            .max(base_distance(&self.value, &other.value))
            .max((&self.slope - &other.slope).amax())
    }
}

/// Element of J(JE) over `first`: `slope2` is the derivative of the fiber value,
/// `curl[μ]` = ∂_μ of the slope (k×n).
#[derive(Debug, Clone, PartialEq)]
pub struct SecondJetOfSection {
    pub first: JetOfSection,
    pub slope2: Mat,
    pub curl: Vec<Mat>,
}

impl SecondJetOfSection {
    pub fn new(first: JetOfSection, slope2: Mat, curl: Vec<Mat>) -> Result<Self> {
        let (k, n) = (first.value.len(), first.x.len());
        check_dim(k * n, slope2.len())?;
        check_dim(n, curl.len())?;
        for c in &curl {
            check_dim(k * n, c.len())?;
        }
        Ok(Self { first, slope2, curl })
    }

    pub fn semiholonomy_defect(&self) -> f64 {
        (&self.slope2 - &self.first.slope).amax()
    }

    pub fn symmetry_defect(&self) -> f64 {
        let n = self.curl.len();
        let mut d: f64 = 0.0;
        for mu in 0..n {
            for nu in 0..n {
                d = d.max((self.curl[mu].column(nu) - self.curl[nu].column(mu)).amax());
            }
        }
        d
    }

    pub fn holonomy(&self, tol: f64) -> Holonomy {
        if self.semiholonomy_defect() > tol {
            Holonomy::General
        } else if self.symmetry_defect() > tol {
            Holonomy::Semiholonomous
        } else {
            Holonomy::Holonomous
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.curl
            .iter()
            .zip(&other.curl)
            .fold(self.first.distance(&other.first).max((&self.slope2 - &other.slope2).amax()), |m, (a, b)| {
                m.max((a - b).amax())
            })
    }
}

/// jφ(x).
pub fn jet_of_section(phi: &SmoothMap, x: &[f64]) -> Result<JetOfSection> {
    let j = phi.jet2(x)?;
    JetOfSection::new(x.to_vec(), j.value.iter().copied().collect(), j.first)
}

/// j(jφ)(x); holonomous by construction.
pub fn second_jet_of_section(phi: &SmoothMap, x: &[f64]) -> Result<SecondJetOfSection> {
    let j = phi.jet2(x)?;
    let (k, n) = (phi.output_dim(), x.len());
    let curl = (0..n).map(|mu| Mat::from_fn(k, n, |c, nu| j.second[c][(mu, nu)])).collect();
    let first = JetOfSection::new(x.to_vec(), j.value.iter().copied().collect(), j.first.clone())?;
    SecondJetOfSection::new(first, j.first, curl)
}

// ---------------------------------------------------------------------------
// Induced actions
// ---------------------------------------------------------------------------

/// u_g·u_e = TΦ_E ∘ (u_g, u_e) ∘ A⁻¹, evaluated by differentiating the action
/// program along the curve w ↦ (h·exp(Ξ(A⁻¹w)), q + S A⁻¹ w).
pub fn act_jg_on_je(u_g: &JetGroupoidElement, u_e: &JetOfSection, fiber: &FiberSpace) -> Result<JetOfSection> {
    require_composable(&u_g.x_src, &u_e.x)?;
    same_group(u_g.group(), fiber.group())?;
    let n = u_e.x.len();
    let m = fiber.group().size();
    let ainv = invert_frame(&u_g.frame)?;
    let w = seed_coordinates(&vec![0.0; n])?;
    let xi_y = u_g.xi.compose_right(&ainv);
    let curve = TaylorMatrix::affine(&Mat::zeros(m, m), xi_y.columns(), &w).exp()?;
    let h = &TaylorMatrix::from_matrix(u_g.h.matrix()) * &curve;
    let sy = &u_e.slope * &ainv;
    let q = TaylorMatrix::affine(&Mat::from_column_slice(u_e.value.len(), 1, &u_e.value), &columns_of(&sy), &w);
    let out = fiber.act_taylor(&h, q.entries())?;
    JetOfSection::new(
        u_g.x_tgt.clone(),
        out.iter().map(|s| s.value()).collect(),
        Mat::from_fn(out.len(), n, |i, nu| out[i].d(nu)),
    )
}

fn columns_of(a: &Mat) -> Vec<Mat> {
    (0..a.ncols()).map(|j| Mat::from_column_slice(a.nrows(), 1, a.column(j).as_slice())).collect()
}

/// u′_g·u′_e = TΦ_JE ∘ (u′_g, u′_e) ∘ A⁻¹ for semiholonomous u′_g.
///
/// Both first-order jets are realized as sections over a neighbourhood (variables
/// z) and the JE action is evaluated along them with its own slope variables s;
/// the mixed z–s derivatives give the second-order block.
pub fn act_j2g_on_j2e(
    u_g: &SecondJetGroupoidElement,
    u_e: &SecondJetOfSection,
    fiber: &FiberSpace,
) -> Result<SecondJetOfSection> {
    let defect = u_g.semiholonomy_defect();
    if defect > EPS_SEMIHOLONOMOUS {
        return Err(Error::NotSemiholonomous(defect));
    }
    let g1 = &u_g.first;
    let e1 = &u_e.first;
    require_composable(&g1.x_src, &e1.x)?;
    same_group(g1.group(), fiber.group())?;
    let n = e1.x.len();
    let k = e1.value.len();
    let m = fiber.group().size();
    let vars = seed_coordinates(&vec![0.0; 2 * n])?;
    let (z, s) = vars.split_at(n);

    let frame = TaylorMatrix::affine(&g1.frame, &u_g.dframe, z);
    let s_y = frame.try_inverse(EPS_DET)?.mul_vec(s)?;
    let mut generator = TaylorMatrix::zeros(m, m);
    for nu in 0..n {
        let dirs: Vec<Mat> = u_g.dxi.iter().map(|d| d.columns()[nu].clone()).collect();
        let xi_nu = TaylorMatrix::affine(&g1.xi.columns()[nu], &dirs, z);
        generator = &generator + &xi_nu.scale(&s_y[nu]);
    }
    let h_z = &TaylorMatrix::from_matrix(g1.h.matrix())
        * &TaylorMatrix::affine(&Mat::identity(m, m), u_g.group_slope.columns(), z);
    let h = &h_z * &generator.exp()?;

    let q_z = TaylorMatrix::affine(&Mat::from_column_slice(k, 1, &e1.value), &columns_of(&u_e.slope2), z);
    let slope_z = TaylorMatrix::affine(&e1.slope, &u_e.curl, z);
    let q = &q_z + &TaylorMatrix::from_column(&slope_z.mul_vec(&s_y)?);
    let out = fiber.act_taylor(&h, q.entries())?;

    let binv = invert_frame(&u_g.base_slope)?;
    let dz = Mat::from_fn(k, n, |i, mu| out[i].d(mu));
    let first = JetOfSection::new(
        g1.x_tgt.clone(),
        out.iter().map(|o| o.value()).collect(),
        Mat::from_fn(k, n, |i, nu| out[i].d(n + nu)),
    )?;
    let curl = (0..n)
        .map(|mu_y| {
            Mat::from_fn(k, n, |i, nu| (0..n).map(|mu| out[i].d2(mu, n + nu) * binv[(mu, mu_y)]).sum())
        })
        .collect();
    SecondJetOfSection::new(first, dz * binv, curl)
}

/// The section y ↦ Φ_E(β, φ)(ψ⁻¹(y)) as a 2-jet at ψ(x), computed by plain
/// composition of jets. Reference path for the characterizing identities.
pub fn transformed_section_jet(
    b: &Bisection,
    phi: &SmoothMap,
    fiber: &FiberSpace,
    x: &[f64],
) -> Result<SecondJetOfSection> {
    let n = b.base_dim();
    let seeds = seed_coordinates(x)?;
    let h = b.eval_group(&seeds);
    let f = fiber.act_taylor(&h, &phi.eval(&seeds)?)?;
    let fj = crate::taylor::Jet2::from_outputs(x, &f);
    let psi_inv = b.psi.jet2(x)?.invert()?;
    let j = crate::taylor::compose_jet2(&fj, &psi_inv)?;
    let k = fiber.dim();
    let y: Vec<f64> = psi_inv.point.iter().copied().collect();
    let curl = (0..n).map(|mu| Mat::from_fn(k, n, |c, nu| j.second[c][(mu, nu)])).collect();
    let first = JetOfSection::new(y, j.value.iter().copied().collect(), j.first.clone())?;
    SecondJetOfSection::new(first, j.first, curl)
}
