//! Principal bundle U×G₀ in one chart, associated bundles, and fundamental vector fields.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::lie::{
    sample_algebra, sample_element, same_group, AlgebraElement, AlgebraLinearMap, GroupElement, Mat,
    MatrixGroup,
};
use crate::taylor::{seed_coordinates, TaylorMatrix, TaylorScalar};

/// Tolerance used when comparing base points and fiber values.
pub const EPS_BASE: f64 = 1e-12;

pub(crate) fn base_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Row-major flattening of an m×m matrix to fiber coordinates.
pub fn flatten(m: &Mat) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn unflatten(v: &[f64], m: usize) -> Mat {
    Mat::from_row_slice(m, m, v)
}

/// Box-shaped coordinate domain in Rⁿ.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseChart {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BaseChart {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("chart bounds must satisfy lower < upper".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The cube [-r, r]ⁿ.
    pub fn cube(n: usize, r: f64) -> Result<Self> {
        Self::new(vec![-r; n], vec![r; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| rng.gen_range(*l..=*u)).collect()
    }
}

/// Point (x, g) of P = U×G₀.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPoint {
    pub x: Vec<f64>,
    pub g: GroupElement,
}

impl PrincipalPoint {
    pub fn new(x: Vec<f64>, g: GroupElement) -> Self {
        Self { x, g }
    }
}

/// Canonical representative [(x, e), qhat] of a point of P ×_{G₀} Q.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedPoint {
    pub x: Vec<f64>,
    pub qhat: Vec<f64>,
}

impl AssociatedPoint {
    pub fn new(x: Vec<f64>, qhat: Vec<f64>) -> Self {
        Self { x, qhat }
    }
}

/// Which G₀-manifold the fiber is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FiberKind {
    /// Defining representation on Rᵐ.
    Linear,
    /// Adjoint representation on 𝔤₀, in ambient m×m coordinates.
    Adjoint,
    /// G₀ acting on itself by conjugation, ambient coordinates.
    Conjugation,
    /// G₀ acting on itself by left multiplication; this fiber makes E = P.
    LeftTranslation,
    /// User-supplied action on a chart Rᵏ.
    Callback,
}

/// Action program act(h, q) over Taylor arithmetic.
pub type ActionProgram = dyn Fn(&TaylorMatrix, &[TaylorScalar]) -> Result<Vec<TaylorScalar>> + Send + Sync;

/// A manifold Q with a left G₀-action, in coordinates Rᵏ.
#[derive(Clone)]
pub struct FiberSpace {
    kind: FiberKind,
    group: Arc<MatrixGroup>,
    dim: usize,
    action: Arc<ActionProgram>,
}

impl fmt::Debug for FiberSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiberSpace({:?}, {:?}, dim {})", self.kind, self.group.kind(), self.dim)
    }
}

fn square(q: &[TaylorScalar], m: usize) -> Result<TaylorMatrix> {
    TaylorMatrix::from_entries(m, m, q.to_vec())
}

impl FiberSpace {
    pub fn linear(group: &Arc<MatrixGroup>) -> Self {
        Self {
            kind: FiberKind::Linear,
            group: group.clone(),
            dim: group.size(),
            action: Arc::new(|h, q| h.mul_vec(q)),
        }
    }

    pub fn adjoint(group: &Arc<MatrixGroup>) -> Self {
        let m = group.size();
        Self {
            kind: FiberKind::Adjoint,
            group: group.clone(),
            dim: m * m,
            action: Arc::new(move |h, q| {
                let x = square(q, m)?;
                Ok((&(h * &x) * &h.try_inverse(0.0)?).into_entries())
            }),
        }
    }

    pub fn conjugation(group: &Arc<MatrixGroup>) -> Self {
        Self { kind: FiberKind::Conjugation, ..Self::adjoint(group) }
    }

    pub fn left_translation(group: &Arc<MatrixGroup>) -> Self {
        let m = group.size();
        Self {
            kind: FiberKind::LeftTranslation,
            group: group.clone(),
            dim: m * m,
            action: Arc::new(move |h, q| Ok((h * &square(q, m)?).into_entries())),
        }
    }

    pub fn callback(
        group: &Arc<MatrixGroup>,
        dim: usize,
        action: impl Fn(&TaylorMatrix, &[TaylorScalar]) -> Result<Vec<TaylorScalar>> + Send + Sync + 'static,
    ) -> Self {
        Self { kind: FiberKind::Callback, group: group.clone(), dim, action: Arc::new(action) }
    }

    /// A nonlinear action on Rᵐ: the defining representation conjugated by the
    /// polynomial diffeomorphism q ↦ (q₀ + q₁², q₁ + q₂², …, q_{m-1}).
    pub fn twisted_linear(group: &Arc<MatrixGroup>) -> Self {
        let m = group.size();
        Self::callback(group, m, move |h, q| {
            let mut r: Vec<TaylorScalar> = (0..m)
                .map(|i| if i + 1 < m { q[i] + q[i + 1] * q[i + 1] } else { q[i] })
                .collect();
            r = h.mul_vec(&r)?;
            let mut out = vec![TaylorScalar::constant(0.0); m];
            for i in (0..m).rev() {
                out[i] = if i + 1 < m { r[i] - out[i + 1] * out[i + 1] } else { r[i] };
            }
            Ok(out)
        })
    }

    /// Fiber from its config name: `linear`, `adjoint`, `conjugation`, `callback` or `principal`.
    pub fn from_name(name: &str, group: &Arc<MatrixGroup>) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear(group)),
            "adjoint" => Ok(Self::adjoint(group)),
            "conjugation" => Ok(Self::conjugation(group)),
            "callback" => Ok(Self::twisted_linear(group)),
            "principal" => Ok(Self::left_translation(group)),
            _ => Err(Error::Config(format!("unknown fiber `{name}`"))),
        }
    }

    pub fn kind(&self) -> FiberKind {
        self.kind
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    /// Dimension k of the fiber chart.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn act_taylor(&self, h: &TaylorMatrix, q: &[TaylorScalar]) -> Result<Vec<TaylorScalar>> {
        check_dim(self.group.size(), h.nrows())?;
        check_dim(self.dim, q.len())?;
        let out = (self.action)(h, q)?;
        check_dim(self.dim, out.len())?;
        Ok(out)
    }

    pub fn act_matrix(&self, h: &Mat, q: &[f64]) -> Result<Vec<f64>> {
        let qs: Vec<TaylorScalar> = q.iter().map(|&v| TaylorScalar::constant(v)).collect();
        Ok(self.act_taylor(&TaylorMatrix::from_matrix(h), &qs)?.iter().map(|s| s.value()).collect())
    }

    pub fn act(&self, h: &GroupElement, q: &[f64]) -> Result<Vec<f64>> {
        same_group(&self.group, h.group())?;
        self.act_matrix(h.matrix(), q)
    }

    /// T_q L_h applied to the columns of `slope` (k×n).
    pub fn push_slope(&self, h: &Mat, q: &[f64], slope: &Mat) -> Result<Mat> {
        check_dim(self.dim, slope.nrows())?;
        let n = slope.ncols();
        let t = seed_coordinates(&vec![0.0; n])?;
        let qs: Vec<TaylorScalar> = (0..self.dim)
            .map(|i| (0..n).fold(TaylorScalar::constant(q[i]), |acc, j| acc + t[j] * slope[(i, j)]))
            .collect();
        let out = self.act_taylor(&TaylorMatrix::from_matrix(h), &qs)?;
        Ok(Mat::from_fn(self.dim, n, |i, j| out[i].d(j)))
    }

    /// T_q L_h v.
    pub fn push_tangent(&self, h: &Mat, q: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let col = Mat::from_column_slice(v.len(), 1, v);
        Ok(self.push_slope(h, q, &col)?.column(0).iter().copied().collect())
    }

    /// (ξ)_Q(q) columnwise: column j is d/dt act(exp(−t ξ(e_j)), q) at t = 0.
    pub fn fundamental_map(&self, xi: &AlgebraLinearMap, q: &[f64]) -> Result<Mat> {
        same_group(&self.group, xi.group())?;
        let n = xi.len();
        let m = self.group.size();
        let t = seed_coordinates(&vec![0.0; n])?;
        let dirs: Vec<Mat> = xi.columns().iter().map(|c| -c).collect();
        let h = TaylorMatrix::affine(&Mat::zeros(m, m), &dirs, &t).exp()?;
        let qs: Vec<TaylorScalar> = q.iter().map(|&v| TaylorScalar::constant(v)).collect();
        let out = self.act_taylor(&h, &qs)?;
        Ok(Mat::from_fn(self.dim, n, |i, j| out[i].d(j)))
    }

    /// (X)_Q(q) = d/dt act(exp(−tX), q) at t = 0.
    pub fn fundamental(&self, x: &AlgebraElement, q: &[f64]) -> Result<Vec<f64>> {
        let xi = AlgebraLinearMap::from_columns(&self.group, vec![x.matrix().clone()]);
        Ok(self.fundamental_map(&xi, q)?.column(0).iter().copied().collect())
    }

    /// A random point of the fiber near the identity or origin.
    pub fn random_point(&self, rng: &mut impl Rng) -> Vec<f64> {
        match self.kind {
            FiberKind::Linear | FiberKind::Callback => (0..self.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
            FiberKind::Adjoint => flatten(sample_algebra(&self.group, rng, 1.0).matrix()),
            FiberKind::Conjugation | FiberKind::LeftTranslation => {
                flatten(sample_element(&self.group, rng, 1.0).matrix())
            }
        }
    }

    /// A random tangent vector to the fiber at `q`.
    pub fn random_tangent(&self, q: &[f64], rng: &mut impl Rng) -> Vec<f64> {
        match self.kind {
            FiberKind::Linear | FiberKind::Callback => (0..self.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect(),
            FiberKind::Adjoint => flatten(sample_algebra(&self.group, rng, 1.0).matrix()),
            FiberKind::Conjugation | FiberKind::LeftTranslation => {
                let g = unflatten(q, self.group.size());
                flatten(&(g * sample_algebra(&self.group, rng, 1.0).matrix()))
            }
        }
    }

    /// A random k×n matrix of tangent vectors at `q`.
    pub fn random_slope(&self, q: &[f64], n: usize, rng: &mut impl Rng) -> Mat {
        let cols: Vec<Vec<f64>> = (0..n).map(|_| self.random_tangent(q, rng)).collect();
        Mat::from_fn(self.dim, n, |i, j| cols[j][i])
    }
}

/// ρ_Q: [(x, g), q] ↦ [(x, e), g·q].
pub fn rho_q(p: &PrincipalPoint, q: &[f64], fiber: &FiberSpace) -> Result<AssociatedPoint> {
    Ok(AssociatedPoint { x: p.x.clone(), qhat: fiber.act(&p.g, q)? })
}

/// (x, g)·g₀ = (x, g g₀).
pub fn right_action_p(p: &PrincipalPoint, g0: &GroupElement) -> Result<PrincipalPoint> {
    Ok(PrincipalPoint { x: p.x.clone(), g: p.g.mul(g0)? })
}

/// The unique g with p·g = p′.
pub fn delta_p(p: &PrincipalPoint, p2: &PrincipalPoint) -> Result<GroupElement> {
    let d = base_distance(&p.x, &p2.x);
    if d > EPS_BASE {
        return Err(Error::FiberMismatch(d));
    }
    p.g.inv()?.mul(&p2.g)
}

/// Vertical tangent vector of P (body-frame coordinate) or of E (fiber-chart vector).
#[derive(Debug, Clone, PartialEq)]
pub enum VerticalVector {
    Principal { at: PrincipalPoint, coordinate: AlgebraElement },
    Associated { at: AssociatedPoint, tangent: Vec<f64> },
}

impl VerticalVector {
    /// Ambient matrix g·X of a principal vertical vector.
    pub fn ambient(&self) -> Option<Mat> {
        match self {
            VerticalVector::Principal { at, coordinate } => Some(at.g.matrix() * coordinate.matrix()),
            VerticalVector::Associated { .. } => None,
        }
    }
}

/// (X₀)_P(p): the body-frame coordinate is X₀ itself.
pub fn fundamental_vf_p(x0: &AlgebraElement, p: &PrincipalPoint) -> Result<VerticalVector> {
    same_group(x0.group(), p.g.group())?;
    Ok(VerticalVector::Principal { at: p.clone(), coordinate: x0.clone() })
}

/// Inverse of [`VerticalVector::ambient`]: reads the body-frame coordinate g⁻¹v.
pub fn vertical_from_ambient(p: &PrincipalPoint, v: &Mat) -> Result<VerticalVector> {
    let x = p.g.inv()?.matrix() * v;
    Ok(VerticalVector::Principal { at: p.clone(), coordinate: p.g.group().algebra(x)? })
}

/// (X₀)_Q(q) = d/dt exp(−tX₀)·q at t = 0.
pub fn fundamental_vf_q(x0: &AlgebraElement, q: &[f64], fiber: &FiberSpace) -> Result<Vec<f64>> {
    fiber.fundamental(x0, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{so3_generators, GroupKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn rho_q_rotates() {
        let g = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        let rz = g.algebra(so3_generators()[2].clone() * FRAC_PI_2).unwrap().exp();
        let p = PrincipalPoint::new(vec![0.1], rz);
        let e = rho_q(&p, &[1.0, 0.0, 0.0], &FiberSpace::linear(&g)).unwrap();
        assert!(base_distance(&e.qhat, &[0.0, 1.0, 0.0]) < 1e-15);
        let p0 = PrincipalPoint::new(vec![0.1], g.identity());
        assert_eq!(rho_q(&p0, &[1.0, 2.0, 3.0], &FiberSpace::linear(&g)).unwrap().qhat, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn delta_in_u1() {
        let g = MatrixGroup::new(GroupKind::U1).unwrap();
        let j = g.basis()[0].clone();
        let a = g.algebra(&j * 0.4).unwrap().exp();
        let b = g.algebra(&j * 1.3).unwrap().exp();
        let d = delta_p(&PrincipalPoint::new(vec![0.0], a.clone()), &PrincipalPoint::new(vec![0.0], b)).unwrap();
        assert!(d.distance(&g.algebra(&j * 0.9).unwrap().exp()) < 1e-14);
        let e = delta_p(&PrincipalPoint::new(vec![0.0], a.clone()), &PrincipalPoint::new(vec![0.0], a.clone()));
        assert!(e.unwrap().distance(&g.identity()) < 1e-14);
        let far = delta_p(&PrincipalPoint::new(vec![0.0], a.clone()), &PrincipalPoint::new(vec![1.0], a));
        assert!(matches!(far, Err(Error::FiberMismatch(_))));
    }

    #[test]
    fn fundamental_field_linear() {
        let g = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        let ez = g.algebra(so3_generators()[2].clone()).unwrap();
        let v = fundamental_vf_q(&ez, &[1.0, 0.0, 0.0], &FiberSpace::linear(&g)).unwrap();
        assert!(base_distance(&v, &[0.0, -1.0, 0.0]) < 1e-15);
        let zero = fundamental_vf_q(&g.zero_algebra(), &[1.0, 0.0, 0.0], &FiberSpace::linear(&g)).unwrap();
        assert!(zero.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn fiber_actions_are_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for kind in [GroupKind::U1, GroupKind::SO(3), GroupKind::SU2] {
            let g = MatrixGroup::new(kind).unwrap();
            for fiber in [
                FiberSpace::linear(&g),
                FiberSpace::adjoint(&g),
                FiberSpace::conjugation(&g),
                FiberSpace::left_translation(&g),
                FiberSpace::twisted_linear(&g),
            ] {
                for _ in 0..20 {
                    let q = fiber.random_point(&mut rng);
                    let a = sample_element(&g, &mut rng, 1.0);
                    let b = sample_element(&g, &mut rng, 1.0);
                    let lhs = fiber.act(&a.mul(&b).unwrap(), &q).unwrap();
                    let rhs = fiber.act(&a, &fiber.act(&b, &q).unwrap()).unwrap();
                    assert!(base_distance(&lhs, &rhs) < 1e-10, "{fiber:?}");
                    assert!(base_distance(&fiber.act(&g.identity(), &q).unwrap(), &q) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn vertical_round_trip() {
        let g = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = PrincipalPoint::new(vec![0.0, 0.2], sample_element(&g, &mut rng, 1.0));
        let x = sample_algebra(&g, &mut rng, 1.0);
        let v = fundamental_vf_p(&x, &p).unwrap();
        let back = vertical_from_ambient(&p, &v.ambient().unwrap()).unwrap();
        match back {
            VerticalVector::Principal { coordinate, .. } => assert!(coordinate.distance(&x) < 1e-14),
            _ => unreachable!(),
        }
    }
}
