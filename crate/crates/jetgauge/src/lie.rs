//! Matrix Lie groups: GL(m), SO(m), U(1) as SO(2), SU(2) as a real 4×4 embedding.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::taylor::TaylorMatrix;

pub type Mat = DMatrix<f64>;

/// Default membership tolerance for group elements.
pub const EPS_GROUP: f64 = 1e-10;
/// Smallest admissible |det| for frames and GL elements.
pub const EPS_DET: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GroupKind {
    GL(usize),
    SO(usize),
    U1,
    SU2,
}

impl GroupKind {
    /// Parses the config names `GL`, `SO3`, `U1`, `SU2`; `GL` takes its size from `gl_size`.
    pub fn parse(name: &str, gl_size: usize) -> Result<Self> {
        match name {
            "GL" => Ok(GroupKind::GL(gl_size)),
            "U1" => Ok(GroupKind::U1),
            "SU2" => Ok(GroupKind::SU2),
            s if s.starts_with("SO") => s[2..]
                .parse::<usize>()
                .ok()
                .filter(|&m| m >= 2)
                .map(GroupKind::SO)
                .ok_or_else(|| Error::Config(format!("unknown group `{name}`"))),
            _ => Err(Error::Config(format!("unknown group `{name}`"))),
        }
    }

    pub fn is_abelian(&self) -> bool {
        matches!(self, GroupKind::U1 | GroupKind::SO(2) | GroupKind::GL(1))
    }
}

/// A matrix group together with a basis of its Lie algebra.
pub struct MatrixGroup {
    kind: GroupKind,
    size: usize,
    basis: Vec<Mat>,
    gram_inv: Mat,
    eps: f64,
}

impl fmt::Debug for MatrixGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixGroup({:?})", self.kind)
    }
}

fn unit(m: usize, i: usize, j: usize) -> Mat {
    let mut e = Mat::zeros(m, m);
    e[(i, j)] = 1.0;
    e
}

/// so(3) generators with [e_x, e_y] = e_z.
pub fn so3_generators() -> [Mat; 3] {
    [
        unit(3, 2, 1) - unit(3, 1, 2),
        unit(3, 0, 2) - unit(3, 2, 0),
        unit(3, 1, 0) - unit(3, 0, 1),
    ]
}

/// Real 4×4 image of the complex 2×2 matrix `re + i·im`.
pub fn complex_embed(re: &Mat, im: &Mat) -> Mat {
    let mut out = Mat::zeros(4, 4);
    out.view_mut((0, 0), (2, 2)).copy_from(re);
    out.view_mut((2, 2), (2, 2)).copy_from(re);
    out.view_mut((0, 2), (2, 2)).copy_from(&(-im));
    out.view_mut((2, 0), (2, 2)).copy_from(im);
    out
}

fn su2_generators() -> [Mat; 3] {
    // -i/2 times the Pauli matrices
    let z = Mat::zeros(2, 2);
    let h = 0.5;
    [
        complex_embed(&z, &Mat::from_row_slice(2, 2, &[0.0, -h, -h, 0.0])),
        complex_embed(&Mat::from_row_slice(2, 2, &[0.0, -h, h, 0.0]), &z),
        complex_embed(&z, &Mat::from_row_slice(2, 2, &[-h, 0.0, 0.0, h])),
    ]
}

impl MatrixGroup {
    pub fn new(kind: GroupKind) -> Result<Arc<Self>> {
        let (size, basis) = match kind {
            GroupKind::GL(m) if m >= 1 => {
                (m, (0..m).flat_map(|i| (0..m).map(move |j| unit(m, i, j))).collect::<Vec<_>>())
            }
            GroupKind::SO(3) => (3, so3_generators().to_vec()),
            GroupKind::SO(m) if m >= 2 => (
                m,
                (0..m)
                    .flat_map(|i| (i + 1..m).map(move |j| unit(m, j, i) - unit(m, i, j)))
                    .collect(),
            ),
            GroupKind::U1 => (2, vec![unit(2, 1, 0) - unit(2, 0, 1)]),
            GroupKind::SU2 => (4, su2_generators().to_vec()),
            _ => return Err(Error::Config(format!("unsupported group {kind:?}"))),
        };
        let d = basis.len();
        let gram = Mat::from_fn(d, d, |i, j| basis[i].dot(&basis[j]));
        let gram_inv = gram.try_inverse().ok_or(Error::SingularMatrix(0.0))?;
        Ok(Arc::new(Self { kind, size, basis, gram_inv, eps: EPS_GROUP }))
    }

    pub fn from_name(name: &str, gl_size: usize) -> Result<Arc<Self>> {
        Self::new(GroupKind::parse(name, gl_size)?)
    }

    pub fn kind(&self) -> GroupKind {
        self.kind
    }

    /// Matrix size m.
    pub fn size(&self) -> usize {
        self.size
    }

    /// Dimension of the Lie algebra.
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Mat] {
        &self.basis
    }

    pub fn tolerance(&self) -> f64 {
        self.eps
    }

    /// Coordinates of the orthogonal projection of `x` onto the algebra.
    pub fn coordinates(&self, x: &Mat) -> Vec<f64> {
        let rhs = nalgebra::DVector::from_iterator(self.dim(), self.basis.iter().map(|b| b.dot(x)));
        (&self.gram_inv * rhs).iter().copied().collect()
    }

    pub fn from_coordinates(&self, c: &[f64]) -> Mat {
        self.basis.iter().zip(c).fold(Mat::zeros(self.size, self.size), |acc, (b, &ci)| acc + b * ci)
    }

    /// Distance from `x` to the algebra.
    pub fn algebra_residual(&self, x: &Mat) -> f64 {
        (x - self.from_coordinates(&self.coordinates(x))).amax()
    }

    /// Violation of the defining equations of the group.
    pub fn membership_residual(&self, g: &Mat) -> f64 {
        if g.nrows() != self.size || g.ncols() != self.size {
            return f64::INFINITY;
        }
        let m = self.size;
        let det = g.determinant();
        match self.kind {
            GroupKind::GL(_) => {
                if det.abs() >= EPS_DET {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GroupKind::SO(_) | GroupKind::U1 => {
                let orth = (g.transpose() * g - Mat::identity(m, m)).amax();
                if det > 0.0 {
                    orth
                } else {
                    f64::INFINITY
                }
            }
            GroupKind::SU2 => {
                let orth = (g.transpose() * g - Mat::identity(4, 4)).amax();
                let j = complex_embed(&Mat::zeros(2, 2), &Mat::identity(2, 2));
                let cplx = (g * &j - &j * g).amax();
                let (a, b) = (g.view((0, 0), (2, 2)), g.view((2, 0), (2, 2)));
                // complex determinant of a + i b
                let re = a[(0, 0)] * a[(1, 1)] - b[(0, 0)] * b[(1, 1)] - a[(0, 1)] * a[(1, 0)] + b[(0, 1)] * b[(1, 0)];
                let im = a[(0, 0)] * b[(1, 1)] + b[(0, 0)] * a[(1, 1)] - a[(0, 1)] * b[(1, 0)] - b[(0, 1)] * a[(1, 0)];
                orth.max(cplx).max((re - 1.0).abs()).max(im.abs())
            }
        }
    }

    pub fn identity(self: &Arc<Self>) -> GroupElement {
        GroupElement { group: self.clone(), matrix: Mat::identity(self.size, self.size) }
    }

    pub fn zero_algebra(self: &Arc<Self>) -> AlgebraElement {
        AlgebraElement { group: self.clone(), matrix: Mat::zeros(self.size, self.size) }
    }

    /// Element with the given matrix, checked for membership.
    pub fn element(self: &Arc<Self>, matrix: Mat) -> Result<GroupElement> {
        let r = self.membership_residual(&matrix);
        if r > self.eps {
            return Err(Error::NotInGroup { kind: self.kind, residual: r });
        }
        Ok(GroupElement { group: self.clone(), matrix })
    }

    /// Algebra element with the given matrix, checked against the basis span.
    pub fn algebra(self: &Arc<Self>, matrix: Mat) -> Result<AlgebraElement> {
        if matrix.nrows() != self.size || matrix.ncols() != self.size {
            return Err(Error::DimensionMismatch { expected: self.size, found: matrix.nrows() });
        }
        let r = self.algebra_residual(&matrix);
        if r > 1e-10 * (1.0 + matrix.amax()) {
            return Err(Error::NotInAlgebra(r));
        }
        Ok(AlgebraElement { group: self.clone(), matrix })
    }
}

pub(crate) fn same_group(a: &Arc<MatrixGroup>, b: &Arc<MatrixGroup>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a.kind == b.kind {
        Ok(())
    } else {
        Err(Error::GroupMismatch(a.kind, b.kind))
    }
}

/// Element of a matrix group.
#[derive(Clone)]
pub struct GroupElement {
    group: Arc<MatrixGroup>,
    matrix: Mat,
}

impl fmt::Debug for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElement({:?}, {})", self.group.kind, self.matrix)
    }
}

impl PartialEq for GroupElement {
    fn eq(&self, other: &Self) -> bool {
        self.group.kind == other.group.kind && self.matrix == other.matrix
    }
}

impl GroupElement {
    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn mul(&self, other: &GroupElement) -> Result<GroupElement> {
        same_group(&self.group, &other.group)?;
        Ok(GroupElement { group: self.group.clone(), matrix: &self.matrix * &other.matrix })
    }

    pub fn inv(&self) -> Result<GroupElement> {
        let matrix = match self.group.kind {
            GroupKind::SO(_) | GroupKind::U1 | GroupKind::SU2 => self.matrix.transpose(),
            GroupKind::GL(_) => {
                let det = self.matrix.determinant();
                if det.abs() < EPS_DET {
                    return Err(Error::SingularMatrix(det.abs()));
                }
                self.matrix.clone().try_inverse().ok_or(Error::SingularMatrix(det.abs()))?
            }
        };
        Ok(GroupElement { group: self.group.clone(), matrix })
    }

    /// Ad(g)X = g X g⁻¹.
    pub fn ad(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        same_group(&self.group, &x.group)?;
        let gi = self.inv()?;
        Ok(AlgebraElement { group: self.group.clone(), matrix: &self.matrix * &x.matrix * gi.matrix })
    }

    /// Ad applied column by column.
    pub fn ad_map(&self, xi: &AlgebraLinearMap) -> Result<AlgebraLinearMap> {
        same_group(&self.group, &xi.group)?;
        let gi = self.inv()?;
        Ok(AlgebraLinearMap {
            group: self.group.clone(),
            columns: xi.columns.iter().map(|c| &self.matrix * c * &gi.matrix).collect(),
        })
    }

    pub fn membership_residual(&self) -> f64 {
        self.group.membership_residual(&self.matrix)
    }

    pub fn distance(&self, other: &GroupElement) -> f64 {
        (&self.matrix - &other.matrix).amax()
    }
}

/// Element of the Lie algebra, stored as an m×m matrix.
#[derive(Clone)]
pub struct AlgebraElement {
    group: Arc<MatrixGroup>,
    matrix: Mat,
}

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AlgebraElement({:?}, {})", self.group.kind, self.matrix)
    }
}

impl PartialEq for AlgebraElement {
    fn eq(&self, other: &Self) -> bool {
        self.group.kind == other.group.kind && self.matrix == other.matrix
    }
}

impl AlgebraElement {
    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    pub fn matrix(&self) -> &Mat {
        &self.matrix
    }

    pub fn into_matrix(self) -> Mat {
        self.matrix
    }

    pub fn scale(&self, c: f64) -> AlgebraElement {
        AlgebraElement { group: self.group.clone(), matrix: &self.matrix * c }
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<AlgebraElement> {
        same_group(&self.group, &other.group)?;
        Ok(AlgebraElement { group: self.group.clone(), matrix: &self.matrix + &other.matrix })
    }

    pub fn exp(&self) -> GroupElement {
        GroupElement { group: self.group.clone(), matrix: mat_exp(&self.matrix) }
    }

    pub fn distance(&self, other: &AlgebraElement) -> f64 {
        (&self.matrix - &other.matrix).amax()
    }
}

/// The Lie bracket XY − YX.
pub fn bracket(x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
    same_group(&x.group, &y.group)?;
    Ok(AlgebraElement { group: x.group.clone(), matrix: &x.matrix * &y.matrix - &y.matrix * &x.matrix })
}

pub fn exp(x: &AlgebraElement) -> GroupElement {
    x.exp()
}

/// Matrix exponential by scaling and squaring with a truncated series.
pub fn mat_exp(x: &Mat) -> Mat {
    let m = x.nrows();
    let norm = x.amax() * m as f64;
    let mut s = 0i32;
    while norm * 0.5f64.powi(s) > 0.25 && s < 60 {
        s += 1;
    }
    let y = x * 0.5f64.powi(s);
    let mut term = Mat::identity(m, m);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * &y / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// A linear map Rⁿ → 𝔤₀, stored by its columns.
#[derive(Clone)]
pub struct AlgebraLinearMap {
    group: Arc<MatrixGroup>,
    columns: Vec<Mat>,
}

impl fmt::Debug for AlgebraLinearMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AlgebraLinearMap").field("group", &self.group.kind).field("columns", &self.columns).finish()
    }
}

impl PartialEq for AlgebraLinearMap {
    fn eq(&self, other: &Self) -> bool {
        self.group.kind == other.group.kind && self.columns == other.columns
    }
}

impl AlgebraLinearMap {
    /// Checked constructor: every column must lie in the algebra.
    pub fn new(group: &Arc<MatrixGroup>, columns: Vec<Mat>) -> Result<Self> {
        for c in &columns {
            group.algebra(c.clone())?;
        }
        Ok(Self { group: group.clone(), columns })
    }

    /// Unchecked constructor for columns known to lie in the algebra.
    pub(crate) fn from_columns(group: &Arc<MatrixGroup>, columns: Vec<Mat>) -> Self {
        Self { group: group.clone(), columns }
    }

    pub fn zero(group: &Arc<MatrixGroup>, n: usize) -> Self {
        Self { group: group.clone(), columns: vec![Mat::zeros(group.size(), group.size()); n] }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        &self.group
    }

    /// Number of columns n.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Mat] {
        &self.columns
    }

    pub fn column(&self, i: usize) -> AlgebraElement {
        AlgebraElement { group: self.group.clone(), matrix: self.columns[i].clone() }
    }

    /// ξ(v) = Σ vᵢ ξ(eᵢ).
    pub fn apply(&self, v: &[f64]) -> Mat {
        let m = self.group.size();
        self.columns.iter().zip(v).fold(Mat::zeros(m, m), |acc, (c, &vi)| acc + c * vi)
    }

    /// ξ ∘ a for a real n×n matrix a.
    pub fn compose_right(&self, a: &Mat) -> Self {
        let cols = (0..a.ncols())
            .map(|j| {
                let col: Vec<f64> = a.column(j).iter().copied().collect();
                self.apply(&col)
            })
            .collect();
        Self { group: self.group.clone(), columns: cols }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        same_group(&self.group, &other.group)?;
        crate::error::check_dim(self.len(), other.len())?;
        Ok(Self {
            group: self.group.clone(),
            columns: self.columns.iter().zip(&other.columns).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { group: self.group.clone(), columns: self.columns.iter().map(|a| a * c).collect() }
    }

    /// Largest entry-wise difference.
    pub fn distance(&self, other: &Self) -> f64 {
        self.columns.iter().zip(&other.columns).fold(0.0, |m, (a, b)| m.max((a - b).amax()))
    }

    pub fn amax(&self) -> f64 {
        self.columns.iter().fold(0.0, |m, a| m.max(a.amax()))
    }
}

/// Random algebra element with basis coordinates uniform in `[-scale, scale]`.
pub fn sample_algebra(group: &Arc<MatrixGroup>, rng: &mut impl Rng, scale: f64) -> AlgebraElement {
    let c: Vec<f64> = (0..group.dim()).map(|_| if scale > 0.0 { rng.gen_range(-scale..=scale) } else { 0.0 }).collect();
    AlgebraElement { group: group.clone(), matrix: group.from_coordinates(&c) }
}

pub fn sample_element(group: &Arc<MatrixGroup>, rng: &mut impl Rng, scale: f64) -> GroupElement {
    sample_algebra(group, rng, scale).exp()
}

pub fn sample_algebra_map(group: &Arc<MatrixGroup>, n: usize, rng: &mut impl Rng, scale: f64) -> AlgebraLinearMap {
    AlgebraLinearMap {
        group: group.clone(),
        columns: (0..n).map(|_| sample_algebra(group, rng, scale).matrix).collect(),
    }
}

/// Deterministic random algebra element for `seed`.
pub fn random_algebra(group: &Arc<MatrixGroup>, seed: u64, scale: f64) -> AlgebraElement {
    sample_algebra(group, &mut ChaCha8Rng::seed_from_u64(seed), scale)
}

/// Deterministic random group element `exp(X)` for `seed`.
pub fn random_element(group: &Arc<MatrixGroup>, seed: u64, scale: f64) -> GroupElement {
    sample_element(group, &mut ChaCha8Rng::seed_from_u64(seed), scale)
}

/// exp applied to a Taylor-valued algebra element.
pub fn taylor_exp(x: &TaylorMatrix) -> Result<TaylorMatrix> {
    x.exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rot(a: f64) -> Mat {
        Mat::from_row_slice(2, 2, &[a.cos(), -a.sin(), a.sin(), a.cos()])
    }

    #[test]
    fn rotations_compose() {
        let g = MatrixGroup::new(GroupKind::U1).unwrap();
        let a = g.element(rot(0.3)).unwrap();
        let b = g.element(rot(1.1)).unwrap();
        assert!((a.mul(&b).unwrap().matrix() - rot(1.4)).amax() < 1e-15);
        assert_eq!(a.mul(&g.identity()).unwrap(), a);
        assert!((a.inv().unwrap().mul(&a).unwrap().matrix() - Mat::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn exp_quarter_turn() {
        let g = MatrixGroup::new(GroupKind::U1).unwrap();
        let x = g.algebra(Mat::from_row_slice(2, 2, &[0.0, -FRAC_PI_2, FRAC_PI_2, 0.0])).unwrap();
        assert!((x.exp().matrix() - rot(FRAC_PI_2)).amax() < 1e-14);
        assert_eq!(g.zero_algebra().exp(), g.identity());
    }

    #[test]
    fn so3_structure() {
        let g = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        let [ex, ey, ez] = so3_generators();
        let b = bracket(&g.algebra(ex.clone()).unwrap(), &g.algebra(ey.clone()).unwrap()).unwrap();
        assert_eq!(b.matrix(), &ez);
        // rotation about z by π/2 carries the x generator to the y generator
        let rz = g.algebra(ez * FRAC_PI_2).unwrap().exp();
        let moved = rz.ad(&g.algebra(ex).unwrap()).unwrap();
        assert!((moved.matrix() - ey).amax() < 1e-14);
    }

    #[test]
    fn su2_brackets_close() {
        let g = MatrixGroup::new(GroupKind::SU2).unwrap();
        let b = g.basis();
        let x = bracket(&g.algebra(b[0].clone()).unwrap(), &g.algebra(b[1].clone()).unwrap()).unwrap();
        assert!((x.matrix() - &b[2]).amax() < 1e-15);
        let e = random_element(&g, 3, 1.0);
        assert!(e.membership_residual() < 1e-12);
    }

    #[test]
    fn random_is_deterministic_and_member() {
        for kind in [GroupKind::U1, GroupKind::SO(3), GroupKind::SU2, GroupKind::GL(2)] {
            let g = MatrixGroup::new(kind).unwrap();
            assert_eq!(random_element(&g, 9, 0.7), random_element(&g, 9, 0.7));
            assert_eq!(random_element(&g, 9, 0.0), g.identity());
            assert!(random_algebra(&g, 9, 0.0).matrix().amax() == 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            for _ in 0..1000 {
                assert!(sample_element(&g, &mut rng, 1.0).membership_residual() <= EPS_GROUP);
            }
        }
    }

    #[test]
    fn rejects_non_members() {
        let g = MatrixGroup::new(GroupKind::SO(3)).unwrap();
        assert!(matches!(g.element(Mat::identity(3, 3) * 2.0), Err(Error::NotInGroup { .. })));
        let u = MatrixGroup::new(GroupKind::U1).unwrap();
        assert!(matches!(g.identity().mul(&u.identity()), Err(Error::GroupMismatch(..))));
        let gl = MatrixGroup::new(GroupKind::GL(2)).unwrap();
        let sing = GroupElement { group: gl.clone(), matrix: Mat::zeros(2, 2) };
        assert!(matches!(sing.inv(), Err(Error::SingularMatrix(_))));
    }
}
