//! First-order jet prolongation: the jet group G₀⁽¹⁾, the prolonged bundle
//! P⁽¹⁾ = Fr(M) ×_M JP with its right G₀⁽¹⁾-action, the associated fiber actions
//! and quotient maps, and the identification of JG with the gauge groupoid of P⁽¹⁾.
//!
//! A jet u_p ∈ J_pP at p = (x, g) is stored by its body slope U: u_p(v) = (v, g·U(v)).

use std::sync::Arc;

use crate::bundles::{base_distance, AssociatedPoint, FiberSpace, EPS_BASE};
use crate::connections::{ConnectionValue, VerticalOneForm};
use crate::error::{check_dim, Error, Result};
use crate::groupoids::{JetGroupoidElement, JetOfSection};
use crate::lie::{same_group, AlgebraLinearMap, GroupElement, Mat, MatrixGroup, EPS_DET};

fn invert(a: &Mat) -> Result<Mat> {
    let det = a.determinant().abs();
    if det < EPS_DET {
        return Err(Error::SingularMatrix(det));
    }
    a.clone().try_inverse().ok_or(Error::SingularMatrix(det))
}

fn col(v: &[f64]) -> Mat {
    Mat::from_column_slice(v.len(), 1, v)
}

// ---------------------------------------------------------------------------
// Jet group
// ---------------------------------------------------------------------------

/// (a₀, g₀; ξ₀) ∈ (GL(n) × G₀) ⋉ L(Rⁿ, 𝔤₀).
#[derive(Debug, Clone, PartialEq)]
pub struct JetGroupElement {
    pub frame: Mat,
    pub g: GroupElement,
    pub xi: AlgebraLinearMap,
}

impl JetGroupElement {
    pub fn new(frame: Mat, g: GroupElement, xi: AlgebraLinearMap) -> Result<Self> {
        let n = frame.nrows();
        check_dim(n, frame.ncols())?;
        check_dim(n, xi.len())?;
        same_group(g.group(), xi.group())?;
        invert(&frame)?;
        Ok(Self { frame, g, xi })
    }

    pub fn identity(group: &Arc<MatrixGroup>, n: usize) -> Self {
        Self { frame: Mat::identity(n, n), g: group.identity(), xi: AlgebraLinearMap::zero(group, n) }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.g.group()
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    /// (a₁, g₁; ξ₁)(a₂, g₂; ξ₂) = (a₁a₂, g₁g₂; ξ₁ + Ad(g₁)∘ξ₂∘a₁⁻¹).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        same_group(self.group(), other.group())?;
        check_dim(self.dim(), other.dim())?;
        let a1inv = invert(&self.frame)?;
        Ok(Self {
            frame: &self.frame * &other.frame,
            g: self.g.mul(&other.g)?,
            xi: self.xi.add(&self.g.ad_map(&other.xi.compose_right(&a1inv))?)?,
        })
    }

    /// (a⁻¹, g⁻¹; −Ad(g)⁻¹∘ξ∘a).
    pub fn inv(&self) -> Result<Self> {
        let ginv = self.g.inv()?;
        Ok(Self {
            frame: invert(&self.frame)?,
            g: ginv.clone(),
            xi: ginv.ad_map(&self.xi.compose_right(&self.frame))?.scale(-1.0),
        })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        (&self.frame - &other.frame).amax().max(self.g.distance(&other.g)).max(self.xi.distance(&other.xi))
    }

    /// Action on Rⁿ × TQ: (v, v_q) ↦ (a·v, T L_g v_q − (ξ(a·v))_Q(g·q)).
    pub fn act_tangent(&self, fiber: &FiberSpace, t: &FrameTangent) -> Result<FrameTangent> {
        let av: Vec<f64> = (&self.frame * col(&t.v)).iter().copied().collect();
        let q2 = fiber.act(&self.g, &t.q)?;
        let pushed = fiber.push_tangent(self.g.matrix(), &t.q, &t.vq)?;
        let correction = fiber.fundamental_map(&self.xi, &q2)? * col(&av);
        Ok(FrameTangent { v: av, q: q2, vq: pushed.iter().zip(correction.iter()).map(|(p, c)| p - c).collect() })
    }

    /// Action on L(Rⁿ, TQ): u_q ↦ T L_g ∘ u_q ∘ a⁻¹ − (ξ)_Q(g·q).
    pub fn act_jet(&self, fiber: &FiberSpace, u: &FiberJet) -> Result<FiberJet> {
        let lin = self.act_linearized(fiber, u)?;
        let correction = fiber.fundamental_map(&self.xi, &lin.q)?;
        Ok(FiberJet { q: lin.q, slope: lin.slope - correction })
    }

    /// Action on the linearized fiber: u ↦ T L_g ∘ u ∘ a⁻¹.
    pub fn act_linearized(&self, fiber: &FiberSpace, u: &FiberJet) -> Result<FiberJet> {
        check_dim(self.dim(), u.slope.ncols())?;
        let ainv = invert(&self.frame)?;
        Ok(FiberJet { q: fiber.act(&self.g, &u.q)?, slope: fiber.push_slope(self.g.matrix(), &u.q, &u.slope)? * ainv })
    }

    /// Action on L(Rⁿ, 𝔤₀): A₀ ↦ Ad(g)∘A₀∘a⁻¹ + ξ.
    pub fn act_cp(&self, a0: &AlgebraLinearMap) -> Result<AlgebraLinearMap> {
        check_dim(self.dim(), a0.len())?;
        let ainv = invert(&self.frame)?;
        self.g.ad_map(&a0.compose_right(&ainv))?.add(&self.xi)
    }
}

/// Element of Rⁿ × TQ: a frame vector and a tangent vector `vq` at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTangent {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub vq: Vec<f64>,
}

impl FrameTangent {
    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.v, &other.v).max(base_distance(&self.q, &other.q)).max(base_distance(&self.vq, &other.vq))
    }
}

/// Element of L(Rⁿ, T_qQ), used both for the jet and for the linearized fiber.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberJet {
    pub q: Vec<f64>,
    pub slope: Mat,
}

impl FiberJet {
    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.q, &other.q).max((&self.slope - &other.slope).amax())
    }
}

// ---------------------------------------------------------------------------
// Prolonged bundle
// ---------------------------------------------------------------------------

/// (a_x, u_p) ∈ P⁽¹⁾ with p = (x, g) and u_p given by its body slope.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongedPoint {
    pub x: Vec<f64>,
    pub frame: Mat,
    pub g: GroupElement,
    pub body_slope: AlgebraLinearMap,
}

impl ProlongedPoint {
    pub fn new(x: Vec<f64>, frame: Mat, g: GroupElement, body_slope: AlgebraLinearMap) -> Result<Self> {
        let n = x.len();
        check_dim(n, frame.nrows())?;
        check_dim(n, frame.ncols())?;
        check_dim(n, body_slope.len())?;
        same_group(g.group(), body_slope.group())?;
        invert(&frame)?;
        Ok(Self { x, frame, g, body_slope })
    }

    /// (I, (x, e), 0).
    pub fn standard(group: &Arc<MatrixGroup>, x: &[f64]) -> Self {
        let n = x.len();
        Self {
            x: x.to_vec(),
            frame: Mat::identity(n, n),
            g: group.identity(),
            body_slope: AlgebraLinearMap::zero(group, n),
        }
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.g.group()
    }

    /// (a_x, u_p)·(a₀, g₀; ξ₀) = (a_x a₀, R_{g₀}∘(u_p + (ξ₀∘a_x⁻¹)_P(p))).
    pub fn right_action(&self, u: &JetGroupElement) -> Result<Self> {
        same_group(self.group(), u.group())?;
        check_dim(self.x.len(), u.dim())?;
        let ainv = invert(&self.frame)?;
        let g0inv = u.g.inv()?;
        let body = g0inv.ad_map(&self.body_slope.add(&u.xi.compose_right(&ainv))?)?;
        Ok(Self { x: self.x.clone(), frame: &self.frame * &u.frame, g: self.g.mul(&u.g)?, body_slope: body })
    }

    /// The unique u with self·u = (I, (x, e), 0): u = (a⁻¹, g⁻¹; −U∘a).
    pub fn normalizer(&self) -> Result<JetGroupElement> {
        Ok(JetGroupElement {
            frame: invert(&self.frame)?,
            g: self.g.inv()?,
            xi: self.body_slope.compose_right(&self.frame).scale(-1.0),
        })
    }

    /// The unique u with standard·u = self.
    pub fn from_standard(&self) -> Result<JetGroupElement> {
        Ok(JetGroupElement {
            frame: self.frame.clone(),
            g: self.g.clone(),
            xi: self.g.ad_map(&self.body_slope)?,
        })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.x, &other.x)
            .max((&self.frame - &other.frame).amax())
            .max(self.g.distance(&other.g))
            .max(self.body_slope.distance(&other.body_slope))
    }
}

pub fn right_action_p1(pp: &ProlongedPoint, u: &JetGroupElement) -> Result<ProlongedPoint> {
    pp.right_action(u)
}

// ---------------------------------------------------------------------------
// Quotient maps P⁽¹⁾ ×_{G₀⁽¹⁾} F → concrete bundles
// ---------------------------------------------------------------------------

/// A tangent vector of E at `point`, split into base and fiber parts.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentOfE {
    pub point: AssociatedPoint,
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl TangentOfE {
    pub fn distance(&self, other: &Self) -> f64 {
        base_distance(&self.point.x, &other.point.x)
            .max(base_distance(&self.point.qhat, &other.point.qhat))
            .max(base_distance(&self.base, &other.base))
            .max(base_distance(&self.fiber, &other.fiber))
    }
}

/// ((a_x, u_p), (v, v_q)) ↦ Tρ_Q(u_p(a_x v), v_q).
pub fn iso_tangent(pp: &ProlongedPoint, t: &FrameTangent, fiber: &FiberSpace) -> Result<TangentOfE> {
    let av: Vec<f64> = (&pp.frame * col(&t.v)).iter().copied().collect();
    let vertical = fiber.fundamental_map(&pp.body_slope, &t.q)? * col(&av);
    let inner: Vec<f64> = t.vq.iter().zip(vertical.iter()).map(|(a, b)| a - b).collect();
    Ok(TangentOfE {
        point: AssociatedPoint::new(pp.x.clone(), fiber.act(&pp.g, &t.q)?),
        base: av,
        fiber: fiber.push_tangent(pp.g.matrix(), &t.q, &inner)?,
    })
}

/// ((a_x, u_p), u_q) ↦ Tρ_Q ∘ (u_p, u_q ∘ a_x⁻¹).
pub fn iso_jet(pp: &ProlongedPoint, u: &FiberJet, fiber: &FiberSpace) -> Result<JetOfSection> {
    let ainv = invert(&pp.frame)?;
    let inner = &u.slope * ainv - fiber.fundamental_map(&pp.body_slope, &u.q)?;
    JetOfSection::new(pp.x.clone(), fiber.act(&pp.g, &u.q)?, fiber.push_slope(pp.g.matrix(), &u.q, &inner)?)
}

/// ((a_x, u_p), u) ↦ T L_g ∘ u ∘ a_x⁻¹ at [p, q].
pub fn iso_linjet(pp: &ProlongedPoint, u: &FiberJet, fiber: &FiberSpace) -> Result<VerticalOneForm> {
    let ainv = invert(&pp.frame)?;
    Ok(VerticalOneForm {
        x: pp.x.clone(),
        point: fiber.act(&pp.g, &u.q)?,
        coefficients: fiber.push_slope(pp.g.matrix(), &u.q, &u.slope)? * ainv,
    })
}

/// ((a_x, u_p), A₀) ↦ [u_p + (A₀∘a_x⁻¹)_P(p)] in canonical CP coordinates.
pub fn iso_cp(pp: &ProlongedPoint, a0: &AlgebraLinearMap) -> Result<ConnectionValue> {
    let ainv = invert(&pp.frame)?;
    let body = pp.body_slope.add(&a0.compose_right(&ainv))?;
    ConnectionValue::new(pp.x.clone(), pp.g.ad_map(&body)?.scale(-1.0))
}

/// A preimage of a jet of E under [`iso_jet`].
pub fn iso_jet_preimage(u: &JetOfSection, group: &Arc<MatrixGroup>) -> (ProlongedPoint, FiberJet) {
    (ProlongedPoint::standard(group, &u.x), FiberJet { q: u.value.clone(), slope: u.slope.clone() })
}

/// A preimage of a CP value under [`iso_cp`].
pub fn iso_cp_preimage(c: &ConnectionValue) -> (ProlongedPoint, AlgebraLinearMap) {
    (ProlongedPoint::standard(c.group(), &c.x), c.a.scale(-1.0))
}

// ---------------------------------------------------------------------------
// JG ≅ gauge groupoid of P⁽¹⁾
// ---------------------------------------------------------------------------

/// Class [pp₂, pp₁] with pp₁ normalized to the standard point over `source`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongedGaugeGroupoidElement {
    pub target: ProlongedPoint,
    pub source: Vec<f64>,
}

impl ProlongedGaugeGroupoidElement {
    pub fn from_pair(pp2: &ProlongedPoint, pp1: &ProlongedPoint) -> Result<Self> {
        Ok(Self { target: pp2.right_action(&pp1.normalizer()?)?, source: pp1.x.clone() })
    }

    pub fn group(&self) -> &Arc<MatrixGroup> {
        self.target.group()
    }

    /// `self · first`.
    pub fn compose(&self, first: &Self) -> Result<Self> {
        let d = base_distance(&self.source, &first.target.x);
        if d > EPS_BASE {
            return Err(Error::Composability(d));
        }
        let shift = first.target.from_standard()?;
        Ok(Self { target: self.target.right_action(&shift)?, source: first.source.clone() })
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.target.distance(&other.target).max(base_distance(&self.source, &other.source))
    }
}

/// [pp₂, pp₁] ↦ Tρ_P ∘ (u_{p₂}∘a_{x₂}∘a_{x₁}⁻¹, u_{p₁}).
pub fn jggg_map(pp2: &ProlongedPoint, pp1: &ProlongedPoint) -> Result<JetGroupoidElement> {
    same_group(pp2.group(), pp1.group())?;
    let a1inv = invert(&pp1.frame)?;
    let frame = &pp2.frame * &a1inv;
    let xi = pp1.g.ad_map(&pp2.body_slope.compose_right(&frame).sub(&pp1.body_slope)?)?;
    JetGroupoidElement::new(pp1.x.clone(), pp2.x.clone(), pp2.g.mul(&pp1.g.inv()?)?, frame, xi)
}

pub fn jggg_map_class(c: &ProlongedGaugeGroupoidElement) -> Result<JetGroupoidElement> {
    jggg_map(&c.target, &ProlongedPoint::standard(c.group(), &c.source))
}

/// Constructive section of [`jggg_map`]: source frame I, target (A, (y, h), Ξ∘A⁻¹).
pub fn jggg_inverse(u: &JetGroupoidElement) -> Result<ProlongedGaugeGroupoidElement> {
    let ainv = invert(&u.frame)?;
    Ok(ProlongedGaugeGroupoidElement {
        target: ProlongedPoint {
            x: u.x_tgt.clone(),
            frame: u.frame.clone(),
            g: u.h.clone(),
            body_slope: u.xi.compose_right(&ainv),
        },
        source: u.x_src.clone(),
    })
}
