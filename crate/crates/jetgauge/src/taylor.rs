//! Order-2 forward Taylor arithmetic.
//!
//! A [`TaylorScalar`] carries the value, gradient and Hessian of a function of
//! up to [`MAX_VARS`] base variables. Smooth maps are ordinary Rust closures
//! over this arithmetic; jets are read off by evaluating on seeded inputs.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};

/// Largest number of independent variables a scalar can carry.
pub const MAX_VARS: usize = 6;

/// Default guard for [`TaylorScalar::try_div`].
pub const EPS_DIV: f64 = 1e-12;

/// Truncated second-order Taylor expansion in `nvars` variables.
#[derive(Clone, Copy, PartialEq)]
pub struct TaylorScalar {
    nvars: usize,
    value: f64,
    grad: [f64; MAX_VARS],
    hess: [[f64; MAX_VARS]; MAX_VARS],
}

impl fmt::Debug for TaylorScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.nvars;
        let hess: Vec<&[f64]> = self.hess[..n].iter().map(|r| &r[..n]).collect();
        f.debug_struct("TaylorScalar")
            .field("value", &self.value)
            .field("grad", &&self.grad[..n])
            .field("hess", &hess)
            .finish()
    }
}

impl Default for TaylorScalar {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl From<f64> for TaylorScalar {
    fn from(v: f64) -> Self {
        Self::constant(v)
    }
}

impl TaylorScalar {
    /// A constant. Constants carry no variables and mix with scalars of any arity.
    pub fn constant(value: f64) -> Self {
        Self {
            nvars: 0,
            value,
            grad: [0.0; MAX_VARS],
            hess: [[0.0; MAX_VARS]; MAX_VARS],
        }
    }

    /// Coordinate function `index` of `nvars` variables, evaluated at `value`.
    pub fn variable(value: f64, index: usize, nvars: usize) -> Result<Self> {
        if nvars > MAX_VARS {
            return Err(Error::DimensionMismatch { expected: MAX_VARS, found: nvars });
        }
        if index >= nvars {
            return Err(Error::DimensionMismatch { expected: nvars, found: index + 1 });
        }
        let mut s = Self::constant(value);
        s.nvars = nvars;
        s.grad[index] = 1.0;
        Ok(s)
    }

    /// Builds a scalar from explicit derivative data. The Hessian is symmetrized.
    pub fn from_parts(value: f64, grad: &[f64], hess: &[Vec<f64>]) -> Result<Self> {
        let n = grad.len();
        if n > MAX_VARS {
            return Err(Error::DimensionMismatch { expected: MAX_VARS, found: n });
        }
        check_dim(n, hess.len())?;
        let mut s = Self::constant(value);
        s.nvars = n;
        for i in 0..n {
            check_dim(n, hess[i].len())?;
            s.grad[i] = grad[i];
            for j in 0..n {
                s.hess[i][j] = 0.5 * (hess[i][j] + hess[j][i]);
            }
        }
        Ok(s)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn gradient(&self) -> &[f64] {
        &self.grad[..self.nvars]
    }

    /// Partial derivative along variable `i` (zero beyond the carried arity).
    pub fn d(&self, i: usize) -> f64 {
        if i < MAX_VARS {
            self.grad[i]
        } else {
            0.0
        }
    }

    /// Second partial derivative along variables `i`, `j`.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if i < MAX_VARS && j < MAX_VARS {
            self.hess[i][j]
        } else {
            0.0
        }
    }

    pub fn hessian(&self) -> Vec<Vec<f64>> {
        let n = self.nvars;
        self.hess[..n].iter().map(|r| r[..n].to_vec()).collect()
    }

    /// Composes with a univariate function given its value and first two derivatives at `self.value`.
    pub fn chain(&self, f: f64, df: f64, d2f: f64) -> Self {
        let n = self.nvars;
        let mut r = Self::constant(f);
        r.nvars = n;
        for i in 0..n {
            r.grad[i] = df * self.grad[i];
            for j in 0..n {
                r.hess[i][j] = df * self.hess[i][j] + d2f * self.grad[i] * self.grad[j];
            }
        }
        r
    }

    pub fn scale(&self, c: f64) -> Self {
        self.chain(c * self.value, c, 0.0)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(&self) -> Result<Self> {
        if self.value <= EPS_DIV {
            return Err(Error::DivisionNearZero(self.value));
        }
        let r = self.value.sqrt();
        Ok(self.chain(r, 0.5 / r, -0.25 / (r * self.value)))
    }

    pub fn ln(&self) -> Result<Self> {
        if self.value <= EPS_DIV {
            return Err(Error::DivisionNearZero(self.value));
        }
        let v = self.value;
        Ok(self.chain(v.ln(), 1.0 / v, -1.0 / (v * v)))
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = Self::constant(1.0);
        for _ in 0..k {
            acc = acc * *self;
        }
        acc
    }

    pub fn try_recip(&self, eps_div: f64) -> Result<Self> {
        let v = self.value;
        if v.abs() <= eps_div {
            return Err(Error::DivisionNearZero(v));
        }
        Ok(self.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)))
    }

    /// Quotient guarded by `eps_div`.
    pub fn try_div(&self, rhs: &Self, eps_div: f64) -> Result<Self> {
        Ok(*self * rhs.try_recip(eps_div)?)
    }

    fn zip(a: &Self, b: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = a.nvars.max(b.nvars);
        let mut r = Self::constant(f(a.value, b.value));
        r.nvars = n;
        for i in 0..n {
            r.grad[i] = f(a.grad[i], b.grad[i]);
            for j in 0..n {
                r.hess[i][j] = f(a.hess[i][j], b.hess[i][j]);
            }
        }
        r
    }
}

impl Add for TaylorScalar {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::zip(&self, &rhs, |a, b| a + b)
    }
}

impl Sub for TaylorScalar {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::zip(&self, &rhs, |a, b| a - b)
    }
}

impl Mul for TaylorScalar {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let n = self.nvars.max(rhs.nvars);
        let (a, b) = (&self, &rhs);
        let mut r = Self::constant(a.value * b.value);
        r.nvars = n;
        for i in 0..n {
            r.grad[i] = a.value * b.grad[i] + a.grad[i] * b.value;
            for j in 0..n {
                r.hess[i][j] = a.value * b.hess[i][j]
                    + b.value * a.hess[i][j]
                    + a.grad[i] * b.grad[j]
                    + a.grad[j] * b.grad[i];
            }
        }
        r
    }
}

/// Unguarded quotient; use [`TaylorScalar::try_div`] when the denominator may vanish.
impl Div for TaylorScalar {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let v = rhs.value;
        self * rhs.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
    }
}

impl Neg for TaylorScalar {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Add<f64> for TaylorScalar {
    type Output = Self;
    fn add(mut self, rhs: f64) -> Self {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for TaylorScalar {
    type Output = Self;
    fn sub(mut self, rhs: f64) -> Self {
        self.value -= rhs;
        self
    }
}

impl Mul<f64> for TaylorScalar {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<TaylorScalar> for f64 {
    type Output = TaylorScalar;
    fn mul(self, rhs: TaylorScalar) -> TaylorScalar {
        rhs.scale(self)
    }
}

impl AddAssign for TaylorScalar {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for TaylorScalar {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl std::iter::Sum for TaylorScalar {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::constant(0.0), |a, b| a + b)
    }
}

/// Seeds the coordinate functions at `x`.
pub fn seed_coordinates(x: &[f64]) -> Result<Vec<TaylorScalar>> {
    let n = x.len();
    (0..n).map(|i| TaylorScalar::variable(x[i], i, n)).collect()
}

/// Arithmetic primitives by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arith {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Sin,
    Cos,
    Sqrt,
    Ln,
}

/// Applies `op`; binary ops require `b`.
pub fn arith(op: Arith, a: &TaylorScalar, b: Option<&TaylorScalar>, eps_div: f64) -> Result<TaylorScalar> {
    let rhs = || b.copied().ok_or(Error::DimensionMismatch { expected: 2, found: 1 });
    Ok(match op {
        Arith::Add => *a + rhs()?,
        Arith::Sub => *a - rhs()?,
        Arith::Mul => *a * rhs()?,
        Arith::Div => a.try_div(&rhs()?, eps_div)?,
        Arith::Neg => -*a,
        Arith::Exp => a.exp(),
        Arith::Sin => a.sin(),
        Arith::Cos => a.cos(),
        Arith::Sqrt => a.sqrt()?,
        Arith::Ln => a.ln()?,
    })
}

// ---------------------------------------------------------------------------
// Matrices of Taylor scalars
// ---------------------------------------------------------------------------

/// Row-major matrix of [`TaylorScalar`] entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<TaylorScalar>,
}

impl TaylorMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![TaylorScalar::constant(0.0); rows * cols] }
    }

    pub fn identity(m: usize) -> Self {
        let mut r = Self::zeros(m, m);
        for i in 0..m {
            r[(i, i)] = TaylorScalar::constant(1.0);
        }
        r
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut r = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                r[(i, j)] = TaylorScalar::constant(m[(i, j)]);
            }
        }
        r
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> TaylorScalar) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Column vector.
    pub fn from_column(v: &[TaylorScalar]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    /// `base + Σ_k vars[k] · dirs[k]`, with `vars` scalar coefficients.
    pub fn affine(base: &DMatrix<f64>, dirs: &[DMatrix<f64>], vars: &[TaylorScalar]) -> Self {
        let mut r = Self::from_matrix(base);
        for (d, v) in dirs.iter().zip(vars) {
            r = &r + &Self::from_matrix(d).scale(v);
        }
        r
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[TaylorScalar] {
        &self.data
    }

    pub fn into_entries(self) -> Vec<TaylorScalar> {
        self.data
    }

    /// Reshapes a flat row-major slice.
    pub fn from_entries(rows: usize, cols: usize, data: Vec<TaylorScalar>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn value(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].value())
    }

    /// Matrix of partial derivatives along variable `k`.
    pub fn partial(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].d(k))
    }

    /// Matrix of second partials along variables `k`, `l`.
    pub fn second(&self, k: usize, l: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].d2(k, l))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: &TaylorScalar) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| *a * *c).collect() }
    }

    pub fn scale_f64(&self, c: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|a| a.scale(c)).collect() }
    }

    pub fn try_matmul(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.cols, rhs.rows)?;
        Ok(Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * rhs[(k, j)]).sum()
        }))
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[TaylorScalar]) -> Result<Vec<TaylorScalar>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows).map(|i| (0..self.cols).map(|k| self[(i, k)] * v[k]).sum()).collect())
    }

    fn max_abs_value(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.value().abs()))
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting on values.
    pub fn try_inverse(&self, eps: f64) -> Result<Self> {
        check_dim(self.rows, self.cols)?;
        let m = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(m);
        for c in 0..m {
            let p = (c..m)
                .max_by(|&i, &j| a[(i, c)].value().abs().total_cmp(&a[(j, c)].value().abs()))
                .unwrap_or(c);
            if a[(p, c)].value().abs() <= eps {
                return Err(Error::SingularMatrix(a[(p, c)].value().abs()));
            }
            if p != c {
                for j in 0..m {
                    a.data.swap(p * m + j, c * m + j);
                    inv.data.swap(p * m + j, c * m + j);
                }
            }
            let r = a[(c, c)].try_recip(0.0)?;
            for j in 0..m {
                a[(c, j)] = a[(c, j)] * r;
                inv[(c, j)] = inv[(c, j)] * r;
            }
            for i in 0..m {
                if i == c {
                    continue;
                }
                let f = a[(i, c)];
                for j in 0..m {
                    let (acj, icj) = (a[(c, j)], inv[(c, j)]);
                    a[(i, j)] -= f * acj;
                    inv[(i, j)] -= f * icj;
                }
            }
        }
        Ok(inv)
    }

    /// Matrix exponential by scaling and squaring with a truncated series.
    pub fn exp(&self) -> Result<Self> {
        check_dim(self.rows, self.cols)?;
        let norm = self.max_abs_value() * self.rows as f64;
        let mut s = 0u32;
        while norm / f64::from(1u32 << s.min(30)) > 0.25 && s < 60 {
            s += 1;
        }
        let x = self.scale_f64(0.5f64.powi(s as i32));
        let mut term = Self::identity(self.rows);
        let mut sum = term.clone();
        for k in 1..=18 {
            term = term.try_matmul(&x)?.scale_f64(1.0 / k as f64);
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = sum.try_matmul(&sum)?;
        }
        Ok(sum)
    }
}

impl std::ops::Index<(usize, usize)> for TaylorMatrix {
    type Output = TaylorScalar;
    fn index(&self, (i, j): (usize, usize)) -> &TaylorScalar {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for TaylorMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut TaylorScalar {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &TaylorMatrix {
    type Output = TaylorMatrix;
    fn add(self, rhs: &TaylorMatrix) -> TaylorMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in TaylorMatrix add");
        TaylorMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl Sub for &TaylorMatrix {
    type Output = TaylorMatrix;
    fn sub(self, rhs: &TaylorMatrix) -> TaylorMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in TaylorMatrix sub");
        TaylorMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

impl Mul for &TaylorMatrix {
    type Output = TaylorMatrix;
    fn mul(self, rhs: &TaylorMatrix) -> TaylorMatrix {
        self.try_matmul(rhs).expect("shape mismatch in TaylorMatrix product")
    }
}

// ---------------------------------------------------------------------------
// Jets of maps Rⁿ → Rᵐ
// ---------------------------------------------------------------------------

/// Second-order jet of a map at `point`: value, Jacobian, and one Hessian per output.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub point: DVector<f64>,
    pub value: DVector<f64>,
    pub first: DMatrix<f64>,
    pub second: Vec<DMatrix<f64>>,
}

impl Jet2 {
    /// Reads the jet off Taylor outputs evaluated on seeds at `point`.
    pub fn from_outputs(point: &[f64], outputs: &[TaylorScalar]) -> Self {
        let n = point.len();
        Self {
            point: DVector::from_column_slice(point),
            value: DVector::from_iterator(outputs.len(), outputs.iter().map(|o| o.value())),
            first: DMatrix::from_fn(outputs.len(), n, |i, j| outputs[i].d(j)),
            second: outputs.iter().map(|o| DMatrix::from_fn(n, n, |i, j| o.d2(i, j))).collect(),
        }
    }

    pub fn identity(point: &[f64]) -> Self {
        let n = point.len();
        Self {
            point: DVector::from_column_slice(point),
            value: DVector::from_column_slice(point),
            first: DMatrix::identity(n, n),
            second: vec![DMatrix::zeros(n, n); n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.point.len()
    }

    pub fn output_dim(&self) -> usize {
        self.value.len()
    }

    /// Jet of the local inverse of a square map, based at `self.value`.
    pub fn invert(&self) -> Result<Self> {
        let n = self.input_dim();
        check_dim(n, self.output_dim())?;
        let det = self.first.determinant();
        let inv = self.first.clone().try_inverse().ok_or(Error::SingularMatrix(det.abs()))?;
        let mut second = vec![DMatrix::zeros(n, n); n];
        for (i, s) in second.iter_mut().enumerate() {
            let mut acc = DMatrix::zeros(n, n);
            for j in 0..n {
                acc += &self.second[j] * inv[(i, j)];
            }
            *s = -(inv.transpose() * acc * &inv);
        }
        Ok(Self { point: self.value.clone(), value: self.point.clone(), first: inv, second })
    }
}

/// Chain rule to second order: the jet of `outer ∘ inner` at `inner.point`.
pub fn compose_jet2(outer: &Jet2, inner: &Jet2) -> Result<Jet2> {
    check_dim(outer.input_dim(), inner.output_dim())?;
    let k = inner.output_dim();
    let first = &outer.first * &inner.first;
    let second = (0..outer.output_dim())
        .map(|i| {
            let mut acc = inner.first.transpose() * &outer.second[i] * &inner.first;
            for j in 0..k {
                acc += &inner.second[j] * outer.first[(i, j)];
            }
            acc
        })
        .collect();
    Ok(Jet2 { point: inner.point.clone(), value: outer.value.clone(), first, second })
}

// ---------------------------------------------------------------------------
// Smooth maps as programs
// ---------------------------------------------------------------------------

type Program = dyn Fn(&[TaylorScalar]) -> Vec<TaylorScalar> + Send + Sync;

/// A smooth map Rⁿ → Rᵐ given as a program over Taylor arithmetic.
#[derive(Clone)]
pub struct SmoothMap {
    input_dim: usize,
    output_dim: usize,
    program: Arc<Program>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothMap({} -> {})", self.input_dim, self.output_dim)
    }
}

impl SmoothMap {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        program: impl Fn(&[TaylorScalar]) -> Vec<TaylorScalar> + Send + Sync + 'static,
    ) -> Self {
        Self { input_dim, output_dim, program: Arc::new(program) }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(n, n, |x| x.to_vec())
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn eval(&self, x: &[TaylorScalar]) -> Result<Vec<TaylorScalar>> {
        check_dim(self.input_dim, x.len())?;
        let out = (self.program)(x);
        check_dim(self.output_dim, out.len())?;
        Ok(out)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<Vec<f64>> {
        let xs: Vec<TaylorScalar> = x.iter().map(|&v| TaylorScalar::constant(v)).collect();
        Ok(self.eval(&xs)?.iter().map(|o| o.value()).collect())
    }

    pub fn jet2(&self, x: &[f64]) -> Result<Jet2> {
        let out = self.eval(&seed_coordinates(x)?)?;
        Ok(Jet2::from_outputs(x, &out))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SmoothMap) -> Result<SmoothMap> {
        check_dim(self.input_dim, inner.output_dim)?;
        let (outer, first) = (self.program.clone(), inner.program.clone());
        Ok(Self::new(inner.input_dim, self.output_dim, move |x| outer(&first(x))))
    }
}

/// Maximum deviations between Taylor derivatives and central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDifferenceResidual {
    pub gradient: f64,
    pub hessian: f64,
}

impl FiniteDifferenceResidual {
    pub fn max(&self) -> f64 {
        self.gradient.max(self.hessian)
    }
}

/// Compares the Taylor gradient and Hessian of `map` at `x` against central differences with step `h`.
pub fn finite_difference_check(map: &SmoothMap, x: &[f64], h: f64) -> Result<FiniteDifferenceResidual> {
    if h <= 0.0 {
        return Err(Error::Config(format!("finite-difference step must be positive, got {h}")));
    }
    let n = x.len();
    let jet = map.jet2(x)?;
    let at = |shift: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut y = x.to_vec();
        for &(i, d) in shift {
            y[i] += d;
        }
        map.eval_f64(&y)
    };
    let mut res = FiniteDifferenceResidual { gradient: 0.0, hessian: 0.0 };
    for i in 0..n {
        let (p, m) = (at(&[(i, h)])?, at(&[(i, -h)])?);
        for o in 0..map.output_dim() {
            let fd = (p[o] - m[o]) / (2.0 * h);
            res.gradient = res.gradient.max((fd - jet.first[(o, i)]).abs());
        }
        for j in 0..n {
            let pp = at(&[(i, h), (j, h)])?;
            let pm = at(&[(i, h), (j, -h)])?;
            let mp = at(&[(i, -h), (j, h)])?;
            let mm = at(&[(i, -h), (j, -h)])?;
            for o in 0..map.output_dim() {
                let fd = (pp[o] - pm[o] - mp[o] + mm[o]) / (4.0 * h * h);
                res.hessian = res.hessian.max((fd - jet.second[o][(i, j)]).abs());
            }
        }
    }
    Ok(res)
}

// ---------------------------------------------------------------------------
// Polynomials
// ---------------------------------------------------------------------------

/// Sparse polynomial in `nvars` variables: Σ coef · Π x_i^{exps_i}.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    pub nvars: usize,
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: Vec::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self { nvars, terms: vec![(c, vec![0; nvars])] }
    }

    /// All monomials of total degree ≤ `degree`, in graded order.
    pub fn monomials(nvars: usize, degree: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![0; nvars]];
        for _ in 0..degree {
            let mut next = Vec::new();
            for m in &out {
                for i in 0..nvars {
                    let mut e = m.clone();
                    e[i] += 1;
                    if !next.contains(&e) && !out.contains(&e) {
                        next.push(e);
                    }
                }
            }
            out.extend(next);
        }
        out
    }

    /// Random coefficients uniform in `[-scale, scale]` on every monomial of degree ≤ `degree`.
    pub fn random(nvars: usize, degree: u32, scale: f64, rng: &mut impl Rng) -> Self {
        let terms = Self::monomials(nvars, degree)
            .into_iter()
            .map(|e| (rng.gen_range(-scale..=scale), e))
            .collect();
        Self { nvars, terms }
    }

    /// Same as [`Polynomial::random`] but without constant or linear terms.
    pub fn random_nonlinear(nvars: usize, degree: u32, scale: f64, rng: &mut impl Rng) -> Self {
        let terms = Self::monomials(nvars, degree)
            .into_iter()
            .filter(|e| e.iter().sum::<u32>() >= 2)
            .map(|e| (rng.gen_range(-scale..=scale), e))
            .collect();
        Self { nvars, terms }
    }

    pub fn eval(&self, x: &[TaylorScalar]) -> TaylorScalar {
        self.terms
            .iter()
            .map(|(c, e)| {
                e.iter()
                    .enumerate()
                    .fold(TaylorScalar::constant(*c), |acc, (i, &k)| if k == 0 { acc } else { acc * x[i].powi(k) })
            })
            .sum()
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| e.iter().enumerate().fold(*c, |acc, (i, &k)| acc * x[i].powi(k as i32)))
            .sum()
    }

    /// ∂/∂x_var, exactly.
    pub fn derivative(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(_, e)| e[var] > 0)
            .map(|(c, e)| {
                let mut e2 = e.clone();
                e2[var] -= 1;
                (c * e[var] as f64, e2)
            })
            .collect();
        Self { nvars: self.nvars, terms }
    }
}
