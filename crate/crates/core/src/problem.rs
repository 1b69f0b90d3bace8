//! Problem class: minimize `f(x) = s(x) + h(x)` subject to `Ax = b` and
//! `g(x) <= 0`, where `s` is smooth convex, `h` is convex with a cheap
//! proximal map, and every component of `g` is smooth convex.
//!
//! Problem data is immutable once a [`ConvexProgram`] is built, and every
//! oracle takes `&self`, so a program can be shared across threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Smooth convex part of the objective.
pub trait SmoothTerm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    /// Estimate of the gradient Lipschitz constant. Only used to pick the
    /// first trial step of the inner solver, which backtracks anyway.
    fn lipschitz_bound(&self) -> f64;
}

/// Convex term handled through its proximal map.
pub trait ProxTerm: Send + Sync + fmt::Debug {
    /// May return `f64::INFINITY` outside the domain.
    fn value(&self, x: &Vector) -> f64;
    /// `argmin_z h(z) + ||z - x||^2 / (2t)`.
    fn prox(&self, x: &Vector, t: f64) -> Vector;
    /// Euclidean distance from `v` to the subdifferential `∂h(x)`. Points
    /// within `1e-9` of a kink count as sitting on it.
    fn subdiff_distance(&self, x: &Vector, v: &Vector) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

const KINK_TOL: f64 = 1e-9;

fn at(v: f64, b: f64) -> bool {
    (v - b).abs() <= KINK_TOL * (1.0 + b.abs())
}

/// Distance from `v` to the normal cone of `[lo, hi]` at `x`, per component.
fn box_normal_distance(x: &Vector, v: &Vector, lo: f64, hi: f64) -> f64 {
    x.iter()
        .zip(v.iter())
        .map(|(&xi, &vi)| {
            let (at_lo, at_hi) = (at(xi, lo), at(xi, hi));
            let d = match (at_lo, at_hi) {
                (true, true) => 0.0,
                (true, false) => vi.max(0.0),
                (false, true) => (-vi).max(0.0),
                (false, false) => vi.abs(),
            };
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// A block of smooth convex inequality constraints `g(x) <= 0`.
pub trait InequalityBlock: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn values(&self, x: &Vector) -> Vector;
    /// Jacobian, `len() x dim()`.
    fn jacobian(&self, x: &Vector) -> Matrix;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `J(x)^T v` without forming the Jacobian when a block can avoid it.
    fn jacobian_transpose_mul(&self, x: &Vector, v: &Vector) -> Vector {
        self.jacobian(x).tr_mul(v)
    }
}

// ---------------------------------------------------------------------------
// smooth terms

#[derive(Debug, Clone)]
pub struct ZeroSmooth {
    pub n: usize,
}

impl SmoothTerm for ZeroSmooth {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn gradient(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.n)
    }
    fn lipschitz_bound(&self) -> f64 {
        0.0
    }
}

/// `½ xᵀQx + cᵀx` with `Q` symmetric positive semidefinite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub q: Matrix,
    pub c: Vector,
}

impl Quadratic {
    pub fn new(q: Matrix, c: Vector) -> Result<Self> {
        check_dim("quadratic objective Q rows", c.len(), q.nrows())?;
        check_dim("quadratic objective Q cols", c.len(), q.ncols())?;
        Ok(Self { q, c })
    }

    /// `½‖x - z‖²`, written as `½xᵀx - zᵀx` (the constant is dropped).
    pub fn distance_to(z: &Vector) -> Self {
        Self {
            q: Matrix::identity(z.len(), z.len()),
            c: -z,
        }
    }
}

impl SmoothTerm for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }
    fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x + &self.c
    }
    fn lipschitz_bound(&self) -> f64 {
        self.q.norm()
    }
}

/// `½‖Mx - d‖²`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub m: Matrix,
    pub d: Vector,
}

impl LeastSquares {
    pub fn new(m: Matrix, d: Vector) -> Result<Self> {
        check_dim("least-squares rhs", m.nrows(), d.len())?;
        Ok(Self { m, d })
    }
}

impl SmoothTerm for LeastSquares {
    fn dim(&self) -> usize {
        self.m.ncols()
    }
    fn value(&self, x: &Vector) -> f64 {
        0.5 * (&self.m * x - &self.d).norm_squared()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.m.tr_mul(&(&self.m * x - &self.d))
    }
    fn lipschitz_bound(&self) -> f64 {
        self.m.norm_squared()
    }
}

// ---------------------------------------------------------------------------
// prox terms

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroProx;

impl ProxTerm for ZeroProx {
    fn value(&self, _x: &Vector) -> f64 {
        0.0
    }
    fn prox(&self, x: &Vector, _t: f64) -> Vector {
        x.clone()
    }
    fn subdiff_distance(&self, _x: &Vector, v: &Vector) -> f64 {
        v.norm()
    }
    fn is_zero(&self) -> bool {
        true
    }
}

/// `weight · ‖x‖₁`.
#[derive(Debug, Clone, Copy)]
pub struct L1Norm {
    pub weight: f64,
}

impl ProxTerm for L1Norm {
    fn value(&self, x: &Vector) -> f64 {
        self.weight * x.lp_norm(1)
    }
    fn prox(&self, x: &Vector, t: f64) -> Vector {
        let k = self.weight * t;
        x.map(|v| v.signum() * (v.abs() - k).max(0.0))
    }
    fn subdiff_distance(&self, x: &Vector, v: &Vector) -> f64 {
        let w = self.weight;
        x.iter()
            .zip(v.iter())
            .map(|(&xi, &vi)| {
                let d = if at(xi, 0.0) {
                    (vi.abs() - w).max(0.0)
                } else {
                    vi - w * xi.signum()
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }
}

// Ergodic averages of points inside a box can land an ulp outside it; the
// indicators below accept that much slack.
fn outside(v: f64, lo: f64, hi: f64) -> bool {
    let slack = |b: f64| 1e-12 * (1.0 + b.abs());
    v < lo - slack(lo) || v > hi + slack(hi)
}

/// Indicator of the nonnegative orthant.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonnegIndicator;

impl ProxTerm for NonnegIndicator {
    fn value(&self, x: &Vector) -> f64 {
        if x.iter().any(|&v| outside(v, 0.0, f64::INFINITY)) {
            f64::INFINITY
        } else {
            0.0
        }
    }
    fn prox(&self, x: &Vector, _t: f64) -> Vector {
        x.map(|v| v.max(0.0))
    }
    fn subdiff_distance(&self, x: &Vector, v: &Vector) -> f64 {
        box_normal_distance(x, v, 0.0, f64::INFINITY)
    }
}

/// Indicator of the box `[lo, hi]^N`.
#[derive(Debug, Clone, Copy)]
pub struct BoxIndicator {
    pub lo: f64,
    pub hi: f64,
}

impl BoxIndicator {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::InvalidParameter(format!(
                "box bounds must satisfy lo <= hi (got {lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }
}

impl ProxTerm for BoxIndicator {
    fn value(&self, x: &Vector) -> f64 {
        if x.iter().any(|&v| outside(v, self.lo, self.hi)) {
            f64::INFINITY
        } else {
            0.0
        }
    }
    fn prox(&self, x: &Vector, _t: f64) -> Vector {
        x.map(|v| v.clamp(self.lo, self.hi))
    }
    fn subdiff_distance(&self, x: &Vector, v: &Vector) -> f64 {
        box_normal_distance(x, v, self.lo, self.hi)
    }
}

// ---------------------------------------------------------------------------
// constraints

/// `Ax = b`. Rows may be linearly dependent; `m1 = 0` is allowed.
#[derive(Debug, Clone)]
pub struct LinearEquality {
    pub a: Matrix,
    pub b: Vector,
}

impl LinearEquality {
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        check_dim("equality rhs", a.nrows(), b.len())?;
        Ok(Self { a, b })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            a: Matrix::zeros(0, n),
            b: Vector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b.is_empty()
    }

    pub fn residual(&self, x: &Vector) -> Vector {
        &self.a * x - &self.b
    }
}

#[derive(Debug, Clone)]
pub struct NoInequalities {
    pub n: usize,
}

impl InequalityBlock for NoInequalities {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        0
    }
    fn values(&self, _x: &Vector) -> Vector {
        Vector::zeros(0)
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::zeros(0, self.n)
    }
    fn jacobian_transpose_mul(&self, _x: &Vector, _v: &Vector) -> Vector {
        Vector::zeros(self.n)
    }
}

/// Affine rows `Gx - h <= 0`.
#[derive(Debug, Clone)]
pub struct AffineInequalities {
    pub g: Matrix,
    pub h: Vector,
}

impl AffineInequalities {
    pub fn new(g: Matrix, h: Vector) -> Result<Self> {
        check_dim("affine inequality rhs", g.nrows(), h.len())?;
        Ok(Self { g, h })
    }
}

impl InequalityBlock for AffineInequalities {
    fn dim(&self) -> usize {
        self.g.ncols()
    }
    fn len(&self) -> usize {
        self.h.len()
    }
    fn values(&self, x: &Vector) -> Vector {
        &self.g * x - &self.h
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.g.clone()
    }
    fn jacobian_transpose_mul(&self, _x: &Vector, v: &Vector) -> Vector {
        self.g.tr_mul(v)
    }
}

/// One convex quadratic row `½xᵀQx + qᵀx + c <= 0`.
#[derive(Debug, Clone)]
pub struct QuadraticRow {
    pub q: Matrix,
    pub lin: Vector,
    pub c: f64,
}

impl QuadraticRow {
    pub fn value(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.lin.dot(x) + self.c
    }
    pub fn gradient(&self, x: &Vector) -> Vector {
        &self.q * x + &self.lin
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticInequalities {
    pub n: usize,
    pub rows: Vec<QuadraticRow>,
}

impl QuadraticInequalities {
    pub fn new(n: usize, rows: Vec<QuadraticRow>) -> Result<Self> {
        for row in &rows {
            check_dim("quadratic row Q rows", n, row.q.nrows())?;
            check_dim("quadratic row Q cols", n, row.q.ncols())?;
            check_dim("quadratic row q", n, row.lin.len())?;
        }
        Ok(Self { n, rows })
    }
}

impl InequalityBlock for QuadraticInequalities {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        self.rows.len()
    }
    fn values(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.rows.len(), self.rows.iter().map(|r| r.value(x)))
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        let mut jac = Matrix::zeros(self.rows.len(), self.n);
        for (i, row) in self.rows.iter().enumerate() {
            jac.set_row(i, &row.gradient(x).transpose());
        }
        jac
    }
}

/// Several inequality blocks stacked in order.
#[derive(Debug, Clone)]
pub struct StackedInequalities {
    n: usize,
    blocks: Vec<Arc<dyn InequalityBlock>>,
}

impl StackedInequalities {
    pub fn new(n: usize, blocks: Vec<Arc<dyn InequalityBlock>>) -> Result<Self> {
        for b in &blocks {
            check_dim("stacked inequality block", n, b.dim())?;
        }
        Ok(Self { n, blocks })
    }
}

impl InequalityBlock for StackedInequalities {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }
    fn values(&self, x: &Vector) -> Vector {
        let vals: Vec<f64> = self
            .blocks
            .iter()
            .flat_map(|b| b.values(x).iter().copied().collect::<Vec<_>>())
            .collect();
        Vector::from_vec(vals)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        let mut jac = Matrix::zeros(self.len(), self.n);
        let mut row = 0;
        for b in &self.blocks {
            let j = b.jacobian(x);
            jac.rows_mut(row, j.nrows()).copy_from(&j);
            row += j.nrows();
        }
        jac
    }
    fn jacobian_transpose_mul(&self, x: &Vector, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.n);
        let mut row = 0;
        for b in &self.blocks {
            let m = b.len();
            out += b.jacobian_transpose_mul(x, &v.rows(row, m).into_owned());
            row += m;
        }
        out
    }
}

// ---------------------------------------------------------------------------

/// A complete problem instance.
#[derive(Debug, Clone)]
pub struct ConvexProgram {
    pub smooth: Arc<dyn SmoothTerm>,
    pub prox: Arc<dyn ProxTerm>,
    pub equality: LinearEquality,
    pub inequality: Arc<dyn InequalityBlock>,
    dim: usize,
}

impl ConvexProgram {
    pub fn new(
        smooth: Arc<dyn SmoothTerm>,
        prox: Arc<dyn ProxTerm>,
        equality: LinearEquality,
        inequality: Arc<dyn InequalityBlock>,
    ) -> Result<Self> {
        let n = smooth.dim();
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        check_dim("equality matrix columns", n, equality.a.ncols())?;
        check_dim("inequality block dimension", n, inequality.dim())?;
        Ok(Self {
            smooth,
            prox,
            equality,
            inequality,
            dim: n,
        })
    }

    /// Smooth objective, no prox term, no constraints yet.
    pub fn unconstrained(smooth: Arc<dyn SmoothTerm>) -> Self {
        let n = smooth.dim();
        Self {
            smooth,
            prox: Arc::new(ZeroProx),
            equality: LinearEquality::empty(n),
            inequality: Arc::new(NoInequalities { n }),
            dim: n,
        }
    }

    pub fn with_prox(mut self, prox: Arc<dyn ProxTerm>) -> Self {
        self.prox = prox;
        self
    }

    pub fn with_equality(mut self, eq: LinearEquality) -> Result<Self> {
        check_dim("equality matrix columns", self.dim, eq.a.ncols())?;
        self.equality = eq;
        Ok(self)
    }

    pub fn with_inequality(mut self, ineq: Arc<dyn InequalityBlock>) -> Result<Self> {
        check_dim("inequality block dimension", self.dim, ineq.dim())?;
        self.inequality = ineq;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m_eq(&self) -> usize {
        self.equality.len()
    }

    pub fn m_ineq(&self) -> usize {
        self.inequality.len()
    }

    pub(crate) fn check_point(&self, x: &Vector) -> Result<()> {
        check_dim("point", self.dim, x.len())
    }

    /// `f(x) = s(x) + h(x)`; `+∞` outside the domain of `h`.
    pub fn objective(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let h = self.prox.value(x);
        if h.is_infinite() {
            return Ok(h);
        }
        Ok(self.smooth.value(x) + h)
    }

    /// `‖(Ax - b ; max{0, g(x)})‖`, zero exactly on the feasible set.
    pub fn feasibility_violation(&self, x: &Vector) -> Result<f64> {
        self.check_point(x)?;
        let eq = self.equality.residual(x).norm_squared();
        let ineq: f64 = self
            .inequality
            .values(x)
            .iter()
            .map(|&v| v.max(0.0).powi(2))
            .sum();
        Ok((eq + ineq).sqrt())
    }
}
