//! Augmented Lagrangian
//!
//! ```text
//! L_σ(x, λ, μ) = f(x) + ⟨λ, Ax-b⟩ + σ/2 ‖Ax-b‖² + 1/(2σ) ‖max{0, μ+σg(x)}‖² - 1/(2σ) ‖μ‖²
//! ```
//!
//! together with the multiplier update and the complementarity residual
//! `min{μ, -σg(x)}` shared by the error criterion and the KKT residual.

use crate::error::{check_dim, Error, Result};
use crate::problem::{ConvexProgram, Vector};

/// Dual variables `y = (λ, μ)` with `μ >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers {
    pub lambda: Vector,
    pub mu: Vector,
}

impl Multipliers {
    pub fn zeros(p: &ConvexProgram) -> Self {
        Self {
            lambda: Vector::zeros(p.m_eq()),
            mu: Vector::zeros(p.m_ineq()),
        }
    }

    pub fn new(lambda: Vector, mu: Vector) -> Result<Self> {
        if mu.iter().any(|&v| v < 0.0 || v.is_nan()) {
            return Err(Error::InvalidParameter(
                "inequality multipliers must be nonnegative".into(),
            ));
        }
        Ok(Self { lambda, mu })
    }

    /// The stacked dual vector `(λ; μ)`.
    pub fn stacked(&self) -> Vector {
        let mut y = Vector::zeros(self.lambda.len() + self.mu.len());
        y.rows_mut(0, self.lambda.len()).copy_from(&self.lambda);
        y.rows_mut(self.lambda.len(), self.mu.len()).copy_from(&self.mu);
        y
    }

    pub fn from_stacked(y: &Vector, m_eq: usize) -> Self {
        Self {
            lambda: y.rows(0, m_eq).into_owned(),
            mu: y.rows(m_eq, y.len() - m_eq).into_owned(),
        }
    }

    fn check(&self, p: &ConvexProgram) -> Result<()> {
        check_dim("equality multipliers", p.m_eq(), self.lambda.len())?;
        check_dim("inequality multipliers", p.m_ineq(), self.mu.len())
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "penalty parameter must be positive, got {sigma}"
        )))
    }
}

fn shifted_positive(mu: &Vector, g: &Vector, sigma: f64) -> Vector {
    mu.zip_map(g, |m, gv| (m + sigma * gv).max(0.0))
}

/// Penalty terms of `L_σ` excluding `f`.
fn penalty_value(p: &ConvexProgram, x: &Vector, m: &Multipliers, sigma: f64) -> f64 {
    let r = p.equality.residual(x);
    let g = p.inequality.values(x);
    m.lambda.dot(&r) + 0.5 * sigma * r.norm_squared()
        + (shifted_positive(&m.mu, &g, sigma).norm_squared() - m.mu.norm_squared())
            / (2.0 * sigma)
}

pub fn eval_aug_lagrangian(
    p: &ConvexProgram,
    x: &Vector,
    m: &Multipliers,
    sigma: f64,
) -> Result<f64> {
    check_sigma(sigma)?;
    m.check(p)?;
    let f = p.objective(x)?;
    if f.is_infinite() {
        return Ok(f);
    }
    Ok(f + penalty_value(p, x, m, sigma))
}

/// Value of the smooth part of the subproblem objective
/// `Ψ(x) = L_σ(x, λ, μ) + τ/(2σ) ‖x - anchor‖²`, i.e. `Ψ` without the prox
/// term.
pub fn smooth_subproblem_value(
    p: &ConvexProgram,
    x: &Vector,
    m: &Multipliers,
    sigma: f64,
    tau: f64,
    x_anchor: &Vector,
) -> f64 {
    p.smooth.value(x)
        + penalty_value(p, x, m, sigma)
        + tau / (2.0 * sigma) * (x - x_anchor).norm_squared()
}

/// Gradient of [`smooth_subproblem_value`]:
/// `∇s(x) + Aᵀ(λ + σ(Ax-b)) + ∇g(x)ᵀ max{0, μ + σg(x)} + (τ/σ)(x - anchor)`.
pub fn grad_smooth_subproblem(
    p: &ConvexProgram,
    x: &Vector,
    m: &Multipliers,
    sigma: f64,
    tau: f64,
    x_anchor: &Vector,
) -> Result<Vector> {
    check_sigma(sigma)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "proximal parameter must be positive, got {tau}"
        )));
    }
    m.check(p)?;
    p.check_point(x)?;
    p.check_point(x_anchor)?;
    Ok(grad_unchecked(p, x, m, sigma, tau, x_anchor))
}

pub(crate) fn grad_unchecked(
    p: &ConvexProgram,
    x: &Vector,
    m: &Multipliers,
    sigma: f64,
    tau: f64,
    x_anchor: &Vector,
) -> Vector {
    let mut grad = p.smooth.gradient(x);
    if !p.equality.is_empty() {
        let shifted = &m.lambda + p.equality.residual(x) * sigma;
        grad += p.equality.a.tr_mul(&shifted);
    }
    if !p.inequality.is_empty() {
        let g = p.inequality.values(x);
        let w = shifted_positive(&m.mu, &g, sigma);
        grad += p.inequality.jacobian_transpose_mul(x, &w);
    }
    grad.axpy(tau / sigma, &(x - x_anchor), 1.0);
    grad
}

/// `λ⁺ = λ + σ(Ax - b)`, `μ⁺ = max{0, μ + σg(x)}`.
pub fn multiplier_update(
    p: &ConvexProgram,
    m: &Multipliers,
    x_new: &Vector,
    sigma: f64,
) -> Result<Multipliers> {
    check_sigma(sigma)?;
    m.check(p)?;
    p.check_point(x_new)?;
    let lambda = &m.lambda + p.equality.residual(x_new) * sigma;
    let mu = shifted_positive(&m.mu, &p.inequality.values(x_new), sigma);
    Ok(Multipliers { lambda, mu })
}

/// Componentwise `min{μ, -σ g}`. Zero exactly when `μ >= 0`, `g <= 0` and
/// `μᵢ gᵢ = 0`.
pub fn complementarity_residual(mu: &Vector, g_vals: &Vector, sigma: f64) -> Vector {
    mu.zip_map(g_vals, |m, g| m.min(-sigma * g))
}
