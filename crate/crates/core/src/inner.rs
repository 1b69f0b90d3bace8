//! Inner solver for the proximal augmented Lagrangian subproblem
//!
//! ```text
//! min_x Ψ(x) = L_σ(x, λ, μ) + τ/(2σ) ‖x - anchor‖²
//! ```
//!
//! `Ψ` is `τ/σ`-strongly convex. It is minimized by accelerated proximal
//! gradient with Armijo-type backtracking on the smooth part and
//! function-value restart. Every step yields a certificate `Δ ∈ ∂Ψ(x⁺)`
//! which the caller's acceptance test inspects.

use crate::aug_lagrangian::{grad_unchecked, smooth_subproblem_value, Multipliers};
use crate::error::{Error, Result};
use crate::problem::{ConvexProgram, Vector};

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy)]
pub struct SubproblemSpec<'a> {
    pub program: &'a ConvexProgram,
    pub multipliers: &'a Multipliers,
    pub sigma: f64,
    pub tau: f64,
    pub x_anchor: &'a Vector,
    pub warm_start: &'a Vector,
}

impl SubproblemSpec<'_> {
    pub fn smooth_value(&self, x: &Vector) -> f64 {
        smooth_subproblem_value(
            self.program,
            x,
            self.multipliers,
            self.sigma,
            self.tau,
            self.x_anchor,
        )
    }

    pub fn smooth_gradient(&self, x: &Vector) -> Vector {
        grad_unchecked(
            self.program,
            x,
            self.multipliers,
            self.sigma,
            self.tau,
            self.x_anchor,
        )
    }

    /// `Ψ(x)`, including the prox term (may be `+∞`).
    pub fn value(&self, x: &Vector) -> f64 {
        let h = self.program.prox.value(x);
        if h.is_infinite() {
            return h;
        }
        self.smooth_value(x) + h
    }

    /// Modulus of strong convexity of `Ψ`.
    pub fn strong_convexity(&self) -> f64 {
        self.tau / self.sigma
    }

    /// Rough upper estimate of the Lipschitz constant of `∇Ψ` at the anchor,
    /// used for the first trial step.
    fn lipschitz_estimate(&self) -> f64 {
        let p = self.program;
        let mut l = p.smooth.lipschitz_bound() + self.tau / self.sigma;
        if !p.equality.is_empty() {
            l += self.sigma * p.equality.a.norm_squared();
        }
        if !p.inequality.is_empty() {
            l += self.sigma * p.inequality.jacobian(self.x_anchor).norm_squared();
        }
        l.max(1e-12)
    }

    fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        self.program.check_point(self.x_anchor)?;
        self.program.check_point(self.warm_start)
    }
}

/// An approximate subproblem solution together with its certificate.
#[derive(Debug, Clone)]
pub struct Certificate {
    pub x_new: Vector,
    /// `Δ ∈ ∂Ψ(x_new)`.
    pub delta: Vector,
    pub inner_iters: usize,
    pub step_size: f64,
}

/// What the acceptance test sees after each inner step.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub x_new: &'a Vector,
    pub delta: &'a Vector,
    pub step_size: f64,
    pub iteration: usize,
}

/// `prox_{t h}(z - t ∇Ψ_smooth(z))` for a fixed step `t`.
pub fn prox_grad_step(s: &SubproblemSpec<'_>, z: &Vector, t: f64) -> Vector {
    let grad = s.smooth_gradient(z);
    s.program.prox.prox(&(z - grad * t), t)
}

/// `Δ = (z - x⁺)/t + ∇Ψ_smooth(x⁺) - ∇Ψ_smooth(z)`.
///
/// Prox optimality gives `(z - t∇Ψ_smooth(z) - x⁺)/t ∈ ∂h(x⁺)`; adding
/// `∇Ψ_smooth(x⁺)` puts `Δ` in `∂Ψ(x⁺)`.
pub fn certificate_from_step(s: &SubproblemSpec<'_>, z: &Vector, x_plus: &Vector, t: f64) -> Vector {
    let gz = s.smooth_gradient(z);
    let gx = s.smooth_gradient(x_plus);
    cert_with_grads(z, x_plus, t, &gz, &gx)
}

fn cert_with_grads(z: &Vector, x_plus: &Vector, t: f64, gz: &Vector, gx: &Vector) -> Vector {
    (z - x_plus) / t + gx - gz
}

/// One prox-gradient step from `z` with backtracking, starting at trial
/// step `t`. Returns the new point and the accepted step.
pub fn backtracking_step(
    s: &SubproblemSpec<'_>,
    z: &Vector,
    grad_z: &Vector,
    smooth_z: f64,
    mut t: f64,
) -> Result<(Vector, f64)> {
    let slack = 8.0 * f64::EPSILON * (1.0 + smooth_z.abs());
    for _ in 0..=MAX_HALVINGS {
        let x = s.program.prox.prox(&(z - grad_z * t), t);
        let d = &x - z;
        let model = smooth_z + grad_z.dot(&d) + d.norm_squared() / (2.0 * t);
        let sx = s.smooth_value(&x);
        if sx <= model + slack {
            return Ok((x, t));
        }
        // Convexity gives s(x) <= s(z) + <∇s(x), d>, so this curvature test
        // implies the one above without cancelling large function values.
        let curv = (s.smooth_gradient(&x) - grad_z).dot(&d);
        if curv <= d.norm_squared() / (2.0 * t) {
            return Ok((x, t));
        }
        t *= 0.5;
    }
    Err(Error::BacktrackingFailed {
        halvings: MAX_HALVINGS,
        step: t,
    })
}

/// Runs accelerated proximal gradient from `warm_start` until `accept`
/// returns true for a step, or `budget` steps have been taken.
pub fn solve_subproblem<F>(s: &SubproblemSpec<'_>, mut accept: F, budget: usize) -> Result<Certificate>
where
    F: FnMut(&StepView<'_>) -> bool,
{
    s.validate()?;
    if budget == 0 {
        return Err(Error::InvalidParameter("inner budget must be at least 1".into()));
    }

    let mut t = 1.0 / s.lipschitz_estimate();
    let mut x_prev = s.warm_start.clone();
    let mut prev_val = s.value(&x_prev);
    let mut best = (prev_val, x_prev.clone());
    let mut y = x_prev.clone();
    let mut theta = 1.0_f64;

    for it in 1..=budget {
        let grad_y = s.smooth_gradient(&y);
        let smooth_y = s.smooth_value(&y);
        let (x, step) = backtracking_step(s, &y, &grad_y, smooth_y, t)?;
        t = step;

        let grad_x = s.smooth_gradient(&x);
        let delta = cert_with_grads(&y, &x, t, &grad_y, &grad_x);
        let view = StepView {
            x_new: &x,
            delta: &delta,
            step_size: t,
            iteration: it,
        };
        if accept(&view) {
            return Ok(Certificate {
                x_new: x,
                delta,
                inner_iters: it,
                step_size: t,
            });
        }

        let val = s.value(&x);
        if val < best.0 {
            best = (val, x.clone());
        }
        if val > prev_val && theta > 1.0 {
            // restart: drop momentum and continue from the last good point
            theta = 1.0;
            y = x_prev.clone();
            continue;
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        y = &x + (&x - &x_prev) * ((theta - 1.0) / theta_next);
        theta = theta_next;
        x_prev = x;
        prev_val = val;
    }

    Err(Error::InnerBudgetExhausted {
        budget,
        best: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;
    use nalgebra::{dmatrix, dvector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn half_square_1d() -> ConvexProgram {
        ConvexProgram::unconstrained(Arc::new(Quadratic::new(dmatrix![1.0], dvector![0.0]).unwrap()))
    }

    // Subproblem with Ψ_smooth = ½x² + tiny proximal term; tau/sigma is made
    // negligible by a huge sigma so the examples match ½x² to rounding.
    fn spec<'a>(
        p: &'a ConvexProgram,
        m: &'a Multipliers,
        anchor: &'a Vector,
        sigma: f64,
        tau: f64,
    ) -> SubproblemSpec<'a> {
        SubproblemSpec {
            program: p,
            multipliers: m,
            sigma,
            tau,
            x_anchor: anchor,
            warm_start: anchor,
        }
    }

    #[test]
    fn prox_grad_fixed_point() {
        let p = ConvexProgram::unconstrained(Arc::new(ZeroSmooth { n: 2 }));
        let m = Multipliers::zeros(&p);
        let z = dvector![0.3, -1.2];
        let s = spec(&p, &m, &z, 1.0, 1.0);
        assert_eq!(prox_grad_step(&s, &z, 0.7), z);
    }

    #[test]
    fn prox_grad_exact_one_step_minimizer() {
        // Ψ = ½x² with the proximal term anchored at 0, τ/σ → tiny
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![0.0];
        let s = spec(&p, &m, &anchor, 1e300, 1e-300);
        let x = prox_grad_step(&s, &dvector![1.0], 1.0);
        assert_eq!(x, dvector![0.0]);
    }

    #[test]
    fn prox_grad_soft_threshold() {
        let p = ConvexProgram::unconstrained(Arc::new(ZeroSmooth { n: 2 }))
            .with_prox(Arc::new(L1Norm { weight: 1.0 }));
        let m = Multipliers::zeros(&p);
        let z = dvector![2.0, -0.5];
        // anchor at z so the proximal gradient vanishes at z
        let s = spec(&p, &m, &z, 1.0, 1.0);
        assert_eq!(prox_grad_step(&s, &z, 1.0), dvector![1.0, 0.0]);
    }

    #[test]
    fn certificate_hand_example() {
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![0.0];
        let s = spec(&p, &m, &anchor, 1e300, 1e-300);
        let z = dvector![1.0];
        let x = prox_grad_step(&s, &z, 0.5);
        assert_eq!(x, dvector![0.5]);
        let d = certificate_from_step(&s, &z, &x, 0.5);
        assert_eq!(d, dvector![0.5]);
        // Ψ'(½) = ½
        assert_eq!(s.smooth_gradient(&x), d);
    }

    #[test]
    fn certificate_zero_at_exact_minimizer() {
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![0.0];
        let s = spec(&p, &m, &anchor, 1.0, 1.0);
        let z = dvector![0.0];
        let x = prox_grad_step(&s, &z, 0.3);
        assert_eq!(certificate_from_step(&s, &z, &x, 0.3), dvector![0.0]);
    }

    #[test]
    fn certificate_subgradient_inequality_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let q = dmatrix![3.0, 1.0, 0.0; 1.0, 2.0, 0.5; 0.0, 0.5, 1.5];
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::new(q, dvector![1.0, 0.0, -1.0]).unwrap()))
            .with_prox(Arc::new(L1Norm { weight: 0.3 }));
        let m = Multipliers::zeros(&p);
        let anchor = dvector![0.5, -0.5, 1.0];
        let s = spec(&p, &m, &anchor, 2.0, 1.0);
        let z = dvector![1.0, 2.0, -1.0];
        let t = 0.1;
        let x = prox_grad_step(&s, &z, t);
        let d = certificate_from_step(&s, &z, &x, t);
        let psi_x = s.value(&x);
        for _ in 0..100 {
            let y = Vector::from_fn(3, |_, _| rng.gen_range(-10.0..10.0)) + &x;
            let psi_y = s.value(&y);
            assert!(psi_y >= psi_x + d.dot(&(&y - &x)) - 1e-9 * (1.0 + psi_y.abs()));
        }
    }

    #[test]
    fn accept_always_returns_after_one_step() {
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![3.0];
        let s = spec(&p, &m, &anchor, 1.0, 1.0);
        let cert = solve_subproblem(&s, |_| true, 10).unwrap();
        assert_eq!(cert.inner_iters, 1);
    }

    #[test]
    fn exact_step_accepted_first() {
        // Ψ = ½x² + ½(x-0)² has L = 2, initial step 1/2 lands on 0 exactly
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![0.0];
        let warm = dvector![1.0];
        let s = SubproblemSpec {
            program: &p,
            multipliers: &m,
            sigma: 1.0,
            tau: 1.0,
            x_anchor: &anchor,
            warm_start: &warm,
        };
        let cert = solve_subproblem(&s, |v| v.delta.iter().all(|&d| d == 0.0), 10).unwrap();
        assert_eq!(cert.inner_iters, 1);
        assert_eq!(cert.x_new, dvector![0.0]);
    }

    #[test]
    fn budget_exhaustion_reports_best() {
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![2.0];
        let s = spec(&p, &m, &anchor, 1.0, 1.0);
        match solve_subproblem(&s, |_| false, 5) {
            Err(Error::InnerBudgetExhausted { budget, best }) => {
                assert_eq!(budget, 5);
                assert!(s.value(&best) <= s.value(&anchor));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_zero_budget_and_bad_parameters() {
        let p = half_square_1d();
        let m = Multipliers::zeros(&p);
        let anchor = dvector![2.0];
        assert!(solve_subproblem(&spec(&p, &m, &anchor, 1.0, 1.0), |_| true, 0).is_err());
        assert!(solve_subproblem(&spec(&p, &m, &anchor, 0.0, 1.0), |_| true, 1).is_err());
        assert!(solve_subproblem(&spec(&p, &m, &anchor, 1.0, -1.0), |_| true, 1).is_err());
    }

    #[test]
    fn best_value_never_increases_and_certificates_are_subgradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = dmatrix![4.0, 1.0; 1.0, 3.0];
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::new(q, dvector![-1.0, 2.0]).unwrap()))
            .with_prox(Arc::new(NonnegIndicator))
            .with_equality(LinearEquality::new(dmatrix![1.0, 1.0], dvector![1.0]).unwrap())
            .unwrap()
            .with_inequality(Arc::new(
                QuadraticInequalities::new(
                    2,
                    vec![QuadraticRow {
                        q: Matrix::identity(2, 2) * 2.0,
                        lin: Vector::zeros(2),
                        c: -0.8,
                    }],
                )
                .unwrap(),
            ))
            .unwrap();
        let m = Multipliers::new(dvector![0.5], dvector![0.2]).unwrap();
        let anchor = dvector![2.0, -1.0];
        let s = spec(&p, &m, &anchor, 5.0, 1.0);
        let mut best = f64::INFINITY;
        let mut history = Vec::new();
        let mut certs = Vec::new();
        let _ = solve_subproblem(
            &s,
            |v| {
                best = best.min(s.value(v.x_new));
                history.push(best);
                certs.push((v.x_new.clone(), v.delta.clone()));
                v.iteration >= 200
            },
            500,
        )
        .unwrap();
        assert!(history.windows(2).all(|w| w[1] <= w[0]));
        let mu_sc = s.strong_convexity();
        for (x, d) in certs.iter().step_by(10) {
            let psi_x = s.value(x);
            for _ in 0..100 {
                let dir = Vector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
                let y = x + dir * rng.gen_range(0.0..10.0);
                let psi_y = s.value(&y);
                let diff = &y - x;
                let lower = psi_x + d.dot(&diff) + 0.5 * mu_sc * diff.norm_squared();
                assert!(psi_y >= lower - 1e-9 * (1.0 + psi_y.abs()), "{psi_y} < {lower}");
            }
        }
    }
}
