// Shared helpers for the integration suites. Everything here recomputes
// quantities from raw problem data rather than calling the library's own
// residual helpers.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ripalm::corpus::CorpusProblem;
use ripalm::inner::SubproblemSpec;
use ripalm::problem::{ConvexProgram, Vector};
use ripalm::solver::{exact_floor, IterateState, StepEvent};
use ripalm::SolverParams;

pub fn corpus() -> Vec<CorpusProblem> {
    ripalm::corpus::all().expect("corpus builds")
}

/// `ℓ(x, y) = f(x) + ⟨λ, Ax - b⟩ + ⟨μ, g(x)⟩`
pub fn lagrangian(p: &ConvexProgram, x: &Vector, lambda: &Vector, mu: &Vector) -> f64 {
    let f = p.smooth.value(x) + p.prox.value(x);
    let eq = &p.equality.a * x - &p.equality.b;
    f + lambda.dot(&eq) + mu.dot(&p.inequality.values(x))
}

/// Comparison points around `x` on several scales.
pub fn sample_points(rng: &mut ChaCha8Rng, x: &Vector, count: usize) -> Vec<Vector> {
    (0..count)
        .map(|i| {
            let scale = 10f64.powi((i % 6) as i32 - 4);
            x + Vector::from_fn(x.len(), |_, _| rng.gen_range(-1.0..1.0)) * scale
        })
        .collect()
}

/// Subproblem solved during the step behind `ev`.
pub fn subproblem<'a>(p: &'a ConvexProgram, ev: &'a StepEvent<'a>) -> SubproblemSpec<'a> {
    SubproblemSpec {
        program: p,
        multipliers: &ev.prev.multipliers,
        sigma: ev.outcome.sigma,
        tau: ev.outcome.tau,
        x_anchor: &ev.prev.x,
        warm_start: &ev.prev.x,
    }
}

/// Independent evaluation of both sides of the acceptance test.
pub struct Sides {
    pub quad: f64,
    pub sd_norm: f64,
    pub rhs: f64,
}

pub fn criterion_sides(p: &ConvexProgram, prev: &IterateState, x_new: &Vector, delta: &Vector, sigma: f64, tau: f64, rho: f64) -> Sides {
    let mut eq_sq = 0.0;
    for i in 0..p.m_eq() {
        let r: f64 = (0..p.dim()).map(|j| p.equality.a[(i, j)] * x_new[j]).sum::<f64>() - p.equality.b[i];
        eq_sq += (sigma * r) * (sigma * r);
    }
    let g = p.inequality.values(x_new);
    let mut compl_sq = 0.0;
    for i in 0..g.len() {
        let v = prev.multipliers.mu[i].min(-sigma * g[i]);
        compl_sq += v * v;
    }
    let mut dx_sq = 0.0;
    let mut cross = 0.0;
    let mut sd_sq = 0.0;
    for j in 0..p.dim() {
        dx_sq += (x_new[j] - prev.x[j]).powi(2);
        cross += (prev.w[j] - x_new[j]) * sigma * delta[j];
        sd_sq += (sigma * delta[j]).powi(2);
    }
    Sides {
        quad: 2.0 * cross.abs() + sd_sq,
        sd_norm: sd_sq.sqrt(),
        rhs: rho * (eq_sq + compl_sq + tau * dx_sq),
    }
}

/// Largest left-hand side a certificate at the exactness floor can produce.
pub fn floor_slack(params: &SolverParams, prev: &IterateState, x_new: &Vector, sigma: f64, step: f64) -> f64 {
    let sd = sigma * exact_floor(params.exact_eps, x_new, step);
    2.0 * (&prev.w - x_new).norm() * sd + sd * sd + sd
}

/// Checks `Ψ(z) >= Ψ(x⁺) + ⟨Δ, z - x⁺⟩` at `count` sampled points. Returns
/// the number of violations at relative tolerance `1e-9`.
pub fn certificate_violations(s: &SubproblemSpec<'_>, x_plus: &Vector, delta: &Vector, rng: &mut ChaCha8Rng, count: usize) -> usize {
    let base = s.value(x_plus);
    sample_points(rng, x_plus, count)
        .iter()
        .filter(|z| {
            let vz = s.value(z);
            if vz.is_infinite() {
                return false;
            }
            let lin = base + delta.dot(&(*z - x_plus));
            vz < lin - 1e-9 * (1.0 + vz.abs().max(base.abs()))
        })
        .count()
}
