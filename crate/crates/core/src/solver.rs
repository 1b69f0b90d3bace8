//! Outer loop of the relative-type inexact proximal ALM.
//!
//! Each outer iteration approximately minimizes
//! `L_σk(x, λ^k, μ^k) + τk/(2σk) ‖x - x^k‖²`, accepting the first inner
//! iterate whose certificate `Δ` satisfies the relative error criterion
//!
//! ```text
//! 2|⟨w^k - x^{k+1}, σΔ⟩| + ‖σΔ‖² <= ρ (‖σ(Ax^{k+1}-b)‖² + ‖min{μ^k, -σg(x^{k+1})}‖² + τ‖x^{k+1}-x^k‖²)
//! ```
//!
//! (or its strengthened variant), then updates
//! `λ += σ(Ax-b)`, `μ = max{0, μ+σg(x)}`, `w -= σΔ`.

use crate::aug_lagrangian::{complementarity_residual, multiplier_update, Multipliers};
use crate::diagnostics::{
    ergodic_update, feas_bound_check, gamma_mu, xi_bound, ErgodicState, RateConfig, TraceRecord,
};
use crate::error::{Error, Result};
use crate::inner::{solve_subproblem, Certificate, SubproblemSpec};
use crate::problem::{ConvexProgram, Vector};

#[derive(Debug, Clone, PartialEq)]
pub enum SigmaSchedule {
    Constant(f64),
    /// `σ_k = σ₀ (k+1)`
    Linear(f64),
    /// `σ_k = min(σ₀ c^k, cap)`
    Geometric { sigma0: f64, factor: f64, cap: f64 },
}

/// Default cap for geometric schedules.
pub const DEFAULT_SIGMA_CAP: f64 = 1e8;

impl SigmaSchedule {
    pub fn sigma(&self, k: usize) -> f64 {
        match *self {
            SigmaSchedule::Constant(s) => s,
            SigmaSchedule::Linear(s0) => s0 * (k as f64 + 1.0),
            SigmaSchedule::Geometric { sigma0, factor, cap } => {
                (sigma0 * factor.powi(k.min(i32::MAX as usize) as i32)).min(cap)
            }
        }
    }

    /// Index of the first iteration at which a geometric schedule reaches
    /// its cap.
    pub fn cap_index(&self) -> Option<usize> {
        match *self {
            SigmaSchedule::Geometric { sigma0, factor, cap } => {
                (0..100_000).find(|&k| sigma0 * factor.powi(k as i32) >= cap)
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SigmaSchedule::Constant(s) | SigmaSchedule::Linear(s) => s > 0.0 && s.is_finite(),
            SigmaSchedule::Geometric { sigma0, factor, cap } => {
                sigma0 > 0.0 && factor > 1.0 && cap >= sigma0 && cap.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad sigma schedule {self:?}")))
        }
    }
}

/// Proximal parameters `τ_k = τ₀ Π_{i<k} (1 + ν_i)`; `ν` is zero past the
/// end of the given sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum TauSchedule {
    Constant(f64),
    Growing { tau0: f64, nu: Vec<f64> },
}

impl TauSchedule {
    pub fn tau(&self, k: usize) -> f64 {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Growing { tau0, nu } => {
                tau0 * nu.iter().take(k).map(|v| 1.0 + v).product::<f64>()
            }
        }
    }

    pub fn nu(&self, k: usize) -> f64 {
        match self {
            TauSchedule::Constant(_) => 0.0,
            TauSchedule::Growing { nu, .. } => nu.get(k).copied().unwrap_or(0.0),
        }
    }

    pub fn tau0(&self) -> f64 {
        self.tau(0)
    }

    pub fn nu_sum(&self) -> f64 {
        match self {
            TauSchedule::Constant(_) => 0.0,
            TauSchedule::Growing { nu, .. } => nu.iter().sum(),
        }
    }

    /// `τ₀ Π (1+ν_k)` over the whole (finitely supported) sequence.
    pub fn tau_max(&self) -> f64 {
        match self {
            TauSchedule::Constant(t) => *t,
            TauSchedule::Growing { tau0, nu } => tau0 * nu.iter().map(|v| 1.0 + v).product::<f64>(),
        }
    }

    /// Schedules only grow, so the infimum is `τ₀`.
    pub fn tau_min(&self) -> f64 {
        self.tau0()
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TauSchedule::Constant(t) => *t > 0.0 && t.is_finite(),
            TauSchedule::Growing { tau0, nu } => {
                *tau0 > 0.0 && nu.iter().all(|v| *v >= 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad tau schedule {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CriterionKind {
    Standard,
    /// Also bounds `‖σΔ‖` by the right-hand side, which makes `Σ‖σΔ‖`
    /// finite.
    Strengthened,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub rho: f64,
    pub sigma: SigmaSchedule,
    pub tau: TauSchedule,
    pub criterion: CriterionKind,
    /// Termination tolerance on the scaled KKT residual; `0` disables early
    /// termination so the run always lasts `max_outer` iterations.
    pub tol_kkt: f64,
    pub max_outer: usize,
    pub inner_budget: usize,
    /// Relative size of the floating-point exactness floor: a step is also
    /// accepted when `‖Δ‖ <= exact_eps (1 + ‖x‖) max(1, 1/t)`.
    pub exact_eps: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            sigma: SigmaSchedule::Constant(10.0),
            tau: TauSchedule::Constant(1.0),
            criterion: CriterionKind::Standard,
            tol_kkt: 1e-8,
            max_outer: 500,
            inner_budget: 20_000,
            exact_eps: 1e-14,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!(
                "rho must lie in [0, 1), got {}",
                self.rho
            )));
        }
        self.sigma.validate()?;
        self.tau.validate()?;
        if !(self.tol_kkt >= 0.0) {
            return Err(Error::InvalidParameter("tol_kkt must be nonnegative".into()));
        }
        if self.inner_budget == 0 {
            return Err(Error::InvalidParameter("inner budget must be at least 1".into()));
        }
        if !(self.exact_eps >= 0.0) {
            return Err(Error::InvalidParameter("exact_eps must be nonnegative".into()));
        }
        Ok(())
    }

    /// Whether `√τ_min - 2√ρ > 0`, the extra condition for the asymptotic
    /// linear rate.
    pub fn rate_condition_met(&self) -> bool {
        self.tau.tau_min().sqrt() - 2.0 * self.rho.sqrt() > 0.0
    }
}

/// Live state of the method.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub x: Vector,
    pub multipliers: Multipliers,
    pub w: Vector,
    pub k: usize,
    pub last_delta: Vector,
    pub last_sigma: f64,
    pub last_tau: f64,
}

impl IterateState {
    /// `λ⁰ = 0`, `μ⁰ = 0`, `w⁰ = x⁰`.
    pub fn initial(p: &ConvexProgram, x0: &Vector) -> Result<Self> {
        p.check_point(x0)?;
        Ok(Self {
            x: x0.clone(),
            multipliers: Multipliers::zeros(p),
            w: x0.clone(),
            k: 0,
            last_delta: Vector::zeros(x0.len()),
            last_sigma: f64::NAN,
            last_tau: f64::NAN,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual {
    /// `‖Ax - b‖`
    pub primal_eq: f64,
    /// `‖max{0, g(x)}‖`
    pub primal_ineq: f64,
    /// `‖Δ - (τ/σ)(x⁺ - x)‖`
    pub dual_stat: f64,
    /// `‖min{μ, -g(x)}‖`
    pub compl: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.primal_eq.max(self.primal_ineq).max(self.dual_stat).max(self.compl)
    }

    /// Termination measure: primal parts over `1 + ‖b‖`, complementarity
    /// over `1 + ‖μ‖`.
    pub fn scaled_max(&self, b_norm: f64, mu_norm: f64) -> f64 {
        (self.primal_eq / (1.0 + b_norm))
            .max(self.primal_ineq / (1.0 + b_norm))
            .max(self.dual_stat)
            .max(self.compl / (1.0 + mu_norm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionCheck {
    pub accepted: bool,
    pub lhs: f64,
    pub rhs: f64,
}

fn criterion_sides(
    w: &Vector,
    x_new: &Vector,
    x_old: &Vector,
    delta: &Vector,
    sigma: f64,
    tau: f64,
    rho: f64,
    eq_resid: &Vector,
    compl_resid: &Vector,
) -> (f64, f64, f64) {
    let sd = delta * sigma;
    let quad = 2.0 * (w - x_new).dot(&sd).abs() + sd.norm_squared();
    let rhs = rho
        * ((eq_resid * sigma).norm_squared()
            + compl_resid.norm_squared()
            + tau * (x_new - x_old).norm_squared());
    (quad, sd.norm(), rhs)
}

/// Standard relative error criterion. `compl_resid` is
/// `min{μ^k, -σ g(x_new)}`.
#[allow(clippy::too_many_arguments)]
pub fn check_criterion_standard(
    w: &Vector,
    x_new: &Vector,
    x_old: &Vector,
    delta: &Vector,
    sigma: f64,
    tau: f64,
    rho: f64,
    eq_resid: &Vector,
    compl_resid: &Vector,
) -> CriterionCheck {
    let (lhs, _, rhs) = criterion_sides(w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid);
    CriterionCheck {
        accepted: lhs <= rhs,
        lhs,
        rhs,
    }
}

/// Strengthened criterion: the left side is `max{quadratic term, ‖σΔ‖}`.
#[allow(clippy::too_many_arguments)]
pub fn check_criterion_strengthened(
    w: &Vector,
    x_new: &Vector,
    x_old: &Vector,
    delta: &Vector,
    sigma: f64,
    tau: f64,
    rho: f64,
    eq_resid: &Vector,
    compl_resid: &Vector,
) -> CriterionCheck {
    let (quad, sd_norm, rhs) =
        criterion_sides(w, x_new, x_old, delta, sigma, tau, rho, eq_resid, compl_resid);
    let lhs = quad.max(sd_norm);
    CriterionCheck {
        accepted: lhs <= rhs,
        lhs,
        rhs,
    }
}

/// Evaluates the configured criterion for a candidate `x_new` from raw
/// problem data.
pub fn evaluate_criterion(
    p: &ConvexProgram,
    st: &IterateState,
    x_new: &Vector,
    delta: &Vector,
    sigma: f64,
    tau: f64,
    rho: f64,
    kind: CriterionKind,
) -> CriterionCheck {
    let eq = p.equality.residual(x_new);
    let compl = complementarity_residual(&st.multipliers.mu, &p.inequality.values(x_new), sigma);
    let f = match kind {
        CriterionKind::Standard => check_criterion_standard,
        CriterionKind::Strengthened => check_criterion_strengthened,
    };
    f(&st.w, x_new, &st.x, delta, sigma, tau, rho, &eq, &compl)
}

/// `‖Δ‖` below which a certificate is treated as exactly zero.
pub fn exact_floor(exact_eps: f64, x: &Vector, step: f64) -> f64 {
    exact_eps * (1.0 + x.norm()) * (1.0 / step).max(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptReason {
    Criterion,
    /// Right-hand side numerically zero; accepted through the exactness
    /// floor.
    ExactFloor,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: IterateState,
    pub certificate: Certificate,
    pub kkt: KktResidual,
    pub check: CriterionCheck,
    pub reason: AcceptReason,
    pub sigma: f64,
    pub tau: f64,
}

/// KKT residual at `(x^{k+1}, y^{k+1})` for the step `prev -> next`.
pub fn kkt_residual(p: &ConvexProgram, prev: &IterateState, next: &IterateState, cert: &Certificate) -> KktResidual {
    let sigma = next.last_sigma;
    let tau = next.last_tau;
    let x = &next.x;
    let pvec = &cert.delta - (x - &prev.x) * (tau / sigma);
    let g = p.inequality.values(x);
    KktResidual {
        primal_eq: p.equality.residual(x).norm(),
        primal_ineq: g.map(|v| v.max(0.0)).norm(),
        dual_stat: pvec.norm(),
        compl: complementarity_residual(&next.multipliers.mu, &g, 1.0).norm(),
    }
}

/// One outer iteration.
pub fn outer_step(p: &ConvexProgram, st: &IterateState, params: &SolverParams) -> Result<StepOutcome> {
    let k = st.k;
    let sigma = params.sigma.sigma(k);
    let tau = params.tau.tau(k);
    let spec = SubproblemSpec {
        program: p,
        multipliers: &st.multipliers,
        sigma,
        tau,
        x_anchor: &st.x,
        warm_start: &st.x,
    };

    let mut verdict = None;
    let cert = solve_subproblem(
        &spec,
        |view| {
            let check = evaluate_criterion(
                p,
                st,
                view.x_new,
                view.delta,
                sigma,
                tau,
                params.rho,
                params.criterion,
            );
            if check.accepted {
                verdict = Some((check, AcceptReason::Criterion));
                return true;
            }
            if view.delta.norm() <= exact_floor(params.exact_eps, view.x_new, view.step_size) {
                verdict = Some((check, AcceptReason::ExactFloor));
                return true;
            }
            false
        },
        params.inner_budget,
    )?;
    let (check, reason) = verdict.expect("accepted certificate without verdict");

    let multipliers = multiplier_update(p, &st.multipliers, &cert.x_new, sigma)?;
    let w = &st.w - &cert.delta * sigma;
    let state = IterateState {
        x: cert.x_new.clone(),
        multipliers,
        w,
        k: k + 1,
        last_delta: cert.delta.clone(),
        last_sigma: sigma,
        last_tau: tau,
    };
    let kkt = kkt_residual(p, st, &state, &cert);
    Ok(StepOutcome {
        state,
        certificate: cert,
        kkt,
        check,
        reason,
        sigma,
        tau,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Solved,
    MaxIterations,
    InnerFailure,
}

/// Everything an observer gets to see after an accepted outer step.
#[derive(Debug)]
pub struct StepEvent<'a> {
    pub prev: &'a IterateState,
    pub outcome: &'a StepOutcome,
    pub ergodic: &'a ErgodicState,
    pub record: &'a TraceRecord,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: IterateState,
    pub trace: Vec<TraceRecord>,
    pub status: Status,
    pub ergodic: ErgodicState,
    /// Set when the run stopped on an inner failure.
    pub failure: Option<String>,
}

pub fn run(p: &ConvexProgram, x0: &Vector, params: &SolverParams) -> Result<RunOutput> {
    run_with(p, x0, params, None, |_| {})
}

/// Runs the method, calling `observer` after every accepted step. When
/// `rate` is given the trace also carries the rate factors.
pub fn run_with<F>(
    p: &ConvexProgram,
    x0: &Vector,
    params: &SolverParams,
    rate: Option<&RateConfig>,
    mut observer: F,
) -> Result<RunOutput>
where
    F: FnMut(&StepEvent<'_>),
{
    params.validate()?;
    let mut state = IterateState::initial(p, x0)?;
    let mut ergodic = ErgodicState::new(x0, &state.multipliers.stacked());
    let mut trace = Vec::new();
    let mut sigma_delta_sum = 0.0;
    let b_norm = p.equality.b.norm();

    let mut status = Status::MaxIterations;
    let mut failure = None;
    for _ in 0..params.max_outer {
        let outcome = match outer_step(p, &state, params) {
            Ok(o) => o,
            Err(e @ (Error::InnerBudgetExhausted { .. } | Error::BacktrackingFailed { .. })) => {
                status = Status::InnerFailure;
                failure = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let new = &outcome.state;
        let y_new = new.multipliers.stacked();
        ergodic = ergodic_update(ergodic, &new.x, &y_new, outcome.sigma);
        let bound = feas_bound_check(p, &ergodic, &y_new)?;
        let sd_norm = outcome.certificate.delta.norm() * outcome.sigma;
        sigma_delta_sum += sd_norm;
        let xhat = ergodic.average().expect("ergodic average after update");
        let rf = rate.map(|rc| gamma_mu(rc, outcome.sigma, outcome.tau, params.tau.nu(state.k), params.rho));

        let record = TraceRecord {
            k: state.k,
            sigma_k: outcome.sigma,
            tau_k: outcome.tau,
            inner_iters: outcome.certificate.inner_iters,
            crit_lhs: outcome.check.lhs,
            crit_rhs: outcome.check.rhs,
            floor_accept: outcome.reason == AcceptReason::ExactFloor,
            primal_eq: outcome.kkt.primal_eq,
            primal_ineq: outcome.kkt.primal_ineq,
            dual_stat: outcome.kkt.dual_stat,
            compl: outcome.kkt.compl,
            feas_ergodic: bound.feas,
            xi: xi_bound(&ergodic),
            exact_bound: bound.exact_bound,
            sigma_delta_norm: sd_norm,
            sigma_delta_sum,
            objective: p.objective(&new.x)?,
            objective_ergodic: p.objective(&xhat)?,
            gamma: rf.map(|r| r.gamma),
            rate_mu: rf.map(|r| r.mu),
        };
        observer(&StepEvent {
            prev: &state,
            outcome: &outcome,
            ergodic: &ergodic,
            record: &record,
        });
        trace.push(record);

        let done = params.tol_kkt > 0.0
            && outcome.kkt.scaled_max(b_norm, outcome.state.multipliers.mu.norm()) <= params.tol_kkt;
        state = outcome.state;
        if done {
            status = Status::Solved;
            break;
        }
    }

    Ok(RunOutput {
        state,
        trace,
        status,
        ergodic,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn eq_qp() -> ConvexProgram {
        ConvexProgram::unconstrained(Arc::new(Quadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap()))
            .with_equality(LinearEquality::new(dmatrix![1.0, 1.0], dvector![2.0]).unwrap())
            .unwrap()
    }

    fn params() -> SolverParams {
        SolverParams {
            rho: 0.5,
            sigma: SigmaSchedule::Constant(1.0),
            tau: TauSchedule::Constant(1.0),
            ..SolverParams::default()
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(SigmaSchedule::Linear(1.0).sigma(0), 1.0);
        assert_eq!(SigmaSchedule::Linear(1.0).sigma(9), 10.0);
        let g = SigmaSchedule::Geometric {
            sigma0: 2.0,
            factor: 2.0,
            cap: 100.0,
        };
        assert_eq!(g.sigma(3), 16.0);
        assert_eq!(g.sigma(10), 100.0);
        assert_eq!(g.cap_index(), Some(6));

        let t = TauSchedule::Growing {
            tau0: 1.0,
            nu: vec![1.0, 0.5],
        };
        assert_eq!(t.tau(0), 1.0);
        assert_eq!(t.tau(1), 2.0);
        assert_eq!(t.tau(5), 3.0);
        assert_eq!(t.tau_max(), 3.0);
        assert_eq!(t.nu(7), 0.0);
        for k in 0..5 {
            assert!(t.tau(k + 1) <= (1.0 + t.nu(k)) * t.tau(k) * (1.0 + 1e-15));
        }
    }

    #[test]
    fn params_validation() {
        let mut p = params();
        p.rho = 1.0;
        assert!(p.validate().is_err());
        let mut p = params();
        p.sigma = SigmaSchedule::Constant(0.0);
        assert!(p.validate().is_err());
        let mut p = params();
        p.tau = TauSchedule::Growing {
            tau0: 1.0,
            nu: vec![-0.1],
        };
        assert!(p.validate().is_err());
        let mut p = params();
        p.sigma = SigmaSchedule::Geometric {
            sigma0: 1.0,
            factor: 1.0,
            cap: 10.0,
        };
        assert!(p.validate().is_err());
        assert!(run(&eq_qp(), &dvector![0.0, 0.0], &SolverParams { rho: -0.1, ..params() }).is_err());
    }

    #[test]
    fn criterion_examples() {
        let z = Vector::zeros(2);
        let x = dvector![1.0, 0.0];
        let c = check_criterion_standard(&x, &x, &z, &z, 1.0, 1.0, 0.5, &dvector![1.0], &Vector::zeros(0));
        assert!(c.accepted);
        assert_eq!(c.lhs, 0.0);

        let d = dvector![0.1, 0.0];
        let c = check_criterion_standard(&x, &x, &z, &d, 1.0, 1.0, 0.0, &dvector![1.0], &Vector::zeros(0));
        assert!(!c.accepted);

        // w = x_new, ‖Δ‖² = 1, inner sum 4, ρ = ½ → 1 <= 2
        let d = dvector![0.6, 0.8];
        let c = check_criterion_standard(
            &x,
            &x,
            &x,
            &d,
            1.0,
            1.0,
            0.5,
            &dvector![2.0],
            &Vector::zeros(0),
        );
        assert!((c.lhs - 1.0).abs() < 1e-15);
        assert_eq!(c.rhs, 2.0);
        assert!(c.accepted);

        // ‖σΔ‖ = 0.3 so quadratic part 0.09 < 0.3 = lhs > rhs 0.2
        let d = dvector![0.3, 0.0];
        let rhs_resid = dvector![(0.4f64).sqrt()];
        let c = check_criterion_strengthened(&x, &x, &x, &d, 1.0, 1.0, 0.5, &rhs_resid, &Vector::zeros(0));
        assert!((c.lhs - 0.3).abs() < 1e-15);
        assert!((c.rhs - 0.2).abs() < 1e-15);
        assert!(!c.accepted);
    }

    #[test]
    fn one_dimensional_equality_qp_step() {
        // min ½x² s.t. x = 1
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::new(dmatrix![1.0], dvector![0.0]).unwrap()))
            .with_equality(LinearEquality::new(dmatrix![1.0], dvector![1.0]).unwrap())
            .unwrap();
        let st = IterateState::initial(&p, &dvector![0.0]).unwrap();
        let out = outer_step(&p, &st, &params()).unwrap();
        let x1 = out.state.x[0];
        assert_eq!(out.state.multipliers.lambda[0], 0.0 + 1.0 * (x1 - 1.0));
        assert_eq!(out.state.w, &st.w - &out.certificate.delta * 1.0);
        assert_eq!(out.state.k, 1);
        let again = evaluate_criterion(
            &p,
            &st,
            &out.state.x,
            &out.certificate.delta,
            1.0,
            1.0,
            0.5,
            CriterionKind::Standard,
        );
        assert_eq!(again, out.check);
    }

    #[test]
    fn saddle_point_is_fixed() {
        let p = eq_qp();
        let st = IterateState {
            x: dvector![1.0, 1.0],
            multipliers: Multipliers::new(dvector![-1.0], Vector::zeros(0)).unwrap(),
            w: dvector![1.0, 1.0],
            k: 0,
            last_delta: Vector::zeros(2),
            last_sigma: 1.0,
            last_tau: 1.0,
        };
        let out = outer_step(&p, &st, &params()).unwrap();
        assert!((&out.state.x - &st.x).norm() <= 1e-15);
        assert!((out.state.multipliers.lambda[0] + 1.0).abs() <= 1e-15);
        assert_eq!(out.state.k, 1);
        assert!(out.kkt.max() <= 1e-14);
    }

    #[test]
    fn w_telescopes() {
        let p = eq_qp();
        let mut st = IterateState::initial(&p, &dvector![3.0, -2.0]).unwrap();
        let w0 = st.w.clone();
        let mut acc = Vector::zeros(2);
        let prm = SolverParams {
            sigma: SigmaSchedule::Linear(1.0),
            ..params()
        };
        for _ in 0..15 {
            let out = outer_step(&p, &st, &prm).unwrap();
            acc += &out.certificate.delta * out.sigma;
            st = out.state;
        }
        assert!((&st.w - (&w0 - &acc)).norm() <= 1e-12 * (1.0 + w0.norm()));
    }

    #[test]
    fn unconstrained_proximal_point() {
        let z = dvector![1.0, -2.0, 0.5];
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)));
        // σ = τ = 1: the exact step is x⁺ = (z + x)/2, so the error at best
        // halves each iteration
        let mut prev_err = z.norm();
        let out = run_with(&p, &Vector::zeros(3), &params(), None, |ev| {
            let err = (&ev.outcome.state.x - &z).norm();
            assert!(err <= prev_err * (1.0 + 1e-12), "{err} > {prev_err}");
            prev_err = err;
        })
        .unwrap();
        assert_eq!(out.status, Status::Solved);
        assert!(out.trace.len() <= 35, "{} iterations", out.trace.len());
        assert!((&out.state.x - &z).norm() <= 1e-7);
    }

    #[test]
    fn equality_qp_solution() {
        let out = run(&eq_qp(), &dvector![0.0, 0.0], &params()).unwrap();
        assert_eq!(out.status, Status::Solved);
        assert!((&out.state.x - dvector![1.0, 1.0]).norm() <= 1e-6);
        assert!((out.state.multipliers.lambda[0] + 1.0).abs() <= 1e-6);
    }

    #[test]
    fn halfspace_projection() {
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&dvector![2.0, 0.0])))
            .with_inequality(Arc::new(
                AffineInequalities::new(dmatrix![1.0, 0.0], dvector![1.0]).unwrap(),
            ))
            .unwrap();
        let out = run(&p, &dvector![0.0, 0.0], &params()).unwrap();
        assert_eq!(out.status, Status::Solved);
        assert!((&out.state.x - dvector![1.0, 0.0]).norm() <= 1e-6);
        assert!((out.state.multipliers.mu[0] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn u_identity_and_dual_stat_decay() {
        let p = eq_qp();
        let mut dual = Vec::new();
        let out = run_with(&p, &dvector![5.0, -1.0], &params(), None, |ev| {
            let y0 = ev.prev.multipliers.stacked();
            let y1 = ev.outcome.state.multipliers.stacked();
            let sigma = ev.outcome.sigma;
            // σ u = y^k - y^{k+1} with u = (b - Ax^{k+1}; ...)
            let u = -p.equality.residual(&ev.outcome.state.x);
            let diff = (&u * sigma) - (&y0 - &y1);
            assert!(diff.norm() <= 4.0 * f64::EPSILON * (1.0 + y1.norm()));
            dual.push(ev.outcome.kkt.dual_stat);
        })
        .unwrap();
        assert_eq!(out.status, Status::Solved);
        assert!(dual.last().unwrap() < &(dual[0] * 1e-4));
    }

    #[test]
    fn inner_failure_is_a_status() {
        let p = eq_qp();
        let prm = SolverParams {
            inner_budget: 1,
            rho: 0.0,
            exact_eps: 0.0,
            ..params()
        };
        let out = run(&p, &dvector![4.0, 0.0], &prm).unwrap();
        assert_eq!(out.status, Status::InnerFailure);
        assert!(out.failure.is_some());
    }
}
