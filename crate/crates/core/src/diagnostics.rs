//! Convergence diagnostics: ergodic averaging, the feasibility and
//! objective-gap bounds for the ergodic iterate, the asymptotic rate factor,
//! the primal-dual recursion inequality, summability monitoring, and the
//! CSV trace.
//!
//! All "ok" flags use the same tolerance: relative `1e-9` plus absolute
//! `1e-12`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::problem::{ConvexProgram, Vector};
use crate::solver::IterateState;

pub const REL_TOL: f64 = 1e-9;
pub const ABS_TOL: f64 = 1e-12;

/// `a <= b` up to the diagnostics tolerance.
pub fn leq_tol(a: f64, b: f64) -> bool {
    a <= b + REL_TOL * b.abs() + ABS_TOL
}

/// Running σ-weighted average of the primal iterates plus the running
/// suprema that stand in for the a-priori bounds on `‖x^k‖` and `‖y^k‖`.
#[derive(Debug, Clone)]
pub struct ErgodicState {
    pub weighted_sum_x: Vector,
    pub weight_total: f64,
    pub y0: Vector,
    pub sup_norm_y: f64,
    pub sup_norm_x: f64,
}

impl ErgodicState {
    pub fn new(x0: &Vector, y0: &Vector) -> Self {
        Self {
            weighted_sum_x: Vector::zeros(x0.len()),
            weight_total: 0.0,
            y0: y0.clone(),
            sup_norm_y: y0.norm(),
            sup_norm_x: x0.norm(),
        }
    }

    /// `x̂ = Σ σᵢ x^{i+1} / Σ σᵢ`; `None` before the first update.
    pub fn average(&self) -> Option<Vector> {
        (self.weight_total > 0.0).then(|| &self.weighted_sum_x / self.weight_total)
    }
}

pub fn ergodic_update(mut es: ErgodicState, x_new: &Vector, y_new: &Vector, sigma_k: f64) -> ErgodicState {
    es.weighted_sum_x.axpy(sigma_k, x_new, 1.0);
    es.weight_total += sigma_k;
    es.sup_norm_x = es.sup_norm_x.max(x_new.norm());
    es.sup_norm_y = es.sup_norm_y.max(y_new.norm());
    es
}

/// `Ξ = 2 B_y / Σ σᵢ` with `B_y` the running supremum of `‖y‖`.
pub fn xi_bound(es: &ErgodicState) -> f64 {
    2.0 * es.sup_norm_y / es.weight_total
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasBound {
    /// `feas(x̂)`
    pub feas: f64,
    /// `‖y - y⁰‖ / Σ σᵢ`
    pub exact_bound: f64,
    pub ok: bool,
}

pub fn feas_bound_check(p: &ConvexProgram, es: &ErgodicState, y_now: &Vector) -> Result<FeasBound> {
    let xhat = es
        .average()
        .ok_or_else(|| Error::InvalidParameter("ergodic state has no iterates yet".into()))?;
    let feas = p.feasibility_violation(&xhat)?;
    let exact_bound = (y_now - &es.y0).norm() / es.weight_total;
    Ok(FeasBound {
        feas,
        exact_bound,
        ok: feas <= exact_bound * (1.0 + 1e-10) + 1e-12,
    })
}

/// Quantities entering the initial-error constant
/// `C₀ = τ₀/2 ‖x* - x⁰‖² + ½‖y⁰‖² + (‖x*‖² + B_x²) τ_max Σν`.
#[derive(Debug, Clone)]
pub struct InitialErrorTerms {
    pub tau0: f64,
    pub x0: Vector,
    pub y0: Vector,
    pub nu_sum: f64,
    pub tau_max: f64,
}

impl InitialErrorTerms {
    pub fn c0(&self, x_star: &Vector, b_x: f64) -> f64 {
        0.5 * self.tau0 * (x_star - &self.x0).norm_squared()
            + 0.5 * self.y0.norm_squared()
            + (x_star.norm_squared() + b_x * b_x) * self.tau_max * self.nu_sum
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBounds {
    pub lower: f64,
    pub upper: f64,
}

impl GapBounds {
    pub fn contains(&self, gap: f64) -> bool {
        leq_tol(self.lower, gap) && leq_tol(gap, self.upper)
    }
}

/// Lower and upper bounds on `f(x̂) - f(x*)`.
///
/// `sigma` is the penalty parameter used in the lower bound (any positive
/// value is valid); `sigma_delta_sum` is `Σ ‖σᵢΔ^{i+1}‖` over the averaged
/// iterations.
pub fn objective_gap_bounds(
    es: &ErgodicState,
    x_star: &Vector,
    y_star: &Vector,
    terms: &InitialErrorTerms,
    sigma: f64,
    sigma_delta_sum: f64,
) -> GapBounds {
    let xi = xi_bound(es);
    let lower = -y_star.norm() * xi - 0.5 * sigma * xi * xi;
    let b_x = es.sup_norm_x;
    let spread = (2.0 * (x_star.norm_squared() + b_x * b_x)).sqrt();
    let upper = (terms.c0(x_star, b_x) + spread * sigma_delta_sum) / es.weight_total;
    GapBounds { lower, upper }
}

/// Error-bound modulus and the slack constant of the σ condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConfig {
    pub kappa: f64,
    pub c: f64,
}

impl RateConfig {
    pub fn new(kappa: f64, c: f64) -> Result<Self> {
        if !(kappa > 0.0) || !(c > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "rate config needs kappa > 0 and c > 1 (got {kappa}, {c})"
            )));
        }
        Ok(Self { kappa, c })
    }

    /// Lower bound on `liminf σ_k` for the asymptotic rate to apply.
    /// `None` when `√τ_min - 2√ρ <= 0`.
    pub fn sigma_threshold(&self, rho: f64, tau_min: f64, tau_max: f64) -> Option<f64> {
        let gap = tau_min.sqrt() - 2.0 * rho.sqrt();
        if gap <= 0.0 {
            return None;
        }
        let tbar = tau_max.max(1.0);
        Some(self.c * 2.0 * self.kappa * tau_max.sqrt() * (rho + (rho * tbar).sqrt()) / gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFactor {
    pub gamma: f64,
    /// `√((1+ν)/(1+γ))`; `+∞` when `γ <= -1`.
    pub mu: f64,
    pub condition_met: bool,
}

pub fn gamma_mu(rc: &RateConfig, sigma: f64, tau: f64, nu: f64, rho: f64) -> RateFactor {
    let tbar = tau.max(1.0);
    let sr = rho.sqrt();
    let st = tau.sqrt();
    let shrink = 1.0 - (2.0 * rc.kappa * st * (rho + (rho * tbar).sqrt()) + 2.0 * sigma * sr) / (sigma * st);
    let scale = sigma * sigma / (rc.kappa * rc.kappa * (sr + tbar.sqrt()).powi(2) * tbar);
    let gamma = shrink * scale;
    let mu = if 1.0 + gamma > 0.0 {
        ((1.0 + nu) / (1.0 + gamma)).sqrt()
    } else {
        f64::INFINITY
    };
    RateFactor {
        gamma,
        mu,
        condition_met: gamma > 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// Checks
///
/// ```text
/// ‖y⁺-y*‖² + ‖w⁺-x*‖² + τ‖x⁺-x*‖²
///     <= ‖y-y*‖² + ‖w-x*‖² + τ‖x-x*‖² - (1-ρ)(‖y⁺-y‖² + τ‖x⁺-x‖²)
/// ```
///
/// for one outer step, given a saddle point `(x*, y*)`.
pub fn recursion_check(
    prev: &IterateState,
    next: &IterateState,
    x_star: &Vector,
    y_star: &Vector,
    rho: f64,
    tau_k: f64,
) -> RecursionCheck {
    let y_prev = prev.multipliers.stacked();
    let y_next = next.multipliers.stacked();
    let energy = |y: &Vector, w: &Vector, x: &Vector| {
        (y - y_star).norm_squared() + (w - x_star).norm_squared() + tau_k * (x - x_star).norm_squared()
    };
    let lhs = energy(&y_next, &next.w, &next.x);
    let change = (&y_next - &y_prev).norm_squared() + tau_k * (&next.x - &prev.x).norm_squared();
    let rhs = energy(&y_prev, &prev.w, &prev.x) - (1.0 - rho) * change;
    RecursionCheck {
        lhs,
        rhs,
        ok: lhs <= rhs * (1.0 + REL_TOL) + ABS_TOL,
    }
}

/// `√(τ‖x - x*‖² + ‖y - y*‖²)`.
pub fn weighted_distance(x: &Vector, y: &Vector, x_star: &Vector, y_star: &Vector, tau: f64) -> f64 {
    (tau * (x - x_star).norm_squared() + (y - y_star).norm_squared()).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summability {
    pub partial_sums: Vec<f64>,
    pub cauchy_flag: bool,
}

/// Partial sums of `‖σ_kΔ^{k+1}‖`. The Cauchy flag is set when the
/// increment over the last quarter of iterations is at most
/// `1e-6 · (1 + sum before that quarter)`.
pub fn summability_of(norms: &[f64]) -> Summability {
    let partial_sums: Vec<f64> = norms
        .iter()
        .scan(0.0, |acc, &v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    let n = partial_sums.len();
    let cauchy_flag = if n == 0 {
        true
    } else {
        let head_len = n - n / 4;
        let head = if head_len == 0 { 0.0 } else { partial_sums[head_len - 1] };
        let tail = partial_sums[n - 1] - head;
        tail <= 1e-6 * (1.0 + head)
    };
    Summability {
        partial_sums,
        cauchy_flag,
    }
}

pub fn summability_monitor(trace: &[TraceRecord]) -> Summability {
    let norms: Vec<f64> = trace.iter().map(|r| r.sigma_delta_norm).collect();
    summability_of(&norms)
}

/// Least-squares slope of `log(vals)` against `log(ks)`.
pub fn slope_fit(ks: &[f64], vals: &[f64]) -> Result<f64> {
    if ks.len() != vals.len() {
        return Err(Error::DimensionMismatch {
            what: "slope fit samples",
            expected: ks.len(),
            got: vals.len(),
        });
    }
    if ks.len() < 10 {
        return Err(Error::InvalidParameter(format!(
            "slope fit needs at least 10 points, got {}",
            ks.len()
        )));
    }
    if let Some(&bad) = vals.iter().chain(ks).find(|&&v| !(v > 0.0)) {
        return Err(Error::NonPositiveValue(bad));
    }
    let lx: Vec<f64> = ks.iter().map(|k| k.ln()).collect();
    let ly: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("slope fit needs distinct abscissae".into()));
    }
    Ok(sxy / sxx)
}

/// True when `‖y^k - y^K‖` over the last quarter of the run stays below its
/// maximum over the first quarter.
pub fn dual_tail_shrinks(ys: &[Vector]) -> bool {
    let n = ys.len();
    if n < 4 {
        return true;
    }
    let last = &ys[n - 1];
    let dist: Vec<f64> = ys.iter().map(|y| (y - last).norm()).collect();
    let q = n / 4;
    let first = dist[..q].iter().cloned().fold(0.0, f64::max);
    let tail = dist[n - q..].iter().cloned().fold(0.0, f64::max);
    tail <= first
}

// ---------------------------------------------------------------------------
// trace

/// One row per outer iteration. `k` is the index of the penalty parameter
/// used in the step, so the row describes the move from `x^k` to `x^{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub k: usize,
    pub sigma_k: f64,
    pub tau_k: f64,
    pub inner_iters: usize,
    pub crit_lhs: f64,
    pub crit_rhs: f64,
    /// Step accepted by the floating-point exactness floor rather than the
    /// criterion inequality.
    pub floor_accept: bool,
    pub primal_eq: f64,
    pub primal_ineq: f64,
    pub dual_stat: f64,
    pub compl: f64,
    pub feas_ergodic: f64,
    pub xi: f64,
    pub exact_bound: f64,
    pub sigma_delta_norm: f64,
    pub sigma_delta_sum: f64,
    pub objective: f64,
    pub objective_ergodic: f64,
    pub gamma: Option<f64>,
    pub rate_mu: Option<f64>,
}

pub const TRACE_HEADER: [&str; 20] = [
    "k",
    "sigma_k",
    "tau_k",
    "inner_iters",
    "crit_lhs",
    "crit_rhs",
    "floor_accept",
    "primal_eq",
    "primal_ineq",
    "dual_stat",
    "compl",
    "feas_ergodic",
    "xi",
    "exact_bound",
    "sigma_delta_norm",
    "sigma_delta_sum",
    "objective",
    "objective_ergodic",
    "gamma",
    "rate_mu",
];

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl TraceRecord {
    fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        vec![
            self.k.to_string(),
            fmt_float(self.sigma_k),
            fmt_float(self.tau_k),
            self.inner_iters.to_string(),
            fmt_float(self.crit_lhs),
            fmt_float(self.crit_rhs),
            u8::from(self.floor_accept).to_string(),
            fmt_float(self.primal_eq),
            fmt_float(self.primal_ineq),
            fmt_float(self.dual_stat),
            fmt_float(self.compl),
            fmt_float(self.feas_ergodic),
            fmt_float(self.xi),
            fmt_float(self.exact_bound),
            fmt_float(self.sigma_delta_norm),
            fmt_float(self.sigma_delta_sum),
            fmt_float(self.objective),
            fmt_float(self.objective_ergodic),
            opt(self.gamma),
            opt(self.rate_mu),
        ]
    }
}

pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}
