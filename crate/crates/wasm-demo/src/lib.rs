//! Browser bindings for the ripalm demo page.
//!
//! Each operation has a plain Rust function returning a JSON string, so it
//! can be tested natively, plus a thin `#[wasm_bindgen]` wrapper.

use ripalm::corpus;
use ripalm::diagnostics::{gamma_mu, RateConfig};
use ripalm::problem_file::ProblemFile;
use ripalm::solver::{run_with, CriterionKind, SigmaSchedule, SolverParams, TauSchedule};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathParams {
    pub rho: f64,
    pub sigma: f64,
    pub tau: f64,
    pub strengthened: bool,
    pub max_outer: usize,
}

impl Default for PathParams {
    fn default() -> Self {
        Self {
            rho: 0.5,
            sigma: 10.0,
            tau: 1.0,
            strengthened: false,
            max_outer: 200,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PathReport {
    pub status: String,
    pub xs: Vec<[f64; 2]>,
    pub ergodic: Vec<[f64; 2]>,
    pub kkt: Vec<f64>,
    pub inner_iters: Vec<usize>,
    pub oracle: Option<[f64; 2]>,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Solves a two-dimensional problem file and returns the iterate path, the
/// ergodic path and the KKT history.
pub fn run_path_json(problem: &str, params: &str) -> Result<String, String> {
    let file = ProblemFile::from_json(problem).map_err(err)?;
    if file.n != 2 {
        return Err(format!("the path view needs n = 2, got n = {}", file.n));
    }
    let pp: PathParams = if params.trim().is_empty() {
        PathParams::default()
    } else {
        serde_json::from_str(params).map_err(err)?
    };
    let program = file.program().map_err(err)?;
    let x0 = file.x0().map_err(err)?;
    let sp = SolverParams {
        rho: pp.rho,
        sigma: SigmaSchedule::Constant(pp.sigma),
        tau: TauSchedule::Constant(pp.tau),
        criterion: if pp.strengthened {
            CriterionKind::Strengthened
        } else {
            CriterionKind::Standard
        },
        max_outer: pp.max_outer,
        ..SolverParams::default()
    };
    let mut xs = vec![[x0[0], x0[1]]];
    let mut ergodic = Vec::new();
    let out = run_with(&program, &x0, &sp, None, |ev| {
        let x = &ev.outcome.state.x;
        xs.push([x[0], x[1]]);
        if let Some(a) = ev.ergodic.average() {
            ergodic.push([a[0], a[1]]);
        }
    })
    .map_err(err)?;
    let oracle = match file.oracle() {
        Some(Ok(o)) => Some([o.x_star[0], o.x_star[1]]),
        _ => None,
    };
    let report = PathReport {
        status: format!("{:?}", out.status),
        xs,
        ergodic,
        kkt: out.trace.iter().map(|r| r.dual_stat.max(r.primal_eq).max(r.primal_ineq)).collect(),
        inner_iters: out.trace.iter().map(|r| r.inner_iters).collect(),
        oracle,
    };
    serde_json::to_string(&report).map_err(err)
}

#[derive(Debug, Serialize)]
pub struct ScheduleSeries {
    pub label: String,
    pub feas: Vec<f64>,
}

/// Runs the built-in infeasible-start equality QP under constant, linear
/// and geometric σ and returns `feas(x̂^k)` for each, `iterations` long.
pub fn compare_schedules_json(iterations: usize, sigma0: f64, factor: f64) -> Result<String, String> {
    if iterations == 0 || iterations > 5000 {
        return Err("iterations must be in 1..=5000".into());
    }
    let c = corpus::rate_equality_qp().map_err(err)?;
    let schedules = [
        (format!("constant {sigma0}"), SigmaSchedule::Constant(sigma0)),
        (format!("linear {sigma0}(k+1)"), SigmaSchedule::Linear(sigma0)),
        (
            format!("geometric {sigma0}*{factor}^k"),
            SigmaSchedule::Geometric {
                sigma0,
                factor,
                cap: 1e8,
            },
        ),
    ];
    let mut series = Vec::new();
    for (label, sigma) in schedules {
        let sp = SolverParams {
            sigma,
            tol_kkt: 0.0,
            max_outer: iterations,
            ..SolverParams::default()
        };
        let out = run_with(&c.program, &c.x0, &sp, None, |_| {}).map_err(err)?;
        series.push(ScheduleSeries {
            label,
            feas: out.trace.iter().map(|r| r.feas_ergodic).collect(),
        });
    }
    serde_json::to_string(&series).map_err(err)
}

#[derive(Debug, Serialize)]
pub struct RateReport {
    pub gamma: f64,
    pub mu: Option<f64>,
    pub condition_met: bool,
    pub sigma_threshold: Option<f64>,
    /// `(σ, μ)` over a log grid, for the curve on the page.
    pub curve: Vec<[f64; 2]>,
}

/// Evaluates the linear-rate factor at one parameter choice and along a
/// σ sweep.
pub fn rate_factor_json(kappa: f64, sigma: f64, tau: f64, rho: f64, nu: f64) -> Result<String, String> {
    let rc = RateConfig::new(kappa, 2.0).map_err(err)?;
    if !(sigma > 0.0 && tau > 0.0 && (0.0..1.0).contains(&rho) && nu >= 0.0) {
        return Err("need sigma > 0, tau > 0, 0 <= rho < 1, nu >= 0".into());
    }
    let f = gamma_mu(&rc, sigma, tau, nu, rho);
    let finite = |m: f64| m.is_finite().then_some(m);
    let curve = (0..=80)
        .filter_map(|i| {
            let s = 10f64.powf(-2.0 + 6.0 * i as f64 / 80.0);
            let g = gamma_mu(&rc, s, tau, nu, rho);
            (g.condition_met && g.mu.is_finite()).then_some([s, g.mu])
        })
        .collect();
    let report = RateReport {
        gamma: f.gamma,
        mu: finite(f.mu),
        condition_met: f.condition_met,
        sigma_threshold: rc.sigma_threshold(rho, tau, tau),
        curve,
    };
    serde_json::to_string(&report).map_err(err)
}

#[wasm_bindgen]
pub fn run_path(problem: &str, params: &str) -> Result<String, JsValue> {
    run_path_json(problem, params).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare_schedules(iterations: usize, sigma0: f64, factor: f64) -> Result<String, JsValue> {
    compare_schedules_json(iterations, sigma0, factor).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn rate_factor(kappa: f64, sigma: f64, tau: f64, rho: f64, nu: f64) -> Result<String, JsValue> {
    rate_factor_json(kappa, sigma, tau, rho, nu).map_err(|e| JsValue::from_str(&e))
}
