//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};

use crate::diagnostics::{slope_fit, write_trace_csv, xi_bound, RateConfig};
use crate::error::Result;
use crate::problem_file::ProblemFile;
use crate::solver::{run_with, CriterionKind, RunOutput, SigmaSchedule, SolverParams, Status, TauSchedule, DEFAULT_SIGMA_CAP};

/// Slack constant used for the σ threshold when `--kappa` is given.
const RATE_SLACK: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CriterionArg {
    Standard,
    Strengthened,
}

/// `const:<v> | linear:<v0> | geom:<v0>,<c>[,<cap>]`
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaArg(pub SigmaSchedule);

impl FromStr for SigmaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("expected <kind>:<values>, got '{s}'"))?;
        let nums = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad number '{v}': {e}")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let sched = match (kind, nums.as_slice()) {
            ("const", [v]) => SigmaSchedule::Constant(*v),
            ("linear", [v0]) => SigmaSchedule::Linear(*v0),
            ("geom", [v0, c]) => SigmaSchedule::Geometric {
                sigma0: *v0,
                factor: *c,
                cap: DEFAULT_SIGMA_CAP,
            },
            ("geom", [v0, c, cap]) => SigmaSchedule::Geometric {
                sigma0: *v0,
                factor: *c,
                cap: *cap,
            },
            _ => return Err(format!("unrecognised sigma schedule '{s}'")),
        };
        Ok(SigmaArg(sched))
    }
}

#[derive(Debug, Clone, Parser)]
#[command(name = "ripalm", version, about = "Relative-type inexact proximal ALM solver")]
pub struct RunConfig {
    /// Problem file (JSON)
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    /// const:<v> | linear:<v0> | geom:<v0>,<c>[,<cap>]
    #[arg(long, default_value = "const:10")]
    pub sigma: SigmaArg,
    #[arg(long, default_value_t = 1.0)]
    pub tau: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_outer: usize,
    #[arg(long, default_value_t = 20_000)]
    pub inner_budget: usize,
    #[arg(long, value_enum, default_value_t = CriterionArg::Standard)]
    pub criterion: CriterionArg,
    /// Write the per-iteration trace here as CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Error-bound modulus; enables the γ/μ rate columns
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Compare against the reference oracle when the problem structure allows
    #[arg(long)]
    pub oracle: bool,
}

impl RunConfig {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            rho: self.rho,
            sigma: self.sigma.0.clone(),
            tau: TauSchedule::Constant(self.tau),
            criterion: match self.criterion {
                CriterionArg::Standard => CriterionKind::Standard,
                CriterionArg::Strengthened => CriterionKind::Strengthened,
            },
            tol_kkt: self.tol,
            max_outer: self.max_outer,
            inner_budget: self.inner_budget,
            ..SolverParams::default()
        }
    }
}

pub fn exit_code(status: Status) -> i32 {
    match status {
        Status::Solved => 0,
        Status::MaxIterations => 2,
        Status::InnerFailure => 3,
    }
}

fn regime_label(s: &SigmaSchedule) -> &'static str {
    match s {
        SigmaSchedule::Constant(_) => "constant sigma, expected slope -1",
        SigmaSchedule::Linear(_) => "linear sigma, expected slope -2",
        SigmaSchedule::Geometric { .. } => "geometric sigma, expected geometric decay",
    }
}

/// Loads, solves and reports. Returns the run and the summary text.
pub fn execute(cfg: &RunConfig) -> Result<(RunOutput, String)> {
    let file = ProblemFile::load(&cfg.problem)?;
    let program = file.program()?;
    let x0 = file.x0()?;
    let params = cfg.params();
    let rate = cfg.kappa.map(|k| RateConfig::new(k, RATE_SLACK)).transpose()?;
    let out = run_with(&program, &x0, &params, rate.as_ref(), |_| {})?;

    if let Some(path) = &cfg.trace {
        let mut w = BufWriter::new(File::create(path)?);
        write_trace_csv(&mut w, &out.trace)?;
        w.flush()?;
    }

    let mut s = String::new();
    let st = &out.state;
    let _ = writeln!(s, "status: {:?}", out.status);
    if let Some(f) = &out.failure {
        let _ = writeln!(s, "failure: {f}");
    }
    let _ = writeln!(s, "iterations: {}", out.trace.len());
    if let Some(last) = out.trace.last() {
        let _ = writeln!(
            s,
            "kkt: primal_eq {:.3e}  primal_ineq {:.3e}  dual_stat {:.3e}  compl {:.3e}",
            last.primal_eq, last.primal_ineq, last.dual_stat, last.compl
        );
        let _ = writeln!(s, "objective: {:.12e}", last.objective);
        let _ = writeln!(s, "feas(x_hat): {:.3e}", last.feas_ergodic);
        let _ = writeln!(s, "xi: {:.3e}", xi_bound(&out.ergodic));
    }
    let (ks, vals): (Vec<f64>, Vec<f64>) = out
        .trace
        .iter()
        .filter(|r| r.feas_ergodic > 0.0)
        .map(|r| ((r.k + 1) as f64, r.feas_ergodic))
        .unzip();
    match slope_fit(&ks, &vals) {
        Ok(slope) => {
            let _ = writeln!(s, "observed slope of feas(x_hat): {slope:.3} ({})", regime_label(&params.sigma));
        }
        Err(_) => {
            let _ = writeln!(s, "observed slope: n/a (fewer than 10 usable iterations)");
        }
    }
    if let Some(rc) = &rate {
        let tau = params.tau.tau0();
        match rc.sigma_threshold(params.rho, tau, params.tau.tau_max()) {
            Some(t) => {
                let _ = writeln!(s, "rate condition: sigma >= {t:.3e} needed (kappa {})", rc.kappa);
            }
            None => {
                let _ = writeln!(s, "rate condition: not met (sqrt(tau) - 2 sqrt(rho) <= 0)");
            }
        }
        if let Some(m) = out.trace.last().and_then(|r| r.rate_mu) {
            let _ = writeln!(s, "rate factor mu: {m:.6}");
        }
    }
    if cfg.oracle {
        match file.oracle() {
            None => {
                let _ = writeln!(s, "oracle: not available for this problem structure");
            }
            Some(Err(e)) => {
                let _ = writeln!(s, "oracle: failed ({e})");
            }
            Some(Ok(o)) => {
                let dx = (&st.x - &o.x_star).norm();
                let _ = writeln!(s, "oracle: |x - x*| {dx:.3e}");
                let _ = writeln!(s, "oracle: relative |x - x*| / (1 + |x*|) {:.3e}", dx / (1.0 + o.x_star.norm()));
                if let Some(xhat) = out.ergodic.average() {
                    let gap = program.objective(&xhat)? - o.obj_star;
                    let _ = writeln!(s, "oracle: f(x_hat) - f* {gap:.3e}");
                }
            }
        }
    }
    Ok((out, s))
}

/// Runs the CLI on `args` (including the program name), writing the summary
/// to `out` and errors to `err`. Returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match execute(&cfg) {
        Ok((run, summary)) => {
            let _ = out.write_all(summary.as_bytes());
            exit_code(run.status)
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}
