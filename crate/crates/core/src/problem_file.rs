//! JSON problem files.
//!
//! ```json
//! {
//!   "n": 2,
//!   "objective": { "kind": "quadratic", "q": [[1, 0], [0, 1]], "c": [0, 0] },
//!   "prox": { "kind": "l1", "weight": 0.5 },
//!   "equality": { "a": [[1, 1]], "b": [2] },
//!   "inequalities": [
//!     { "kind": "affine", "g": { "rows": 1, "triplets": [[0, 0, 1.0]] }, "h": [1] },
//!     { "kind": "quadratic", "q": [[2, 0], [0, 2]], "lin": [0, 0], "c": -4 }
//!   ],
//!   "x0": [0, 0]
//! }
//! ```
//!
//! Matrices are either dense row lists or `{rows, triplets}` with
//! zero-based `[row, col, value]` entries; the column count is always `n`.
//! Sparse input is densified.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracles::{solve_l1_equality_qp, solve_qp_bruteforce, OracleSolution, MAX_ENUMERATED_ROWS};
use crate::problem::{
    AffineInequalities, BoxIndicator, ConvexProgram, InequalityBlock, L1Norm, LeastSquares, LinearEquality, Matrix,
    NoInequalities, NonnegIndicator, ProxTerm, Quadratic, QuadraticInequalities, QuadraticRow, SmoothTerm,
    StackedInequalities, Vector, ZeroProx,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense(Vec<Vec<f64>>),
    Sparse { rows: usize, triplets: Vec<(usize, usize, f64)> },
}

impl MatrixSpec {
    fn build(&self, what: &str, cols: usize) -> Result<Matrix> {
        match self {
            MatrixSpec::Dense(rows) => {
                let mut m = Matrix::zeros(rows.len(), cols);
                for (i, r) in rows.iter().enumerate() {
                    if r.len() != cols {
                        return Err(Error::ProblemFile(format!(
                            "{what}: row {i} has {} entries, expected {cols}",
                            r.len()
                        )));
                    }
                    for (j, v) in r.iter().enumerate() {
                        m[(i, j)] = *v;
                    }
                }
                Ok(m)
            }
            MatrixSpec::Sparse { rows, triplets } => {
                let mut m = Matrix::zeros(*rows, cols);
                for (k, &(i, j, v)) in triplets.iter().enumerate() {
                    if i >= *rows || j >= cols {
                        return Err(Error::ProblemFile(format!(
                            "{what}: triplet {k} at ({i}, {j}) outside {rows}x{cols}"
                        )));
                    }
                    m[(i, j)] += v;
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `½xᵀQx + cᵀx`
    Quadratic { q: MatrixSpec, c: Vec<f64> },
    /// `½‖Mx - d‖²`
    LeastSquares { m: MatrixSpec, d: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProxSpec {
    #[default]
    None,
    L1 { weight: f64 },
    Nonneg,
    Box { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqualitySpec {
    pub a: MatrixSpec,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InequalitySpec {
    /// `Gx - h <= 0`
    Affine { g: MatrixSpec, h: Vec<f64> },
    /// `½xᵀQx + linᵀx + c <= 0`
    Quadratic { q: MatrixSpec, lin: Vec<f64>, c: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub prox: ProxSpec,
    #[serde(default)]
    pub equality: Option<EqualitySpec>,
    #[serde(default)]
    pub inequalities: Vec<InequalitySpec>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
}

fn vec_of(what: &str, v: &[f64], len: usize) -> Result<Vector> {
    if v.len() != len {
        return Err(Error::ProblemFile(format!("{what}: expected {len} entries, got {}", v.len())));
    }
    Ok(Vector::from_column_slice(v))
}

// dimension errors from the problem constructors are reported as file errors
fn ctx<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::ProblemFile(format!("{what}: {e}")))
}

/// Objective as `(Q, c, constant)` with `f = ½xᵀQx + cᵀx + constant`.
fn objective_qp(o: &ObjectiveSpec, n: usize) -> Result<(Matrix, Vector, f64)> {
    match o {
        ObjectiveSpec::Quadratic { q, c } => Ok((q.build("objective.q", n)?, vec_of("objective.c", c, n)?, 0.0)),
        ObjectiveSpec::LeastSquares { m, d } => {
            let m = m.build("objective.m", n)?;
            let d = vec_of("objective.d", d, m.nrows())?;
            Ok((m.tr_mul(&m), -m.tr_mul(&d), 0.5 * d.norm_squared()))
        }
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::ProblemFile(format!("line {}, column {}: {e}", e.line(), e.column()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            Error::ProblemFile(m) => Error::ProblemFile(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }

    pub fn program(&self) -> Result<ConvexProgram> {
        let n = self.n;
        if n == 0 {
            return Err(Error::ProblemFile("n must be positive".into()));
        }
        let smooth: Arc<dyn SmoothTerm> = match &self.objective {
            ObjectiveSpec::Quadratic { q, c } => Arc::new(ctx(
                "objective",
                Quadratic::new(q.build("objective.q", n)?, vec_of("objective.c", c, n)?),
            )?),
            ObjectiveSpec::LeastSquares { m, d } => {
                let m = m.build("objective.m", n)?;
                let d = vec_of("objective.d", d, m.nrows())?;
                Arc::new(ctx("objective", LeastSquares::new(m, d))?)
            }
        };
        let prox: Arc<dyn ProxTerm> = match self.prox {
            ProxSpec::None => Arc::new(ZeroProx),
            ProxSpec::L1 { weight } => {
                if !(weight >= 0.0) {
                    return Err(Error::ProblemFile("prox.weight must be nonnegative".into()));
                }
                Arc::new(L1Norm { weight })
            }
            ProxSpec::Nonneg => Arc::new(NonnegIndicator),
            ProxSpec::Box { lo, hi } => Arc::new(ctx("prox", BoxIndicator::new(lo, hi))?),
        };
        let equality = match &self.equality {
            None => LinearEquality::empty(n),
            Some(e) => {
                let a = e.a.build("equality.a", n)?;
                let b = vec_of("equality.b", &e.b, a.nrows())?;
                ctx("equality", LinearEquality::new(a, b))?
            }
        };
        let mut blocks: Vec<Arc<dyn InequalityBlock>> = Vec::new();
        for (k, spec) in self.inequalities.iter().enumerate() {
            let what = format!("inequalities[{k}]");
            match spec {
                InequalitySpec::Affine { g, h } => {
                    let g = g.build(&what, n)?;
                    let h = vec_of(&what, h, g.nrows())?;
                    blocks.push(Arc::new(ctx(&what, AffineInequalities::new(g, h))?));
                }
                InequalitySpec::Quadratic { q, lin, c } => {
                    let row = QuadraticRow {
                        q: q.build(&what, n)?,
                        lin: vec_of(&what, lin, n)?,
                        c: *c,
                    };
                    blocks.push(Arc::new(ctx(&what, QuadraticInequalities::new(n, vec![row]))?));
                }
            }
        }
        let inequality: Arc<dyn InequalityBlock> = match blocks.len() {
            0 => Arc::new(NoInequalities { n }),
            1 => blocks.pop().expect("one block"),
            _ => Arc::new(ctx("inequalities", StackedInequalities::new(n, blocks))?),
        };
        ctx("problem", ConvexProgram::new(smooth, prox, equality, inequality))
    }

    /// Starting point from the file, or the origin.
    pub fn x0(&self) -> Result<Vector> {
        match &self.x0 {
            Some(v) => vec_of("x0", v, self.n),
            None => Ok(Vector::zeros(self.n)),
        }
    }

    /// Reference solution for the structures the oracles cover: quadratic
    /// or least-squares objectives with affine inequalities and no prox
    /// term, or with an ℓ1/nonnegativity/box prox and no inequalities.
    /// `None` when the structure is not covered.
    pub fn oracle(&self) -> Option<Result<OracleSolution>> {
        let n = self.n;
        let build = || -> Result<Option<OracleSolution>> {
            let (q, c, constant) = objective_qp(&self.objective, n)?;
            let (a, b) = match &self.equality {
                None => (Matrix::zeros(0, n), Vector::zeros(0)),
                Some(e) => {
                    let a = e.a.build("equality.a", n)?;
                    let b = vec_of("equality.b", &e.b, a.nrows())?;
                    (a, b)
                }
            };
            let mut gs = Vec::new();
            let mut hs = Vec::new();
            for spec in &self.inequalities {
                match spec {
                    InequalitySpec::Affine { g, h } => {
                        let g = g.build("inequalities", n)?;
                        for i in 0..g.nrows() {
                            gs.push(g.row(i).into_owned());
                        }
                        hs.extend_from_slice(h);
                    }
                    InequalitySpec::Quadratic { .. } => return Ok(None),
                }
            }
            let m2 = gs.len();
            let shift = |o: OracleSolution| OracleSolution {
                obj_star: o.obj_star + constant,
                ..o
            };
            let bounds = |lo: Option<f64>, hi: Option<f64>| -> (Matrix, Vector) {
                let mut rows = Vec::new();
                let mut rhs = Vec::new();
                for i in 0..n {
                    if let Some(hi) = hi {
                        rows.push(Vector::from_fn(n, |j, _| if j == i { 1.0 } else { 0.0 }).transpose());
                        rhs.push(hi);
                    }
                    if let Some(lo) = lo {
                        rows.push(Vector::from_fn(n, |j, _| if j == i { -1.0 } else { 0.0 }).transpose());
                        rhs.push(-lo);
                    }
                }
                (Matrix::from_rows(&rows), Vector::from_vec(rhs))
            };
            let sol = match self.prox {
                ProxSpec::None => {
                    if m2 > MAX_ENUMERATED_ROWS {
                        return Ok(None);
                    }
                    let g = if m2 == 0 { Matrix::zeros(0, n) } else { Matrix::from_rows(&gs) };
                    solve_qp_bruteforce(&q, &c, &a, &b, &g, &Vector::from_vec(hs))?
                }
                ProxSpec::L1 { weight } if m2 == 0 => solve_l1_equality_qp(&q, &c, weight, &a, &b)?,
                ProxSpec::Nonneg | ProxSpec::Box { .. } if m2 == 0 => {
                    let (lo, hi) = match self.prox {
                        ProxSpec::Box { lo, hi } => (Some(lo), Some(hi)),
                        _ => (Some(0.0), None),
                    };
                    let (g, h) = bounds(lo, hi);
                    if g.nrows() > MAX_ENUMERATED_ROWS {
                        return Ok(None);
                    }
                    let s = solve_qp_bruteforce(&q, &c, &a, &b, &g, &h)?;
                    // bound multipliers belong to the prox term's normal cone
                    OracleSolution {
                        mu_star: Vector::zeros(0),
                        ..s
                    }
                }
                _ => return Ok(None),
            };
            Ok(Some(shift(sol)))
        };
        build().transpose()
    }
}
