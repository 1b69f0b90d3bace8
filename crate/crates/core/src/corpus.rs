//! Small test problems with reference solutions. Shared by the test suites,
//! the CLI examples and the browser demo.

use std::sync::Arc;

use crate::error::Result;
use crate::oracles::{
    project_ball, project_box, project_halfspace, solve_equality_qp, solve_l1_equality_qp, solve_qp_bruteforce,
    OracleSolution,
};
use crate::problem::{
    AffineInequalities, ConvexProgram, L1Norm, LeastSquares, LinearEquality, Matrix, NonnegIndicator, Quadratic,
    QuadraticInequalities, QuadraticRow, StackedInequalities, Vector,
};

#[derive(Debug, Clone)]
pub struct CorpusProblem {
    pub name: &'static str,
    pub program: ConvexProgram,
    pub x0: Vector,
    pub oracle: OracleSolution,
}

/// Deterministic values in `[-1, 1)`; keeps the corpus free of RNG state.
fn filler(seed: u64, i: usize) -> f64 {
    let t = (seed as f64) * 7.31 + (i as f64) * 1.618_033_988_75;
    let v = (t.sin() * 43_758.545_3).fract();
    2.0 * v.abs() - 1.0
}

fn filler_matrix(seed: u64, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |i, j| filler(seed, i * c + j))
}

fn filler_vector(seed: u64, n: usize) -> Vector {
    Vector::from_fn(n, |i, _| filler(seed, i))
}

/// `BᵀB / n + shift·I`, positive definite.
fn spd(seed: u64, n: usize, shift: f64) -> Matrix {
    let b = filler_matrix(seed, n, n);
    b.tr_mul(&b) / n as f64 + Matrix::identity(n, n) * shift
}

/// `Quadratic::distance_to(z)` omits the constant `½‖z‖²` that the
/// projection oracles include.
fn drop_constant(o: OracleSolution, z: &Vector) -> OracleSolution {
    OracleSolution {
        obj_star: o.obj_star - 0.5 * z.norm_squared(),
        ..o
    }
}

fn quadratic(q: Matrix, c: Vector) -> Arc<Quadratic> {
    Arc::new(Quadratic::new(q, c).expect("square Q"))
}

/// `min ½‖x‖²  s.t.  x₁ + x₂ = 2`.
pub fn equality_qp_small() -> Result<CorpusProblem> {
    let (q, c) = (Matrix::identity(2, 2), Vector::zeros(2));
    let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let b = Vector::from_element(1, 2.0);
    let oracle = solve_equality_qp(&q, &c, &a, &b)?;
    Ok(CorpusProblem {
        name: "equality_qp_small",
        program: ConvexProgram::unconstrained(quadratic(q, c)).with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(2),
        oracle,
    })
}

/// Dense strongly convex QP in 8 variables with 3 equalities.
pub fn equality_qp_dense() -> Result<CorpusProblem> {
    let n = 8;
    let q = spd(11, n, 1.0);
    let c = filler_vector(12, n);
    let a = filler_matrix(13, 3, n);
    let b = filler_vector(14, 3);
    let oracle = solve_equality_qp(&q, &c, &a, &b)?;
    Ok(CorpusProblem {
        name: "equality_qp_dense",
        program: ConvexProgram::unconstrained(quadratic(q, c)).with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Projection of `(2, 0)` onto `{x₁ <= 1}`.
pub fn halfspace_projection() -> Result<CorpusProblem> {
    let z = Vector::from_vec(vec![2.0, 0.0]);
    let normal = Vector::from_vec(vec![1.0, 0.0]);
    let oracle = drop_constant(project_halfspace(&z, &normal, 1.0)?, &z);
    let g = AffineInequalities::new(Matrix::from_row_slice(1, 2, &[1.0, 0.0]), Vector::from_element(1, 1.0))?;
    Ok(CorpusProblem {
        name: "halfspace_projection",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z))).with_inequality(Arc::new(g))?,
        x0: Vector::zeros(2),
        oracle,
    })
}

/// Strongly convex QP in 5 variables, one equality and four affine
/// inequalities, some active at the solution.
pub fn inequality_qp_mixed() -> Result<CorpusProblem> {
    let n = 5;
    let q = spd(21, n, 0.5);
    let c = filler_vector(22, n) * 3.0;
    let a = filler_matrix(23, 1, n);
    let b = Vector::from_element(1, 0.3);
    let g = filler_matrix(24, 4, n);
    let h = filler_vector(25, 4).map(|v| 0.2 * v.abs());
    let oracle = solve_qp_bruteforce(&q, &c, &a, &b, &g, &h)?;
    Ok(CorpusProblem {
        name: "inequality_qp_mixed",
        program: ConvexProgram::unconstrained(quadratic(q, c))
            .with_equality(LinearEquality::new(a, b)?)?
            .with_inequality(Arc::new(AffineInequalities::new(g, h)?))?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Projection of `(2, 1)` onto the unit disk centred at `(0.5, 0)`, with the
/// convex quadratic row `‖x - c‖² - 1 <= 0`.
pub fn disk_projection() -> Result<CorpusProblem> {
    let z = Vector::from_vec(vec![2.0, 1.0]);
    let center = Vector::from_vec(vec![0.5, 0.0]);
    let row = QuadraticRow {
        q: Matrix::identity(2, 2) * 2.0,
        lin: &center * -2.0,
        c: center.norm_squared() - 1.0,
    };
    let oracle = drop_constant(project_ball(&z, &center, 1.0)?, &z);
    Ok(CorpusProblem {
        name: "disk_projection",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_inequality(Arc::new(QuadraticInequalities::new(2, vec![row])?))?,
        x0: Vector::zeros(2),
        oracle,
    })
}

/// `min ½‖x - z‖² + 0.4‖x‖₁  s.t.  Ax = b` in 6 variables.
pub fn l1_equality() -> Result<CorpusProblem> {
    let n = 6;
    let z = filler_vector(31, n) * 2.0;
    let a = filler_matrix(32, 2, n);
    let b = filler_vector(33, 2) * 0.5;
    let weight = 0.4;
    let oracle = solve_l1_equality_qp(&Matrix::identity(n, n), &(-&z), weight, &a, &b)?;
    Ok(CorpusProblem {
        name: "l1_equality",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_prox(Arc::new(L1Norm { weight }))
            .with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Box constraints `0 <= x <= 1` written as eight affine rows.
pub fn box_projection() -> Result<CorpusProblem> {
    let n = 4;
    let z = Vector::from_vec(vec![1.7, -0.4, 0.3, 2.2]);
    let mut g = Matrix::zeros(2 * n, n);
    let mut h = Vector::zeros(2 * n);
    for i in 0..n {
        g[(i, i)] = 1.0;
        h[i] = 1.0;
        g[(n + i, i)] = -1.0;
    }
    let oracle = drop_constant(project_box(&z, 0.0, 1.0)?, &z);
    Ok(CorpusProblem {
        name: "box_projection",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_inequality(Arc::new(AffineInequalities::new(g, h)?))?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Least squares over the probability simplex, with `x >= 0` as affine rows.
pub fn simplex_least_squares() -> Result<CorpusProblem> {
    let n = 4;
    let m = filler_matrix(41, 6, n);
    let d = filler_vector(42, 6) * 2.0;
    let q = m.tr_mul(&m);
    let c = -m.tr_mul(&d);
    let a = Matrix::from_element(1, n, 1.0);
    let b = Vector::from_element(1, 1.0);
    let g = -Matrix::identity(n, n);
    let h = Vector::zeros(n);
    let oracle = solve_qp_bruteforce(&q, &c, &a, &b, &g, &h)?;
    let oracle = OracleSolution {
        obj_star: oracle.obj_star + 0.5 * d.norm_squared(),
        ..oracle
    };
    Ok(CorpusProblem {
        name: "simplex_least_squares",
        program: ConvexProgram::unconstrained(Arc::new(LeastSquares::new(m, d)?))
            .with_equality(LinearEquality::new(a, b)?)?
            .with_inequality(Arc::new(AffineInequalities::new(g, h)?))?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Simplex projection with `x >= 0` handled by the proximal term.
pub fn simplex_projection_prox() -> Result<CorpusProblem> {
    let n = 5;
    let z = Vector::from_vec(vec![0.8, -0.3, 0.6, 0.1, -1.0]);
    let a = Matrix::from_element(1, n, 1.0);
    let b = Vector::from_element(1, 1.0);
    let bf = solve_qp_bruteforce(
        &Matrix::identity(n, n),
        &(-&z),
        &a,
        &b,
        &(-Matrix::identity(n, n)),
        &Vector::zeros(n),
    )?;
    // the bound multipliers live in the normal cone of the prox term
    let oracle = OracleSolution {
        x_star: bf.x_star.clone(),
        lambda_star: bf.lambda_star,
        mu_star: Vector::zeros(0),
        obj_star: 0.5 * (&bf.x_star - &z).norm_squared() - 0.5 * z.norm_squared(),
    };
    Ok(CorpusProblem {
        name: "simplex_projection_prox",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_prox(Arc::new(NonnegIndicator))
            .with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Affine and quadratic rows stacked: projection onto a disk cut by a
/// halfspace, with the halfspace active and the disk inactive.
pub fn disk_and_halfspace() -> Result<CorpusProblem> {
    let z = Vector::from_vec(vec![1.0, 1.0]);
    let disk = QuadraticRow {
        q: Matrix::identity(2, 2) * 2.0,
        lin: Vector::zeros(2),
        c: -4.0,
    };
    let aff = AffineInequalities::new(Matrix::from_row_slice(1, 2, &[1.0, 1.0]), Vector::from_element(1, 1.0))?;
    let half = drop_constant(project_halfspace(&z, &Vector::from_vec(vec![1.0, 1.0]), 1.0)?, &z);
    let oracle = OracleSolution {
        mu_star: Vector::from_vec(vec![half.mu_star[0], 0.0]),
        ..half
    };
    let stacked = StackedInequalities::new(
        2,
        vec![Arc::new(aff), Arc::new(QuadraticInequalities::new(2, vec![disk])?)],
    )?;
    Ok(CorpusProblem {
        name: "disk_and_halfspace",
        program: ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z))).with_inequality(Arc::new(stacked))?,
        x0: Vector::from_vec(vec![-1.0, 0.5]),
        oracle,
    })
}

/// Unconstrained strongly convex quadratic.
pub fn unconstrained_quadratic() -> Result<CorpusProblem> {
    let n = 3;
    let q = spd(51, n, 1.0);
    let c = filler_vector(52, n);
    let oracle = solve_equality_qp(&q, &c, &Matrix::zeros(0, n), &Vector::zeros(0))?;
    Ok(CorpusProblem {
        name: "unconstrained_quadratic",
        program: ConvexProgram::unconstrained(quadratic(q, c)),
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Every corpus problem.
pub fn all() -> Result<Vec<CorpusProblem>> {
    Ok(vec![
        equality_qp_small()?,
        equality_qp_dense()?,
        halfspace_projection()?,
        inequality_qp_mixed()?,
        disk_projection()?,
        l1_equality()?,
        box_projection()?,
        simplex_least_squares()?,
        simplex_projection_prox()?,
        disk_and_halfspace()?,
        unconstrained_quadratic()?,
    ])
}

/// Equality QP with an infeasible starting point, for the ergodic rate
/// experiments.
pub fn rate_equality_qp() -> Result<CorpusProblem> {
    let n = 6;
    let q = spd(61, n, 0.5);
    let c = filler_vector(62, n);
    let a = filler_matrix(63, 2, n);
    let b = filler_vector(64, 2) + Vector::from_element(2, 1.0);
    let oracle = solve_equality_qp(&q, &c, &a, &b)?;
    Ok(CorpusProblem {
        name: "rate_equality_qp",
        program: ConvexProgram::unconstrained(quadratic(q, c)).with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(n),
        oracle,
    })
}

/// Badly scaled strongly convex equality QP: a large Hessian makes the
/// multiplier updates slow at moderate σ, so the asymptotic contraction is
/// visible over many iterations.
pub fn contraction_equality_qp() -> Result<CorpusProblem> {
    let n = 4;
    let q = Matrix::from_diagonal(&Vector::from_vec(vec![200.0, 250.0, 300.0, 400.0]));
    let c = filler_vector(71, n) * 10.0;
    let a = filler_matrix(72, 2, n);
    let b = filler_vector(73, 2);
    let oracle = solve_equality_qp(&q, &c, &a, &b)?;
    Ok(CorpusProblem {
        name: "contraction_equality_qp",
        program: ConvexProgram::unconstrained(quadratic(q, c)).with_equality(LinearEquality::new(a, b)?)?,
        x0: Vector::zeros(n),
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::ORACLE_KKT_TOL;

    #[test]
    fn oracles_certify_themselves() {
        let mut probs = all().unwrap();
        probs.push(rate_equality_qp().unwrap());
        probs.push(contraction_equality_qp().unwrap());
        assert!(probs.len() >= 8);
        for p in &probs {
            let v = p.oracle.kkt_violation(&p.program).unwrap();
            assert!(v.max() <= ORACLE_KKT_TOL, "{}: {v:?}", p.name);
            let obj = p.program.objective(&p.oracle.x_star).unwrap();
            assert!(
                (obj - p.oracle.obj_star).abs() <= 1e-10 * (1.0 + obj.abs()),
                "{}: {obj} vs {}",
                p.name,
                p.oracle.obj_star
            );
        }
    }

    #[test]
    fn corpus_has_active_constraints() {
        let p = inequality_qp_mixed().unwrap();
        assert!(p.oracle.mu_star.iter().any(|&m| m > 1e-3), "{:?}", p.oracle.mu_star);
        let p = l1_equality().unwrap();
        assert!(p.oracle.x_star.iter().any(|&v| v == 0.0), "{:?}", p.oracle.x_star);
        let p = simplex_least_squares().unwrap();
        assert!(p.oracle.mu_star.iter().any(|&m| m > 1e-3), "{:?}", p.oracle.mu_star);
    }
}
