//! Independent reference solutions for small test problems: dense KKT solves
//! for equality QPs, active-set enumeration for inequality QPs, sign-pattern
//! enumeration for ℓ1 problems, and closed-form projections.
//!
//! These are correctness references, not solvers; every routine is
//! exponential in something.

use nalgebra::SVD;

use crate::error::{check_dim, Error, Result};
use crate::problem::{ConvexProgram, Matrix, Vector};

/// A saddle point `(x*, λ*, μ*)` together with `f(x*)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x_star: Vector,
    pub lambda_star: Vector,
    pub mu_star: Vector,
    pub obj_star: f64,
}

/// Componentwise KKT violation of an [`OracleSolution`] against a program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktViolation {
    /// `dist(-(∇s + Aᵀλ + Jᵀμ), ∂h(x))`
    pub stationarity: f64,
    pub primal: f64,
    /// `max |μᵢ gᵢ(x)|` together with any negative `μᵢ`.
    pub complementarity: f64,
}

impl KktViolation {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity)
    }
}

/// Tolerance every shipped oracle solution is checked against.
pub const ORACLE_KKT_TOL: f64 = 1e-10;

impl OracleSolution {
    /// Stacked `(λ*, μ*)`.
    pub fn y_star(&self) -> Vector {
        let mut y = Vector::zeros(self.lambda_star.len() + self.mu_star.len());
        y.rows_mut(0, self.lambda_star.len()).copy_from(&self.lambda_star);
        y.rows_mut(self.lambda_star.len(), self.mu_star.len()).copy_from(&self.mu_star);
        y
    }

    pub fn kkt_violation(&self, p: &ConvexProgram) -> Result<KktViolation> {
        let x = &self.x_star;
        p.check_point(x)?;
        check_dim("lambda*", p.m_eq(), self.lambda_star.len())?;
        check_dim("mu*", p.m_ineq(), self.mu_star.len())?;
        let mut grad = p.smooth.gradient(x) + p.equality.a.tr_mul(&self.lambda_star);
        if !p.inequality.is_empty() {
            grad += p.inequality.jacobian_transpose_mul(x, &self.mu_star);
        }
        let g = p.inequality.values(x);
        let compl = g
            .iter()
            .zip(self.mu_star.iter())
            .map(|(gi, mi)| (gi * mi).abs().max(-mi))
            .fold(0.0, f64::max);
        let prox_val = p.prox.value(x);
        let primal = p.feasibility_violation(x)?;
        Ok(KktViolation {
            stationarity: p.prox.subdiff_distance(x, &(-grad)),
            primal: if prox_val.is_finite() { primal } else { f64::INFINITY },
            complementarity: compl,
        })
    }

    /// Whether the gradients of the active constraints (all equality rows
    /// plus inequality rows with `gᵢ(x*) ≈ 0`) are linearly independent, in
    /// which case the multipliers are unique for smooth objectives.
    pub fn licq(&self, p: &ConvexProgram) -> bool {
        let x = &self.x_star;
        let g = p.inequality.values(x);
        let jac = if p.inequality.is_empty() {
            Matrix::zeros(0, p.dim())
        } else {
            p.inequality.jacobian(x)
        };
        let mut rows: Vec<Vec<f64>> = (0..p.m_eq())
            .map(|i| p.equality.a.row(i).iter().copied().collect())
            .collect();
        for i in 0..g.len() {
            if g[i].abs() <= 1e-8 * (1.0 + x.norm()) {
                rows.push(jac.row(i).iter().copied().collect());
            }
        }
        full_row_rank(&rows, p.dim())
    }
}

fn full_row_rank(rows: &[Vec<f64>], n: usize) -> bool {
    if rows.is_empty() {
        return true;
    }
    if rows.len() > n {
        return false;
    }
    let m = Matrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let sv = SVD::new(m, false, false).singular_values;
    let smax = sv.max();
    smax > 0.0 && sv.min() > 1e-10 * smax
}

fn quad_obj(q: &Matrix, c: &Vector, x: &Vector) -> f64 {
    0.5 * x.dot(&(q * x)) + c.dot(x)
}

fn check_qp_dims(q: &Matrix, c: &Vector) -> Result<usize> {
    let n = c.len();
    check_dim("Q rows", n, q.nrows())?;
    check_dim("Q cols", n, q.ncols())?;
    Ok(n)
}

/// Solves `[[Q, Aᵀ], [A, 0]] (x, λ) = (-c, b)`.
pub fn solve_equality_qp(q: &Matrix, c: &Vector, a: &Matrix, b: &Vector) -> Result<OracleSolution> {
    let n = check_qp_dims(q, c)?;
    let m = a.nrows();
    check_dim("A cols", n, a.ncols())?;
    check_dim("b", m, b.len())?;

    if n + m == 0 {
        return Ok(OracleSolution {
            x_star: Vector::zeros(0),
            lambda_star: Vector::zeros(0),
            mu_star: Vector::zeros(0),
            obj_star: 0.0,
        });
    }
    let mut k = Matrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(q);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(a);
    let mut rhs = Vector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-c));
    rhs.rows_mut(n, m).copy_from(b);

    // SVD-based singularity test; LU alone happily "solves" near-singular
    // systems
    let scale = k.abs().max().max(1.0);
    let svd = SVD::new(k.clone(), true, true);
    if svd.singular_values.min() <= 1e-12 * scale {
        return Err(Error::SingularKkt);
    }
    let sol = k.lu().solve(&rhs).ok_or(Error::SingularKkt)?;
    let x = sol.rows(0, n).into_owned();
    let lambda = sol.rows(n, m).into_owned();
    Ok(OracleSolution {
        obj_star: quad_obj(q, c, &x),
        x_star: x,
        lambda_star: lambda,
        mu_star: Vector::zeros(0),
    })
}

/// Largest inequality count accepted by [`solve_qp_bruteforce`].
pub const MAX_ENUMERATED_ROWS: usize = 20;

/// `min ½xᵀQx + cᵀx  s.t.  Gx <= h`, by enumerating all active sets.
pub fn solve_inequality_qp_bruteforce(q: &Matrix, c: &Vector, g: &Matrix, h: &Vector) -> Result<OracleSolution> {
    let n = check_qp_dims(q, c)?;
    solve_qp_bruteforce(q, c, &Matrix::zeros(0, n), &Vector::zeros(0), g, h)
}

/// `min ½xᵀQx + cᵀx  s.t.  Ax = b, Gx <= h`, by enumerating all active sets.
/// Q must be positive definite on the relevant subspaces for each active
/// set to have a unique solution; singular active sets are skipped.
pub fn solve_qp_bruteforce(
    q: &Matrix,
    c: &Vector,
    a: &Matrix,
    b: &Vector,
    g: &Matrix,
    h: &Vector,
) -> Result<OracleSolution> {
    let n = check_qp_dims(q, c)?;
    let m1 = a.nrows();
    let m2 = g.nrows();
    check_dim("A cols", n, a.ncols())?;
    check_dim("b", m1, b.len())?;
    check_dim("G cols", n, g.ncols())?;
    check_dim("h", m2, h.len())?;
    if m2 > MAX_ENUMERATED_ROWS {
        return Err(Error::InvalidParameter(format!(
            "active-set enumeration is capped at {MAX_ENUMERATED_ROWS} inequalities, got {m2}"
        )));
    }

    let mut best: Option<OracleSolution> = None;
    for mask in 0u32..(1u32 << m2) {
        let active: Vec<usize> = (0..m2).filter(|i| mask & (1 << i) != 0).collect();
        let mut aa = Matrix::zeros(m1 + active.len(), n);
        let mut bb = Vector::zeros(m1 + active.len());
        aa.rows_mut(0, m1).copy_from(a);
        bb.rows_mut(0, m1).copy_from(b);
        for (r, &i) in active.iter().enumerate() {
            aa.row_mut(m1 + r).copy_from(&g.row(i));
            bb[m1 + r] = h[i];
        }
        let sol = match solve_equality_qp(q, c, &aa, &bb) {
            Ok(s) => s,
            Err(Error::SingularKkt) => continue,
            Err(e) => return Err(e),
        };
        let x = &sol.x_star;
        let slack_tol = 1e-10 * (1.0 + h.amax() + x.norm());
        if (g * x - h).iter().any(|&v| v > slack_tol) {
            continue;
        }
        let mut mu = Vector::zeros(m2);
        for (r, &i) in active.iter().enumerate() {
            mu[i] = sol.lambda_star[m1 + r];
        }
        if mu.iter().any(|&v| v < -1e-10) {
            continue;
        }
        let mu = mu.map(|v| v.max(0.0));
        let cand = OracleSolution {
            x_star: x.clone(),
            lambda_star: sol.lambda_star.rows(0, m1).into_owned(),
            mu_star: mu,
            obj_star: sol.obj_star,
        };
        if best.as_ref().map_or(true, |b| cand.obj_star < b.obj_star) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NoFeasibleCandidate)
}

/// Largest dimension accepted by [`solve_l1_equality_qp`] (3^N patterns).
pub const MAX_SIGN_PATTERN_DIM: usize = 10;

/// `min ½xᵀQx + cᵀx + w‖x‖₁  s.t.  Ax = b` by enumerating sign patterns of
/// `x`. Q must be positive definite.
pub fn solve_l1_equality_qp(q: &Matrix, c: &Vector, weight: f64, a: &Matrix, b: &Vector) -> Result<OracleSolution> {
    let n = check_qp_dims(q, c)?;
    let m = a.nrows();
    check_dim("A cols", n, a.ncols())?;
    check_dim("b", m, b.len())?;
    if n > MAX_SIGN_PATTERN_DIM {
        return Err(Error::InvalidParameter(format!(
            "sign enumeration is capped at dimension {MAX_SIGN_PATTERN_DIM}, got {n}"
        )));
    }
    if weight < 0.0 {
        return Err(Error::InvalidParameter("l1 weight must be nonnegative".into()));
    }

    let total = 3usize.pow(n as u32);
    let mut best: Option<OracleSolution> = None;
    for code in 0..total {
        let mut signs = vec![0i8; n];
        let mut r = code;
        for s in signs.iter_mut() {
            *s = (r % 3) as i8 - 1;
            r /= 3;
        }
        let free: Vec<usize> = (0..n).filter(|&i| signs[i] != 0).collect();
        let nf = free.len();
        let qf = Matrix::from_fn(nf, nf, |i, j| q[(free[i], free[j])]);
        let cf = Vector::from_fn(nf, |i, _| c[free[i]] + weight * signs[free[i]] as f64);
        let af = Matrix::from_fn(m, nf, |i, j| a[(i, free[j])]);
        let sol = match solve_equality_qp(&qf, &cf, &af, b) {
            Ok(s) => s,
            Err(Error::SingularKkt) => continue,
            Err(e) => return Err(e),
        };
        let mut x = Vector::zeros(n);
        for (k, &i) in free.iter().enumerate() {
            x[i] = sol.x_star[k];
        }
        if free.iter().any(|&i| x[i] * signs[i] as f64 <= 0.0) {
            continue;
        }
        // zero coordinates need |(Qx + c + Aᵀλ)_i| <= w
        let grad = q * &x + c + a.tr_mul(&sol.lambda_star);
        let tol = 1e-10 * (1.0 + weight);
        if (0..n).any(|i| signs[i] == 0 && grad[i].abs() > weight + tol) {
            continue;
        }
        if (a * &x - b).amax() > 1e-10 * (1.0 + b.amax()) {
            continue;
        }
        let obj = quad_obj(q, c, &x) + weight * x.lp_norm(1);
        let cand = OracleSolution {
            x_star: x,
            lambda_star: sol.lambda_star,
            mu_star: Vector::zeros(0),
            obj_star: obj,
        };
        if best.as_ref().map_or(true, |b| cand.obj_star < b.obj_star) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NoFeasibleCandidate)
}

/// `(½xᵀQᵢx + qᵢᵀx + cᵢ)ᵢ`.
pub fn convex_qcqp_feasibility_residual(x: &Vector, qs: &[Matrix], lin: &[Vector], cs: &[f64]) -> Result<Vector> {
    check_dim("linear terms", qs.len(), lin.len())?;
    check_dim("constants", qs.len(), cs.len())?;
    let mut out = Vector::zeros(qs.len());
    for i in 0..qs.len() {
        check_dim("Q_i", x.len(), qs[i].nrows())?;
        check_dim("q_i", x.len(), lin[i].len())?;
        out[i] = 0.5 * x.dot(&(&qs[i] * x)) + lin[i].dot(x) + cs[i];
    }
    Ok(out)
}

/// Projection of `z` onto `{x : aᵀx <= β}` as the solution of
/// `min ½‖x - z‖²` with the single affine row `aᵀx - β`.
pub fn project_halfspace(z: &Vector, a: &Vector, beta: f64) -> Result<OracleSolution> {
    check_dim("normal", z.len(), a.len())?;
    let an = a.norm_squared();
    if an == 0.0 {
        return Err(Error::InvalidParameter("halfspace normal must be nonzero".into()));
    }
    let viol = a.dot(z) - beta;
    let mu = viol.max(0.0) / an;
    let x = z - a * mu;
    Ok(OracleSolution {
        obj_star: 0.5 * (&x - z).norm_squared(),
        x_star: x,
        lambda_star: Vector::zeros(0),
        mu_star: Vector::from_element(1, mu),
    })
}

/// Projection of `z` onto the ball `‖x - center‖² <= r²`, with the
/// constraint written as `g(x) = ‖x - center‖² - r²` (gradient `2(x - center)`).
pub fn project_ball(z: &Vector, center: &Vector, radius: f64) -> Result<OracleSolution> {
    check_dim("center", z.len(), center.len())?;
    if !(radius > 0.0) {
        return Err(Error::NonPositiveValue(radius));
    }
    let d = z - center;
    let dn = d.norm();
    let (x, mu) = if dn <= radius {
        (z.clone(), 0.0)
    } else {
        (center + &d * (radius / dn), 0.5 * (dn / radius - 1.0))
    };
    Ok(OracleSolution {
        obj_star: 0.5 * (&x - z).norm_squared(),
        x_star: x,
        lambda_star: Vector::zeros(0),
        mu_star: Vector::from_element(1, mu),
    })
}

/// Projection of `z` onto `[lo, hi]^N` written as the `2N` affine rows
/// `x - hi <= 0` followed by `lo - x <= 0`.
pub fn project_box(z: &Vector, lo: f64, hi: f64) -> Result<OracleSolution> {
    if !(lo <= hi) {
        return Err(Error::InvalidParameter(format!("empty box [{lo}, {hi}]")));
    }
    let n = z.len();
    let x = z.map(|v| v.clamp(lo, hi));
    let mut mu = Vector::zeros(2 * n);
    for i in 0..n {
        mu[i] = (z[i] - hi).max(0.0);
        mu[n + i] = (lo - z[i]).max(0.0);
    }
    Ok(OracleSolution {
        obj_star: 0.5 * (&x - z).norm_squared(),
        x_star: x,
        lambda_star: Vector::zeros(0),
        mu_star: mu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::*;
    use nalgebra::{dmatrix, dvector};
    use std::sync::Arc;

    fn close(a: &Vector, b: &Vector, tol: f64) -> bool {
        a.len() == b.len() && (a - b).amax() <= tol
    }

    #[test]
    fn equality_qp_examples() {
        let s = solve_equality_qp(&Matrix::identity(2, 2), &Vector::zeros(2), &dmatrix![1.0, 1.0], &dvector![2.0]).unwrap();
        assert!(close(&s.x_star, &dvector![1.0, 1.0], 1e-14));
        assert!(close(&s.lambda_star, &dvector![-1.0], 1e-14));

        let q = dmatrix![2.0, 0.0; 0.0, 4.0];
        let c = dvector![1.0, -2.0];
        let s = solve_equality_qp(&q, &c, &Matrix::zeros(0, 2), &Vector::zeros(0)).unwrap();
        assert!(close(&s.x_star, &dvector![-0.5, 0.5], 1e-14));

        let s = solve_equality_qp(&Matrix::identity(2, 2), &Vector::zeros(2), &dmatrix![1.0, 1.0], &dvector![0.0]).unwrap();
        assert!(close(&s.x_star, &Vector::zeros(2), 1e-15));
        assert!(close(&s.lambda_star, &Vector::zeros(1), 1e-15));
    }

    #[test]
    fn singular_kkt_detected() {
        let a = dmatrix![1.0, 1.0; 2.0, 2.0];
        let r = solve_equality_qp(&Matrix::identity(2, 2), &Vector::zeros(2), &a, &dvector![1.0, 2.0]);
        assert!(matches!(r, Err(Error::SingularKkt)));
    }

    #[test]
    fn inequality_qp_examples() {
        let s = solve_inequality_qp_bruteforce(
            &Matrix::identity(2, 2),
            &dvector![-2.0, 0.0],
            &dmatrix![1.0, 0.0],
            &dvector![1.0],
        )
        .unwrap();
        assert!(close(&s.x_star, &dvector![1.0, 0.0], 1e-14));
        assert!(close(&s.mu_star, &dvector![1.0], 1e-14));

        // interior optimum
        let s = solve_inequality_qp_bruteforce(
            &Matrix::identity(2, 2),
            &dvector![-0.5, 0.0],
            &dmatrix![1.0, 0.0],
            &dvector![1.0],
        )
        .unwrap();
        assert!(close(&s.x_star, &dvector![0.5, 0.0], 1e-14));
        assert_eq!(s.mu_star[0], 0.0);

        // duplicated row gives the same primal solution
        let d = solve_inequality_qp_bruteforce(
            &Matrix::identity(2, 2),
            &dvector![-2.0, 0.0],
            &dmatrix![1.0, 0.0; 1.0, 0.0],
            &dvector![1.0, 1.0],
        )
        .unwrap();
        assert!(close(&d.x_star, &dvector![1.0, 0.0], 1e-14));
        assert!((d.mu_star.sum() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn infeasible_has_no_candidate() {
        let r = solve_inequality_qp_bruteforce(
            &Matrix::identity(1, 1),
            &dvector![0.0],
            &dmatrix![1.0; -1.0],
            &dvector![-1.0, -1.0],
        );
        assert!(matches!(r, Err(Error::NoFeasibleCandidate)));
    }

    #[test]
    fn qcqp_rows() {
        let qs = vec![Matrix::identity(2, 2) * 2.0];
        let lin = vec![Vector::zeros(2)];
        let cs = vec![-1.0];
        let r = |x: Vector| convex_qcqp_feasibility_residual(&x, &qs, &lin, &cs).unwrap()[0];
        assert_eq!(r(dvector![1.0, 0.0]), 0.0);
        assert_eq!(r(dvector![0.0, 0.0]), -1.0);
        assert_eq!(r(dvector![2.0, 0.0]), 3.0);
    }

    #[test]
    fn projections_pass_kkt() {
        let z = dvector![2.0, 0.5];
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_inequality(Arc::new(AffineInequalities::new(dmatrix![1.0, 1.0], dvector![1.0]).unwrap()))
            .unwrap();
        let s = project_halfspace(&z, &dvector![1.0, 1.0], 1.0).unwrap();
        assert!(s.kkt_violation(&p).unwrap().max() <= ORACLE_KKT_TOL);
        assert!(s.licq(&p));

        let row = QuadraticRow {
            q: Matrix::identity(2, 2) * 2.0,
            lin: Vector::zeros(2),
            c: -1.0,
        };
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_inequality(Arc::new(QuadraticInequalities::new(2, vec![row]).unwrap()))
            .unwrap();
        let s = project_ball(&z, &Vector::zeros(2), 1.0).unwrap();
        assert!(s.kkt_violation(&p).unwrap().max() <= ORACLE_KKT_TOL);

        let g = dmatrix![1.0, 0.0; 0.0, 1.0; -1.0, 0.0; 0.0, -1.0];
        let h = dvector![1.0, 1.0, 0.0, 0.0];
        let z = dvector![2.0, -0.5];
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_inequality(Arc::new(AffineInequalities::new(g.clone(), h.clone()).unwrap()))
            .unwrap();
        let s = project_box(&z, 0.0, 1.0).unwrap();
        assert!(s.kkt_violation(&p).unwrap().max() <= ORACLE_KKT_TOL);
        let bf = solve_inequality_qp_bruteforce(&Matrix::identity(2, 2), &(-&z), &g, &h).unwrap();
        assert!(close(&bf.x_star, &s.x_star, 1e-14));
        assert!(close(&bf.mu_star, &s.mu_star, 1e-14));
    }

    #[test]
    fn l1_oracle_matches_soft_threshold() {
        // separable, no constraints: x* = soft(z, w)
        let z = dvector![2.0, -0.3, -1.5];
        let s = solve_l1_equality_qp(&Matrix::identity(3, 3), &(-&z), 0.5, &Matrix::zeros(0, 3), &Vector::zeros(0)).unwrap();
        assert!(close(&s.x_star, &dvector![1.5, 0.0, -1.0], 1e-14));

        let a = dmatrix![1.0, 1.0, 1.0];
        let b = dvector![1.0];
        let s = solve_l1_equality_qp(&Matrix::identity(3, 3), &(-&z), 0.5, &a, &b).unwrap();
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&z)))
            .with_prox(Arc::new(L1Norm { weight: 0.5 }))
            .with_equality(LinearEquality::new(a, b).unwrap())
            .unwrap();
        assert!(s.kkt_violation(&p).unwrap().max() <= ORACLE_KKT_TOL);
    }

    #[test]
    fn kkt_violation_flags_wrong_point() {
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::new(Matrix::identity(2, 2), Vector::zeros(2)).unwrap()))
            .with_equality(LinearEquality::new(dmatrix![1.0, 1.0], dvector![2.0]).unwrap())
            .unwrap();
        let bad = OracleSolution {
            x_star: dvector![2.0, 0.0],
            lambda_star: dvector![-1.0],
            mu_star: Vector::zeros(0),
            obj_star: 2.0,
        };
        let v = bad.kkt_violation(&p).unwrap();
        assert!(v.stationarity > 0.5);
        assert_eq!(v.primal, 0.0);
    }

    #[test]
    fn licq_rank() {
        let p = ConvexProgram::unconstrained(Arc::new(Quadratic::distance_to(&dvector![2.0, 0.0])))
            .with_inequality(Arc::new(
                AffineInequalities::new(dmatrix![1.0, 0.0; 1.0, 0.0], dvector![1.0, 1.0]).unwrap(),
            ))
            .unwrap();
        let s = OracleSolution {
            x_star: dvector![1.0, 0.0],
            lambda_star: Vector::zeros(0),
            mu_star: dvector![0.5, 0.5],
            obj_star: 0.5,
        };
        assert!(!s.licq(&p));
    }
}
