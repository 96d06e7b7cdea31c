//! Convex quadratic programming with KKT certification.
//!
//! Solves inequality-constrained problems of the form
//!
//! ```text
//! minimize    0.5 aᵀQa + cᵀa
//! subject to  A a ⪯ h
//! ```
//!
//! with `Q` symmetric positive semidefinite. The solver works on the
//! Lagrange dual: with `D = A Q⁻¹ Aᵀ` and `b = A Q⁻¹ c + h`, maximizing the
//! dual is minimizing `ψ(λ) = 0.5 λᵀDλ + bᵀλ` over `λ ⪰ 0`, which is handled
//! by cyclic coordinate descent with nonnegativity clamping. The primal is
//! recovered as `a = −Q⁻¹(c + Aᵀλ)`. Periodically the positive-dual active
//! set is solved exactly (one small linear solve) to finish off
//! ill-conditioned instances that coordinate descent crawls through.
//!
//! When `Q` is singular its Cholesky factorization fails and a ridge
//! `ε·(trace(Q)/M)·I` with `ε = 1e-10` is added (escalating by 10x if still
//! not factorable); the applied ridge is reported on the solution.
//! Convergence is always measured against the *original* `Q`, so the ridge
//! is an iteration device, not a change of problem.
//!
//! [`certify_kkt`] recomputes stationarity, feasibility, and complementary
//! slackness from scratch, and [`brute_force_oracle`] grid-searches the
//! feasible box — two independent routes to check the solver against.

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix, Vector};

/// Default convergence tolerance on the (scaled) KKT residual.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default cap on coordinate-descent sweeps.
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Dual magnitudes beyond this are treated as evidence of an unbounded dual
/// (i.e. an infeasible primal) once a Farkas-style certificate confirms it.
const DUAL_BLOWUP: f64 = 1e12;

/// A quadratic program `min 0.5 aᵀQa + cᵀa  s.t.  A a ⪯ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    q: Matrix,
    c: Vector,
    a_ineq: Matrix,
    h: Vector,
}

impl QpProblem {
    /// Validates shapes and symmetry of `Q`. `a_ineq` may have zero rows
    /// (unconstrained problem).
    pub fn new(q: Matrix, c: Vector, a_ineq: Matrix, h: Vector) -> Result<Self> {
        let m = q.rows();
        if q.cols() != m {
            return Err(Error::problem(format!(
                "Q must be square, got {}x{}",
                q.rows(),
                q.cols()
            )));
        }
        if m == 0 {
            return Err(Error::problem("Q must have at least one row"));
        }
        if c.len() != m {
            return Err(Error::dimension(format!(
                "c has length {}, Q is {m}x{m}",
                c.len()
            )));
        }
        if a_ineq.cols() != m && a_ineq.rows() > 0 {
            return Err(Error::dimension(format!(
                "A has {} columns, Q is {m}x{m}",
                a_ineq.cols()
            )));
        }
        if a_ineq.rows() != h.len() {
            return Err(Error::dimension(format!(
                "A has {} rows, h has length {}",
                a_ineq.rows(),
                h.len()
            )));
        }
        let mut scale = 0.0f64;
        for v in q.as_slice() {
            scale = scale.max(v.abs());
        }
        for i in 0..m {
            for j in i + 1..m {
                if (q[(i, j)] - q[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::problem(format!(
                        "Q is not symmetric at ({i},{j}): {} vs {}",
                        q[(i, j)],
                        q[(j, i)]
                    )));
                }
            }
        }
        Ok(QpProblem { q, c, a_ineq, h })
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub fn num_constraints(&self) -> usize {
        self.a_ineq.rows()
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    pub fn a_ineq(&self) -> &Matrix {
        &self.a_ineq
    }

    pub fn h(&self) -> &Vector {
        &self.h
    }

    /// Objective value `0.5 aᵀQa + cᵀa`.
    pub fn objective(&self, a: &[f64]) -> Result<f64> {
        let qa = crate::numerics::matvec(&self.q, a)?;
        Ok(0.5 * dot(a, qa.as_slice())? + dot(self.c.as_slice(), a)?)
    }

    /// Constraint values `A a − h` (all ≤ 0 when feasible).
    fn constraint_values(&self, a: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.num_constraints());
        for j in 0..self.num_constraints() {
            out.push(dot(self.a_ineq.row(j), a)? - self.h[j]);
        }
        Ok(out)
    }
}

/// Terminal state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// KKT residuals within tolerance.
    Optimal,
    /// Sweep budget exhausted before the residuals converged.
    MaxIter,
    /// The dual was certified unbounded, so the primal is infeasible.
    Infeasible,
}

/// Solver output. `kkt_residual` is the maximum of the scaled stationarity
/// residual, primal infeasibility, and complementary slackness (the same
/// quantity the convergence test uses).
#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub a: Vector,
    pub dual: Vector,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Diagonal regularization used on `Q`: 0 when it factored cleanly,
    /// otherwise the proximal shift δ (the solution still satisfies the
    /// original, unshifted KKT system to within `kkt_residual`).
    pub ridge: f64,
}

/// Independent KKT check of a candidate solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `‖Qa + c + Aᵀλ‖∞`.
    pub stationarity: f64,
    /// `max_j max(0, (Aa − h)_j)`.
    pub feasibility: f64,
    /// `max_j |λ_j (Aa − h)_j|`.
    pub complementarity: f64,
    /// All multipliers nonnegative.
    pub dual_sign_ok: bool,
    /// All of the above within tolerance (stationarity scaled by
    /// `max(1, ‖c‖∞)`).
    pub pass: bool,
}

/// Lower-triangular Cholesky factor, or `None` when a pivot is not safely
/// positive (matrix not numerically positive definite).
fn cholesky(m: &Matrix) -> Option<Matrix> {
    let n = m.rows();
    let mut diag_max = 0.0f64;
    for i in 0..n {
        diag_max = diag_max.max(m[(i, i)].abs());
    }
    let floor = 1e-13 * diag_max.max(1e-300);
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= floor {
                    return None;
                }
                l[(i, j)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` by forward/back substitution.
fn chol_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Factors `m` directly, or with an escalating ridge when it is singular.
/// Returns the factor and the ridge that was applied.
fn factor_with_ridge(m: &Matrix) -> Result<(Matrix, f64)> {
    if let Some(l) = cholesky(m) {
        return Ok((l, 0.0));
    }
    let n = m.rows();
    let mut trace = 0.0;
    for i in 0..n {
        trace += m[(i, i)];
    }
    let base = if trace > 0.0 { 1e-10 * trace / n as f64 } else { 1e-10 };
    let mut ridge = base;
    for _ in 0..6 {
        let mut ridged = m.clone();
        for i in 0..n {
            ridged[(i, i)] += ridge;
        }
        if let Some(l) = cholesky(&ridged) {
            return Ok((l, ridge));
        }
        ridge *= 10.0;
    }
    Err(Error::problem(
        "Hessian is not positive semidefinite (ridge escalation failed)",
    ))
}

/// Residuals of `(a, λ)` against the original problem.
fn residuals(p: &QpProblem, a: &[f64], dual: &[f64]) -> Result<(f64, f64, f64)> {
    let m = p.dim();
    let mut stat = vec![0.0; m];
    let qa = crate::numerics::matvec(&p.q, a)?;
    for k in 0..m {
        stat[k] = qa[k] + p.c[k];
    }
    for j in 0..p.num_constraints() {
        let row = p.a_ineq.row(j);
        for k in 0..m {
            stat[k] += row[k] * dual[j];
        }
    }
    let stationarity = stat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cons = p.constraint_values(a)?;
    let mut feasibility = 0.0f64;
    let mut complementarity = 0.0f64;
    for (j, &cv) in cons.iter().enumerate() {
        feasibility = feasibility.max(cv.max(0.0));
        complementarity = complementarity.max((dual[j] * cv).abs());
    }
    Ok((stationarity, feasibility, complementarity))
}

fn c_scale(p: &QpProblem) -> f64 {
    p.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0)
}

/// Scaled max residual used for the convergence test and reported on the
/// solution.
fn scaled_residual(p: &QpProblem, a: &[f64], dual: &[f64]) -> Result<f64> {
    let (stat, feas, comp) = residuals(p, a, dual)?;
    Ok((stat / c_scale(p)).max(feas).max(comp))
}

/// Everything precomputed for the dual iteration.
struct DualSystem {
    /// Cholesky factor of the (possibly ridged) `Q`.
    l: Matrix,
    ridge: f64,
    /// `D = A Q̃⁻¹ Aᵀ`.
    d: Matrix,
    /// `b = A Q̃⁻¹ c + h`.
    b: Vec<f64>,
    d_floor: f64,
}

impl DualSystem {
    fn from_factor(p: &QpProblem, l: Matrix, ridge: f64) -> Result<Self> {
        let np = p.num_constraints();
        let qinv_c = chol_solve(&l, p.c.as_slice());
        let v: Vec<Vec<f64>> =
            (0..np).map(|j| chol_solve(&l, p.a_ineq.row(j))).collect();
        let mut d = Matrix::zeros(np, np);
        let mut diag_max = 0.0f64;
        for j in 0..np {
            for k in j..np {
                let val = dot(p.a_ineq.row(j), &v[k])?;
                d[(j, k)] = val;
                d[(k, j)] = val;
            }
            diag_max = diag_max.max(d[(j, j)].abs());
        }
        let mut b = Vec::with_capacity(np);
        for j in 0..np {
            b.push(dot(p.a_ineq.row(j), &qinv_c)? + p.h[j]);
        }
        Ok(DualSystem { l, ridge, d, b, d_floor: 1e-14 * diag_max.max(1e-300) })
    }

    /// Primal recovery `a = −Q̃⁻¹(c + Aᵀλ)`.
    fn primal(&self, p: &QpProblem, dual: &[f64]) -> Vec<f64> {
        let m = p.dim();
        let mut rhs = vec![0.0; m];
        for k in 0..m {
            rhs[k] = p.c[k];
        }
        for (j, &lj) in dual.iter().enumerate() {
            if lj != 0.0 {
                let row = p.a_ineq.row(j);
                for k in 0..m {
                    rhs[k] += row[k] * lj;
                }
            }
        }
        let mut a = chol_solve(&self.l, &rhs);
        for v in a.iter_mut() {
            *v = -*v;
        }
        a
    }
}

/// Checks whether `ray` certifies dual unboundedness: a nonnegative
/// direction with `D·ray ≈ 0` and `b·ray < 0` drives `ψ` to −∞, so the
/// primal feasible set is empty.
fn farkas_certificate(sys: &DualSystem, ray: &[f64]) -> bool {
    let mut r: Vec<f64> = ray.iter().map(|&v| v.max(0.0)).collect();
    let n = crate::numerics::norm2(&r);
    if n <= 0.0 {
        return false;
    }
    for v in r.iter_mut() {
        *v /= n;
    }
    // The candidate comes from a ridged solve, which leaves a range-space
    // component of relative size ridge/λ that the `D·r ≈ 0` test below can
    // reject at scale. Two rounds of inverse iteration (clamped to the
    // nonnegative cone, where a Farkas ray must live) strip it.
    if let Ok((l, _)) = factor_with_ridge(&sys.d) {
        for _ in 0..2 {
            let mut v = chol_solve(&l, &r);
            for x in v.iter_mut() {
                *x = x.max(0.0);
            }
            let vn = crate::numerics::norm2(&v);
            if !vn.is_finite() || vn <= 0.0 {
                break;
            }
            for x in v.iter_mut() {
                *x /= vn;
            }
            r = v;
        }
    }
    let np = r.len();
    let mut diag_max = 0.0f64;
    let mut b_max = 0.0f64;
    for j in 0..np {
        diag_max = diag_max.max(sys.d[(j, j)].abs());
        b_max = b_max.max(sys.b[j].abs());
    }
    let mut dr_inf = 0.0f64;
    for j in 0..np {
        let mut acc = 0.0;
        for k in 0..np {
            acc += sys.d[(j, k)] * r[k];
        }
        dr_inf = dr_inf.max(acc.abs());
    }
    let br: f64 = sys.b.iter().zip(&r).map(|(b, r)| b * r).sum();
    dr_inf <= 1e-7 * diag_max.max(1.0) && br < -1e-9 * b_max.max(1.0)
}

/// Solves the problem with default-initialized (zero) multipliers.
pub fn solve(p: &QpProblem, tol: f64, max_iter: usize) -> Result<QpSolution> {
    solve_with_start(p, tol, max_iter, None)
}

/// Solves the problem, optionally warm-starting from a previous dual vector
/// (negative entries are clamped to zero). Deterministic for fixed inputs.
pub fn solve_with_start(
    p: &QpProblem,
    tol: f64,
    max_iter: usize,
    warm_dual: Option<&[f64]>,
) -> Result<QpSolution> {
    if !(tol > 0.0) {
        return Err(Error::config("qp tol: must be > 0"));
    }
    let np = p.num_constraints();
    if let Some(w) = warm_dual {
        if w.len() != np {
            return Err(Error::dimension(format!(
                "warm dual has length {}, problem has {np} constraints",
                w.len()
            )));
        }
    }
    match cholesky(&p.q) {
        Some(l) => {
            let sys = DualSystem::from_factor(p, l, 0.0)?;
            dual_ascent(p, &sys, tol, max_iter, warm_dual)
        }
        None => proximal_solve(p, tol, max_iter, warm_dual),
    }
}

/// Coordinate ascent on the dual of `p`. `sys` holds the factored (and, for
/// proximal subproblems, shifted) Hessian.
fn dual_ascent(
    p: &QpProblem,
    sys: &DualSystem,
    tol: f64,
    max_iter: usize,
    warm_dual: Option<&[f64]>,
) -> Result<QpSolution> {
    let np = p.num_constraints();
    let mut dual: Vec<f64> = match warm_dual {
        Some(w) => w.iter().map(|&v| v.max(0.0)).collect(),
        None => vec![0.0; np],
    };

    let mut a = sys.primal(p, &dual);
    let mut best_residual = scaled_residual(p, &a, &dual)?;
    // Warm starts always get at least one sweep: a stale microscopic
    // multiplier can keep the residual just inside `tol` while blocking
    // the caller's outer iteration (see `proximal_solve`).
    if warm_dual.is_none() && best_residual <= tol {
        return Ok(QpSolution {
            a: Vector::new(a),
            dual: Vector::new(dual),
            status: QpStatus::Optimal,
            kkt_residual: best_residual,
            iterations: 0,
            ridge: sys.ridge,
        });
    }

    let mut status = QpStatus::MaxIter;
    let mut iterations = 0;
    'outer: for iter in 1..=max_iter {
        iterations = iter;
        // fresh gradient each sweep kills incremental drift
        let mut g: Vec<f64> = sys.b.clone();
        for j in 0..np {
            let lj = dual[j];
            if lj != 0.0 {
                for k in 0..np {
                    g[k] += sys.d[(k, j)] * lj;
                }
            }
        }
        for j in 0..np {
            let djj = sys.d[(j, j)];
            if djj > sys.d_floor {
                let next = (dual[j] - g[j] / djj).max(0.0);
                let delta = next - dual[j];
                if delta != 0.0 {
                    dual[j] = next;
                    for k in 0..np {
                        g[k] += delta * sys.d[(k, j)];
                    }
                }
            } else if g[j] < -1e-9 * c_scale(p) {
                // the dual improves forever along this coordinate
                status = QpStatus::Infeasible;
                a = sys.primal(p, &dual);
                best_residual = scaled_residual(p, &a, &dual)?;
                break 'outer;
            }
        }
        if dual.iter().any(|&v| v > DUAL_BLOWUP) {
            status = QpStatus::Infeasible;
            a = sys.primal(p, &dual);
            best_residual = scaled_residual(p, &a, &dual)?;
            break 'outer;
        }

        a = sys.primal(p, &dual);
        best_residual = scaled_residual(p, &a, &dual)?;
        if best_residual <= tol {
            status = QpStatus::Optimal;
            break;
        }

        // every few sweeps, solve the current active set exactly
        if iter % 10 == 0 {
            let active: Vec<usize> =
                (0..np).filter(|&j| dual[j] > 0.0).collect();
            if !active.is_empty() {
                let na = active.len();
                let mut dact = Matrix::zeros(na, na);
                for (r, &j) in active.iter().enumerate() {
                    for (s, &k) in active.iter().enumerate() {
                        dact[(r, s)] = sys.d[(j, k)];
                    }
                }
                if let Ok((lact, _)) = factor_with_ridge(&dact) {
                    let rhs: Vec<f64> =
                        active.iter().map(|&j| -sys.b[j]).collect();
                    let x = chol_solve(&lact, &rhs);
                    if x.iter().all(|v| v.is_finite()) {
                        let mut cand = vec![0.0; np];
                        let mut expanded = cand.clone();
                        for (r, &j) in active.iter().enumerate() {
                            expanded[j] = x[r];
                            cand[j] = x[r].max(0.0);
                        }
                        let ca = sys.primal(p, &cand);
                        let cr = scaled_residual(p, &ca, &cand)?;
                        if cr < best_residual {
                            dual = cand;
                            a = ca;
                            best_residual = cr;
                            if best_residual <= tol {
                                status = QpStatus::Optimal;
                                break;
                            }
                        } else if farkas_certificate(sys, &expanded) {
                            status = QpStatus::Infeasible;
                            break;
                        }
                    }
                }
            }
        }
    }

    let out = Vector::new(a);
    if status == QpStatus::Optimal {
        out.assert_finite("qp solution");
    }
    Ok(QpSolution {
        a: out,
        dual: Vector::new(dual),
        status,
        kkt_residual: best_residual,
        iterations,
        ridge: sys.ridge,
    })
}

/// Cap on proximal-point outer iterations for singular Hessians.
const PROX_MAX_OUTER: usize = 100;

/// Solves a QP whose Hessian is not numerically positive definite.
///
/// A tiny factorization ridge makes the dual system catastrophically
/// ill-conditioned (curvatures of order `1/ridge` stall the coordinate
/// steps), so instead each outer iteration solves the strongly convex
/// proximal subproblem with Hessian `Q + δI` and linear term
/// `c − δ·center`. Its fixed point is an exact solution of the original
/// problem, and δ can be large enough for the dual system to stay well
/// conditioned. Convergence is always measured against the original
/// problem's KKT residuals.
fn proximal_solve(
    p: &QpProblem,
    tol: f64,
    max_iter: usize,
    warm_dual: Option<&[f64]>,
) -> Result<QpSolution> {
    let m = p.dim();
    let mut trace = 0.0;
    for i in 0..m {
        trace += p.q[(i, i)];
    }
    let delta = if trace > 0.0 { 1e-4 * trace / m as f64 } else { 1e-4 * c_scale(p) };
    let inner_tol = (tol * 0.1).max(1e-12);
    let mut center = vec![0.0; m];
    let mut warm: Option<Vec<f64>> =
        warm_dual.map(|w| w.iter().map(|&v| v.max(0.0)).collect());
    let mut iterations = 0usize;
    let mut best: Option<QpSolution> = None;
    for _ in 0..PROX_MAX_OUTER {
        let mut q_shift = p.q.clone();
        for i in 0..m {
            q_shift[(i, i)] += delta;
        }
        let c_shift: Vec<f64> = (0..m).map(|i| p.c[i] - delta * center[i]).collect();
        let sub = QpProblem::new(
            q_shift,
            Vector::new(c_shift),
            p.a_ineq.clone(),
            p.h.clone(),
        )?;
        let l = cholesky(&sub.q).ok_or_else(|| {
            Error::problem("Hessian is not positive semidefinite (proximal shift failed)")
        })?;
        let sys = DualSystem::from_factor(&sub, l, delta)?;
        let sol = dual_ascent(&sub, &sys, inner_tol, max_iter, warm.as_deref())?;
        iterations += sol.iterations;
        let residual = scaled_residual(p, sol.a.as_slice(), sol.dual.as_slice())?;
        if sol.status == QpStatus::Infeasible {
            return Ok(QpSolution {
                a: sol.a,
                dual: sol.dual,
                status: QpStatus::Infeasible,
                kkt_residual: residual,
                iterations,
                ridge: delta,
            });
        }
        let better = best.as_ref().map_or(true, |b| residual < b.kkt_residual);
        if better {
            best = Some(QpSolution {
                a: sol.a.clone(),
                dual: sol.dual.clone(),
                status: QpStatus::MaxIter,
                kkt_residual: residual,
                iterations,
                ridge: delta,
            });
        }
        if residual <= tol {
            let mut out = best.expect("just set");
            out.status = QpStatus::Optimal;
            out.iterations = iterations;
            out.a.assert_finite("qp solution");
            return Ok(out);
        }
        center = sol.a.as_slice().to_vec();
        warm = Some(sol.dual.as_slice().to_vec());
    }
    let mut out = best.expect("at least one proximal iterate ran");
    out.iterations = iterations;
    Ok(out)
}

/// Recomputes all KKT residuals of `(a, dual)` from the problem data alone.
/// Shares no state with the solver loop.
pub fn certify_kkt(p: &QpProblem, a: &[f64], dual: &[f64], tol: f64) -> Result<KktReport> {
    if a.len() != p.dim() {
        return Err(Error::dimension(format!(
            "candidate has length {}, problem dimension is {}",
            a.len(),
            p.dim()
        )));
    }
    if dual.len() != p.num_constraints() {
        return Err(Error::dimension(format!(
            "dual has length {}, problem has {} constraints",
            dual.len(),
            p.num_constraints()
        )));
    }
    let (stationarity, feasibility, complementarity) = residuals(p, a, dual)?;
    let dual_sign_ok = dual.iter().all(|&v| v >= 0.0);
    let pass = dual_sign_ok
        && stationarity <= tol * c_scale(p)
        && feasibility <= tol
        && complementarity <= tol;
    Ok(KktReport { stationarity, feasibility, complementarity, dual_sign_ok, pass })
}

/// Best feasible point found on the grid, with its objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub a: Vector,
    pub objective: f64,
}

/// Exhaustive grid search over `[−box_half, box_half]^M` with the given
/// spacing. Grid points violating any constraint by more than
/// `min(step, 1e-9)` are discarded — enough slack to keep grid points that
/// sit on a constraint boundary up to rounding, but far too little for the
/// oracle to profit from genuinely infeasible points, which keeps
/// `solver objective ≤ oracle objective + tol` a sound check. Among the
/// surviving points the least objective wins (first hit on ties, so the
/// result is deterministic). Errors when no grid point is feasible.
///
/// Cost grows as `(2·box_half/step)^M`; intended for `M ≤ 3`.
pub fn brute_force_oracle(p: &QpProblem, box_half: f64, step: f64) -> Result<OracleSolution> {
    if !(box_half > 0.0) {
        return Err(Error::config("oracle box_half: must be > 0"));
    }
    if !(step > 0.0) {
        return Err(Error::config("oracle step: must be > 0"));
    }
    let m = p.dim();
    let slack = step.min(1e-9);
    let per_dim = (2.0 * box_half / step).floor() as usize + 1;
    let mut idx = vec![0usize; m];
    let mut point = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>)> = None;
    'grid: loop {
        for k in 0..m {
            point[k] = -box_half + idx[k] as f64 * step;
        }
        let mut feasible = true;
        for j in 0..p.num_constraints() {
            if dot(p.a_ineq.row(j), &point)? - p.h[j] > slack {
                feasible = false;
                break;
            }
        }
        if feasible {
            let obj = p.objective(&point)?;
            if best.as_ref().map_or(true, |(b, _)| obj < *b) {
                best = Some((obj, point.clone()));
            }
        }
        // odometer increment over the grid indices
        for k in 0..m {
            idx[k] += 1;
            if idx[k] < per_dim {
                continue 'grid;
            }
            idx[k] = 0;
        }
        break;
    }
    match best {
        Some((objective, a)) => Ok(OracleSolution { a: Vector::new(a), objective }),
        None => Err(Error::oracle(format!(
            "no feasible grid point in [-{box_half}, {box_half}]^{m} at step {step}"
        ))),
    }
}
