//! Server-side gradient consensus enforcement.
//!
//! A set of client gradients is *consensual* when no pair conflicts:
//! `g_i·g_j ≥ 0` for all `i, j`. Heterogeneous clients routinely violate
//! this, and conflicting gradients are what make naive averaging erase some
//! clients' progress. This module corrects each gradient by the smallest
//! in-span adjustment that removes all conflicts: for client `i` it solves
//!
//! ```text
//! minimize    0.5 aᵀKa − (K e_i)ᵀ a      (K = GᵀG)
//! subject to  K a ⪰ 0
//! ```
//!
//! and sets `g̃_i = G a_i`. The constraint says the corrected gradient has a
//! nonnegative inner product with every raw gradient, and the objective
//! keeps `g̃_i` as close to `g_i` as the span of `G` allows. When column `i`
//! of `K` is already nonnegative the optimum is exactly `a_i = e_i`, so
//! consensual inputs pass through bit-identical (no QP runs).
//!
//! A solver failure is never fatal: the fallback scales the client's own
//! gradient by `β ∈ {1, 1/2, 1/4, …, 0}` until no conflict remains (which,
//! for any strict sign conflict, lands on `β = 0` — the client sits the
//! round out) and the event is counted and flagged.

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix, Vector};
use crate::qpsolver::{self, QpProblem, QpStatus};

/// Relative tolerance for consensus checks: a pair counts as conflicting
/// when `g̃_i·g_j < −ε·‖g̃_i‖·‖g_j‖`.
pub const CONSENSUS_REL_TOL: f64 = 1e-6;

/// QP tolerance used for the consensus corrections. Tighter than the solver
/// default because the consensus guarantee is *angular*: residual products
/// must stay small even relative to corrected gradients much shorter than
/// the raw ones.
const QP_TOL: f64 = 1e-10;

/// Corrected gradients shorter than this fraction of the raw gradient snap
/// to exactly zero. The zero vector is exactly feasible (`K·0 = 0 ⪰ 0`),
/// so the snap trades an objective change within solver tolerance for exact
/// pairwise products, instead of leaving a numerically tiny vector whose
/// direction — all that the consensus check sees — is pure solver noise.
const ZERO_SNAP_REL: f64 = 1e-7;

/// Column-stacked client gradients with their owning client ids.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    columns: Vec<Vector>,
    client_ids: Vec<usize>,
}

impl GradientMatrix {
    /// Validates equal column lengths and distinct ids.
    pub fn new(columns: Vec<Vector>, client_ids: Vec<usize>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::dimension("gradient matrix: no columns"));
        }
        if columns.len() != client_ids.len() {
            return Err(Error::dimension(format!(
                "gradient matrix: {} columns vs {} client ids",
                columns.len(),
                client_ids.len()
            )));
        }
        let d = columns[0].len();
        if d == 0 {
            return Err(Error::dimension("gradient matrix: zero-length columns"));
        }
        for (k, c) in columns.iter().enumerate() {
            if c.len() != d {
                return Err(Error::dimension(format!(
                    "gradient matrix: column {k} has length {}, expected {d}",
                    c.len()
                )));
            }
        }
        let mut sorted = client_ids.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != client_ids.len() {
            return Err(Error::config("gradient matrix: duplicate client ids"));
        }
        Ok(GradientMatrix { columns, client_ids })
    }

    pub fn num_clients(&self) -> usize {
        self.columns.len()
    }

    pub fn dim(&self) -> usize {
        self.columns[0].len()
    }

    pub fn columns(&self) -> &[Vector] {
        &self.columns
    }

    pub fn client_ids(&self) -> &[usize] {
        &self.client_ids
    }

    pub fn column(&self, k: usize) -> &Vector {
        &self.columns[k]
    }
}

/// Output of [`enforce_consensus`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusResult {
    /// Corrected gradients, same ids and order as the input.
    pub corrected: GradientMatrix,
    /// Combination coefficients; column `i` holds `a_i` (`g̃_i = G a_i`).
    pub coefficients: Matrix,
    /// Most negative `g̃_i·g_j` over all ordered pairs, clamped at 0 from
    /// above (0 means no residual conflict).
    pub max_violation: f64,
    /// Per-client `‖g̃_i − g_i‖ / (k_local·eta)`, the QP-drift diagnostic.
    pub drift: Vector,
    /// Clients whose QP failed and took the scale-search fallback.
    pub fallback_flags: Vec<bool>,
    /// Number of flagged clients.
    pub qp_fallbacks: usize,
}

/// Unordered pairs `(i, j, g_i·g_j)` with a strictly negative product,
/// reported over positions in the gradient matrix.
pub fn consensus_violations(g: &GradientMatrix) -> Result<Vec<(usize, usize, f64)>> {
    let m = g.num_clients();
    let mut out = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let p = numerics::dot(g.column(i).as_slice(), g.column(j).as_slice())?;
            if p < 0.0 {
                out.push((i, j, p));
            }
        }
    }
    Ok(out)
}

/// Uniform mean of the columns, accumulated in ascending client-id order so
/// the result is bitwise invariant under input permutation.
pub fn aggregate(g: &GradientMatrix) -> Result<Vector> {
    let mut order: Vec<usize> = (0..g.num_clients()).collect();
    order.sort_by_key(|&k| g.client_ids()[k]);
    let mut sum = vec![0.0; g.dim()];
    for &k in &order {
        numerics::axpy(1.0, g.column(k).as_slice(), &mut sum)?;
    }
    let inv = 1.0 / g.num_clients() as f64;
    for v in sum.iter_mut() {
        *v *= inv;
    }
    Ok(Vector::new(sum))
}

/// Weighted mean of the columns with the given nonnegative weights
/// (normalized by their sum), accumulated in ascending client-id order.
pub fn aggregate_weighted(g: &GradientMatrix, weights: &[f64]) -> Result<Vector> {
    if weights.len() != g.num_clients() {
        return Err(Error::dimension(format!(
            "aggregate: {} weights for {} columns",
            weights.len(),
            g.num_clients()
        )));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || weights.iter().any(|&w| w < 0.0) {
        return Err(Error::config(
            "aggregate: weights must be nonnegative with positive sum",
        ));
    }
    let mut order: Vec<usize> = (0..g.num_clients()).collect();
    order.sort_by_key(|&k| g.client_ids()[k]);
    let mut sum = vec![0.0; g.dim()];
    for &k in &order {
        numerics::axpy(weights[k] / total, g.column(k).as_slice(), &mut sum)?;
    }
    Ok(Vector::new(sum))
}

/// Runs the consensus correction with the default QP budget
/// (`tol = 1e-10`, `max_iter = 10000`).
///
/// `k_local` (number of local optimization steps) and `eta` (local learning
/// rate) only normalize the reported drift diagnostic.
pub fn enforce_consensus(
    g: &GradientMatrix,
    k_local: usize,
    eta: f64,
) -> Result<ConsensusResult> {
    enforce_consensus_with(g, k_local, eta, QP_TOL, qpsolver::DEFAULT_MAX_ITER)
}

/// [`enforce_consensus`] with an explicit QP tolerance and sweep budget.
pub fn enforce_consensus_with(
    g: &GradientMatrix,
    k_local: usize,
    eta: f64,
    qp_tol: f64,
    qp_max_iter: usize,
) -> Result<ConsensusResult> {
    if k_local == 0 {
        return Err(Error::config("consensus k_local: must be >= 1"));
    }
    if !(eta > 0.0) {
        return Err(Error::config("consensus eta: must be > 0"));
    }
    let m = g.num_clients();
    let k = numerics::gram(g.columns())?;

    // shared pieces of the per-client QPs: Q = K, A = −K, h = 0
    let mut neg_k = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            neg_k[(i, j)] = -k[(i, j)];
        }
    }
    let h = Vector::zeros(m);

    let mut coefficients = Matrix::zeros(m, m);
    let mut corrected_cols = Vec::with_capacity(m);
    let mut drift = Vec::with_capacity(m);
    let mut fallback_flags = vec![false; m];

    for i in 0..m {
        // consensual fast path: if column i of K is nonnegative, a = e_i is
        // feasible and attains the unconstrained optimum, exactly
        let clean = (0..m).all(|j| k[(j, i)] >= 0.0);
        let a_i: Vec<f64> = if clean {
            let mut e = vec![0.0; m];
            e[i] = 1.0;
            e
        } else {
            let c = Vector::new((0..m).map(|j| -k[(j, i)]).collect());
            let problem = QpProblem::new(k.clone(), c, neg_k.clone(), h.clone())?;
            let solution = qpsolver::solve(&problem, qp_tol, qp_max_iter)?;
            if solution.status == QpStatus::Optimal {
                solution.a.into_vec()
            } else {
                // scale search: shrink the client's own gradient until no
                // conflict remains; a strict sign conflict forces beta = 0
                fallback_flags[i] = true;
                let mut beta = 1.0f64;
                let mut chosen = 0.0;
                for _ in 0..40 {
                    let ok = (0..m).all(|j| {
                        let prod = beta * k[(j, i)];
                        let scale = beta
                            * (k[(i, i)].max(0.0)).sqrt()
                            * (k[(j, j)].max(0.0)).sqrt();
                        prod >= -CONSENSUS_REL_TOL * scale
                    });
                    if ok {
                        chosen = beta;
                        break;
                    }
                    beta *= 0.5;
                }
                let mut e = vec![0.0; m];
                e[i] = chosen;
                e
            }
        };

        let (a_i, g_tilde) = if clean {
            (a_i, g.column(i).clone())
        } else {
            let combined = numerics::linear_combination(g.columns(), &a_i)?;
            let raw_norm = numerics::norm2(g.column(i).as_slice());
            if numerics::norm2(combined.as_slice()) <= ZERO_SNAP_REL * raw_norm {
                (vec![0.0; m], Vector::zeros(g.dim()))
            } else {
                (a_i, combined)
            }
        };
        g_tilde.assert_finite("corrected gradient");

        let mut diff = g_tilde.clone().into_vec();
        numerics::axpy(-1.0, g.column(i).as_slice(), &mut diff)?;
        drift.push(numerics::norm2(&diff) / (k_local as f64 * eta));

        for (j, &v) in a_i.iter().enumerate() {
            coefficients[(j, i)] = v;
        }
        corrected_cols.push(g_tilde);
    }

    // diagnostic recomputed from the actual output vectors, not from K·a
    let mut max_violation = 0.0f64;
    for ci in &corrected_cols {
        for gj in g.columns() {
            let p = numerics::dot(ci.as_slice(), gj.as_slice())?;
            if p < max_violation {
                max_violation = p;
            }
        }
    }

    let qp_fallbacks = fallback_flags.iter().filter(|&&f| f).count();
    Ok(ConsensusResult {
        corrected: GradientMatrix::new(corrected_cols, g.client_ids().to_vec())?,
        coefficients,
        max_violation,
        drift: Vector::new(drift),
        fallback_flags,
        qp_fallbacks,
    })
}
