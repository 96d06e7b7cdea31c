//! Self-check suites: each suite re-derives a contract of this crate with
//! an independent method (hand-solved fixtures, exhaustive enumeration,
//! grid search, finite differences) and reports pass/fail per property.
//!
//! The CLI `verify` subcommand runs these; the acceptance tests call the
//! same functions, so the command line and the test suite can never drift
//! apart. Fixture builders used by several checks (the descent experiment,
//! the heterogeneity benchmark) live here too.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::consensus::{self, GradientMatrix};
use crate::data::{pathological_partition, synth_dataset, ClientDataset, PartitionSpec};
use crate::error::Result;
use crate::metrics;
use crate::model::{self, Activation, MlpSpec, ParamVector};
use crate::numerics::{self, Matrix, Vector};
use crate::orchestrator::{
    Federation, FederationConfig, Method, Participation, RoundRecord,
};
use crate::qpsolver::{self, QpProblem, QpStatus};
use crate::sampler::{self, SamplerConfig, SimilarityTable};

/// One verified property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Check { name: name.to_string(), passed, detail }
    }
}

/// All checks of one named suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `[PASS]`/`[FAIL]` line per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            out.push_str(&format!("[{tag}] {}::{} - {}\n", self.suite, c.name, c.detail));
        }
        out
    }
}

/// Suites the CLI accepts, in execution order.
pub const SUITE_NAMES: [&str; 4] = ["qp", "consensus", "descent", "sampler"];

/// Runs one suite by name.
pub fn run_suite(name: &str) -> Option<SuiteReport> {
    match name {
        "qp" => Some(qp_suite()),
        "consensus" => Some(consensus_suite()),
        "descent" => Some(descent_suite()),
        "sampler" => Some(sampler_suite()),
        _ => None,
    }
}

fn push(checks: &mut Vec<Check>, name: &str, result: Result<(bool, String)>) {
    match result {
        Ok((passed, detail)) => checks.push(Check::new(name, passed, detail)),
        Err(e) => checks.push(Check::new(name, false, format!("error: {e}"))),
    }
}

// ---------------------------------------------------------------------------
// random problem generator
// ---------------------------------------------------------------------------

/// Random PSD quadratic program with a guaranteed-nonempty feasible set.
///
/// `Q = BᵀB` for a random factor (occasionally rank-deficient), `c = −Q·y`
/// for a random `y` so the objective is bounded below with an optimum near
/// the origin even when `Q` is singular. With `origin_feasible` the bounds
/// satisfy `h ⪰ 0` so `a = 0` is feasible; otherwise feasibility is
/// anchored at a random interior point with margin ≥ 0.3, which also
/// guarantees the grid oracle finds feasible points.
pub fn random_psd_problem(
    rng: &mut ChaCha8Rng,
    m: usize,
    p: usize,
    origin_feasible: bool,
) -> QpProblem {
    let rank = if m > 1 && rng.gen_bool(0.25) { m - 1 } else { m + rng.gen_range(0..2) };
    let mut b = Matrix::zeros(rank, m);
    for v in b.as_mut_slice() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let mut q = Matrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut s = 0.0;
            for r in 0..rank {
                s += b[(r, i)] * b[(r, j)];
            }
            q[(i, j)] = s;
            q[(j, i)] = s;
        }
    }
    let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut c = vec![0.0; m];
    for i in 0..m {
        for j in 0..m {
            c[i] -= q[(i, j)] * y[j];
        }
    }
    let mut a_ineq = Matrix::zeros(p, m);
    for v in a_ineq.as_mut_slice() {
        *v = rng.gen_range(-1.0..1.0);
    }
    let h: Vec<f64> = if origin_feasible {
        (0..p).map(|_| rng.gen_range(0.0..1.0)).collect()
    } else {
        let x0: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (0..p)
            .map(|j| {
                numerics::dot(a_ineq.row(j), &x0).expect("conformable")
                    + rng.gen_range(0.3..1.0)
            })
            .collect()
    };
    QpProblem::new(q, Vector::new(c), a_ineq, Vector::new(h))
        .expect("generated problem is well formed")
}

// ---------------------------------------------------------------------------
// qp suite
// ---------------------------------------------------------------------------

/// Hand-solved KKT fixtures (exact), the 200-problem oracle battery, and
/// infeasibility detection.
pub fn qp_suite() -> SuiteReport {
    let mut checks = Vec::new();

    push(&mut checks, "hand_fixtures_exact", (|| {
        // unconstrained: Q=I2, c=(-1,0) -> a=(1,0)
        let p1 = QpProblem::new(
            Matrix::identity(2),
            Vector::new(vec![-1.0, 0.0]),
            Matrix::zeros(0, 2),
            Vector::new(vec![]),
        )?;
        let s1 = qpsolver::solve(&p1, qpsolver::DEFAULT_TOL, qpsolver::DEFAULT_MAX_ITER)?;
        let ok1 = s1.status == QpStatus::Optimal && s1.a.as_slice() == [1.0, 0.0];

        // budget: Q=I2, c=(-1,-1), a1+a2 <= 1 -> a=(0.5,0.5), dual=(0.5)
        let p2 = QpProblem::new(
            Matrix::identity(2),
            Vector::new(vec![-1.0, -1.0]),
            Matrix::from_rows(1, 2, vec![1.0, 1.0])?,
            Vector::new(vec![1.0]),
        )?;
        let s2 = qpsolver::solve(&p2, qpsolver::DEFAULT_TOL, qpsolver::DEFAULT_MAX_ITER)?;
        let ok2 = s2.status == QpStatus::Optimal
            && s2.a.as_slice() == [0.5, 0.5]
            && s2.dual.as_slice() == [0.5];

        // clamp: Q=I1, c=(1), -a <= 0 -> a=(0), dual=(1)
        let p3 = QpProblem::new(
            Matrix::from_rows(1, 1, vec![1.0])?,
            Vector::new(vec![1.0]),
            Matrix::from_rows(1, 1, vec![-1.0])?,
            Vector::new(vec![0.0]),
        )?;
        let s3 = qpsolver::solve(&p3, qpsolver::DEFAULT_TOL, qpsolver::DEFAULT_MAX_ITER)?;
        let ok3 = s3.status == QpStatus::Optimal
            && s3.a.as_slice() == [0.0]
            && s3.dual.as_slice() == [1.0];

        Ok((
            ok1 && ok2 && ok3,
            format!(
                "unconstrained a={:?}, budget a={:?} dual={:?}, clamp a={:?} dual={:?}",
                s1.a.as_slice(),
                s2.a.as_slice(),
                s2.dual.as_slice(),
                s3.a.as_slice(),
                s3.dual.as_slice()
            ),
        ))
    })());

    push(&mut checks, "battery_200_oracle_and_kkt", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x51E0);
        let mut worst_gap = f64::NEG_INFINITY;
        let mut worst_kkt = 0.0f64;
        let mut failures = 0usize;
        for k in 0..200 {
            let m = 1 + k % 3;
            let p = 1 + k % 4;
            let problem = random_psd_problem(&mut rng, m, p, k % 2 == 0);
            let s = qpsolver::solve(&problem, 1e-8, qpsolver::DEFAULT_MAX_ITER)?;
            if s.status != QpStatus::Optimal {
                failures += 1;
                continue;
            }
            let report =
                qpsolver::certify_kkt(&problem, s.a.as_slice(), s.dual.as_slice(), 1e-6)?;
            let kkt = report
                .stationarity
                .max(report.feasibility)
                .max(report.complementarity);
            worst_kkt = worst_kkt.max(kkt);
            if !report.pass {
                failures += 1;
            }
            let (step, box_half) = match m {
                1 => (1e-3, 3.0),
                2 => (0.01, 3.0),
                _ => (0.05, 3.0),
            };
            let oracle = qpsolver::brute_force_oracle(&problem, box_half, step)?;
            let gap = problem.objective(s.a.as_slice())? - oracle.objective;
            worst_gap = worst_gap.max(gap);
            if gap > 1e-3 {
                failures += 1;
            }
        }
        Ok((
            failures == 0,
            format!(
                "200 problems: {failures} failures, worst solve-oracle gap {worst_gap:.3e}, worst KKT residual {worst_kkt:.3e}"
            ),
        ))
    })());

    push(&mut checks, "infeasible_problem_detected", (|| {
        // a <= -1 and -a <= 0 cannot both hold
        let p = QpProblem::new(
            Matrix::from_rows(1, 1, vec![1.0])?,
            Vector::new(vec![0.0]),
            Matrix::from_rows(2, 1, vec![1.0, -1.0])?,
            Vector::new(vec![-1.0, 0.0]),
        )?;
        let s = qpsolver::solve(&p, qpsolver::DEFAULT_TOL, qpsolver::DEFAULT_MAX_ITER)?;
        Ok((s.status == QpStatus::Infeasible, format!("status {:?}", s.status)))
    })());

    push(&mut checks, "never_worse_than_feasible_origin", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0516);
        let mut worst = f64::NEG_INFINITY;
        for k in 0..30 {
            let m = 1 + k % 3;
            let problem = random_psd_problem(&mut rng, m, 1 + k % 4, true);
            let s = qpsolver::solve(&problem, 1e-8, qpsolver::DEFAULT_MAX_ITER)?;
            if s.status == QpStatus::Optimal {
                let excess = problem.objective(s.a.as_slice())?
                    - problem.objective(&vec![0.0; m])?;
                worst = worst.max(excess);
            }
        }
        Ok((worst <= 1e-9, format!("worst objective excess over origin {worst:.3e}")))
    })());

    SuiteReport { suite: "qp".to_string(), checks }
}

// ---------------------------------------------------------------------------
// consensus suite
// ---------------------------------------------------------------------------

fn random_gradient_matrix(rng: &mut ChaCha8Rng, d: usize, m: usize) -> Result<GradientMatrix> {
    let cols: Vec<Vector> = (0..m)
        .map(|_| Vector::new((0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()))
        .collect();
    GradientMatrix::new(cols, (0..m).collect())
}

/// The pairwise consensus guarantee on random conflicting gradients, the
/// identity fast path, and the hand-derived minimal-deviation fixture.
pub fn consensus_suite() -> SuiteReport {
    let mut checks = Vec::new();

    push(&mut checks, "invariant_100_random_matrices", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC0DE);
        let mut worst_normalized = f64::INFINITY;
        let mut fallbacks = 0usize;
        let mut ok = true;
        for _ in 0..100 {
            let d = rng.gen_range(2..=100);
            let m = rng.gen_range(2..=20);
            let g = random_gradient_matrix(&mut rng, d, m)?;
            let res = consensus::enforce_consensus(&g, 1, 1.0)?;
            fallbacks += res.qp_fallbacks;
            for ci in res.corrected.columns() {
                let ni = numerics::norm2(ci.as_slice());
                for gj in g.columns() {
                    let nj = numerics::norm2(gj.as_slice());
                    let prod = numerics::dot(ci.as_slice(), gj.as_slice())?;
                    if prod < -1e-6 * ni * nj {
                        ok = false;
                    }
                    if ni > 0.0 && nj > 0.0 {
                        worst_normalized = worst_normalized.min(prod / (ni * nj));
                    }
                }
            }
        }
        Ok((
            ok,
            format!(
                "worst normalized pair product {worst_normalized:.3e} (bound -1e-6), {fallbacks} fallbacks"
            ),
        ))
    })());

    push(&mut checks, "identity_on_consensual_inputs", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
        for _ in 0..20 {
            let d = rng.gen_range(2..=40);
            let m = rng.gen_range(2..=10);
            // entrywise-positive vectors are pairwise consensual
            let cols: Vec<Vector> = (0..m)
                .map(|_| Vector::new((0..d).map(|_| rng.gen_range(0.01..1.0)).collect()))
                .collect();
            let g = GradientMatrix::new(cols, (0..m).collect())?;
            let res = consensus::enforce_consensus(&g, 1, 1.0)?;
            if res.corrected != g || res.max_violation != 0.0 || res.qp_fallbacks != 0 {
                return Ok((false, "consensual input was altered".to_string()));
            }
        }
        Ok((true, "20 consensual matrices passed through bit-identical".to_string()))
    })());

    push(&mut checks, "hand_fixture_minimal_deviation", (|| {
        // g1=(1,0), g2=(-1,1): the corrected g̃₁ must be (0.5, 0.5), and its
        // coefficient vector must match the grid oracle on the 2-variable QP
        let g = GradientMatrix::new(
            vec![Vector::new(vec![1.0, 0.0]), Vector::new(vec![-1.0, 1.0])],
            vec![0, 1],
        )?;
        let res = consensus::enforce_consensus(&g, 1, 1.0)?;
        let c0 = res.corrected.column(0).as_slice();
        let point_ok = (c0[0] - 0.5).abs() <= 1e-6 && (c0[1] - 0.5).abs() <= 1e-6;

        let k = numerics::gram(g.columns())?;
        let mut neg_k = Matrix::zeros(2, 2);
        for i in 0..2 {
            for j in 0..2 {
                neg_k[(i, j)] = -k[(i, j)];
            }
        }
        let qp = QpProblem::new(
            k.clone(),
            Vector::new(vec![-k[(0, 0)], -k[(1, 0)]]),
            neg_k,
            Vector::zeros(2),
        )?;
        let a0 = vec![res.coefficients[(0, 0)], res.coefficients[(1, 0)]];
        let oracle = qpsolver::brute_force_oracle(&qp, 2.0, 1e-3)?;
        let gap = qp.objective(&a0)? - oracle.objective;
        Ok((
            point_ok && gap <= 1e-3,
            format!("corrected ({:.6}, {:.6}), objective gap to oracle {gap:.3e}", c0[0], c0[1]),
        ))
    })());

    SuiteReport { suite: "consensus".to_string(), checks }
}

// ---------------------------------------------------------------------------
// descent suite and experiment fixtures
// ---------------------------------------------------------------------------

/// Model used by the descent experiment.
pub fn descent_spec() -> MlpSpec {
    MlpSpec::new(8, vec![8], 10, Activation::Tanh).expect("valid spec")
}

/// 10 clients, one class each (maximal label heterogeneity): a 10-class
/// Gaussian-blob pool sharded pathologically.
pub fn descent_clients(seed: u64) -> Result<Vec<ClientDataset>> {
    let pool = synth_dataset(10, 60, 8, 3.0, seed)?;
    pathological_partition(
        &pool,
        &PartitionSpec { num_clients: 10, classes_per_client: 1, seed },
    )
}

/// The one-step consensus configuration whose per-round descent is
/// guaranteed: full participation, full batch, one local epoch, no weight
/// decay, constant learning rate 0.01.
pub fn descent_config(rounds: usize) -> FederationConfig {
    let mut cfg = FederationConfig::new(Method::FedcomeSgd, rounds);
    cfg.local_epochs = 1;
    cfg.batch_size = 0;
    cfg.eta = 0.01;
    cfg.lr_decay = 1.0;
    cfg.weight_decay = 0.0;
    cfg.participation = Participation::Full;
    cfg.seed = 0;
    cfg
}

/// `n` clients sharing one identical dataset — every round's gradients are
/// equal, hence pairwise consensual.
pub fn identical_clients(n: usize, seed: u64) -> Result<Vec<ClientDataset>> {
    let pool = synth_dataset(3, 8, 4, 3.0, seed)?;
    Ok((0..n)
        .map(|client_id| ClientDataset {
            client_id,
            train: pool.clone(),
            test: Some(pool.clone()),
        })
        .collect())
}

/// Model for the heterogeneity benchmark.
pub fn benchmark_spec() -> MlpSpec {
    MlpSpec::new(10, vec![16], 10, Activation::Tanh).expect("valid spec")
}

/// The synthetic 10-class benchmark pool partitioned over `num_clients`
/// clients with `classes_per_client` classes each.  Separation 2.0 keeps
/// enough class overlap that cross-client gradient conflicts persist
/// throughout training.
pub fn benchmark_clients(
    num_clients: usize,
    classes_per_client: usize,
    seed: u64,
) -> Result<Vec<ClientDataset>> {
    let pool = synth_dataset(10, 120, 10, 2.0, seed)?;
    pathological_partition(
        &pool,
        &PartitionSpec { num_clients, classes_per_client, seed },
    )
}

/// Model for the class-coverage sampler benchmark.
pub fn coverage_spec() -> MlpSpec {
    MlpSpec::new(10, vec![16], 4, Activation::Tanh).expect("valid spec")
}

/// Four-class pool split one-class-per-client across 20 clients (five
/// clients per class).  A cohort of four can span every class exactly, so
/// a diversity-seeking sampler can keep the aggregate update agreeable to
/// all bystanders, while uniform sampling covers all classes only in a
/// small fraction of rounds.
pub fn coverage_clients(seed: u64) -> Result<Vec<ClientDataset>> {
    let pool = synth_dataset(4, 525, 10, 3.0, seed)?;
    pathological_partition(
        &pool,
        &PartitionSpec { num_clients: 20, classes_per_client: 1, seed },
    )
}

/// Per-client training losses at freshly initialized parameters (the state
/// before round 0), for monotonicity checks that include the first round.
pub fn initial_losses(
    spec: &MlpSpec,
    clients: &[ClientDataset],
    seed: u64,
) -> Result<Vec<f64>> {
    let params = model::init_params(spec, seed)?;
    clients
        .iter()
        .map(|c| model::loss(spec, &params, &c.train))
        .collect()
}

/// Counts loss upticks beyond `slack`, restricted to transitions where the
/// client was *not* selected in the round that caused the transition.
pub fn unselected_uptick_count(
    initial: &[f64],
    records: &[RoundRecord],
    slack: f64,
) -> usize {
    let mut prev = initial.to_vec();
    let mut count = 0usize;
    for r in records {
        for (i, (&now, &before)) in r.train_loss.iter().zip(&prev).enumerate() {
            if !r.selected.contains(&i) && now > before + slack {
                count += 1;
            }
        }
        prev = r.train_loss.clone();
    }
    count
}

fn max_param_divergence(a: &ParamVector, b: &ParamVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Per-round descent of every client under the one-step consensus method,
/// and the consensual-identity ablation against plain mean-gradient
/// descent.
pub fn descent_suite() -> SuiteReport {
    let mut checks = Vec::new();

    push(&mut checks, "per_client_and_global_monotone_200_rounds", (|| {
        let spec = descent_spec();
        let clients = descent_clients(42)?;
        let cfg = descent_config(200);
        let init = initial_losses(&spec, &clients, cfg.seed)?;
        let mut fed = Federation::new(cfg, spec, clients)?;
        let records = fed.run()?;
        let strict = metrics::monotonicity_report(Some(&init), &records, 1e-6)?;
        let zero_slack = metrics::monotonicity_report(Some(&init), &records, 0.0)?;
        let final_mean = records
            .last()
            .map(|r| r.train_loss.iter().sum::<f64>() / r.train_loss.len() as f64)
            .unwrap_or(f64::NAN);
        Ok((
            strict.is_monotone(),
            format!(
                "200 rounds: {} per-client upticks, {} global (slack 1e-6); {} / {} at slack 0; final mean loss {final_mean:.4}",
                strict.total(),
                strict.global,
                zero_slack.total(),
                zero_slack.global
            ),
        ))
    })());

    push(&mut checks, "consensual_fixture_matches_plain_sgd", (|| {
        let spec = crate::model::MlpSpec::new(4, vec![6], 3, Activation::Tanh)?;
        let clients = identical_clients(4, 6)?;
        let mut cfg_a = FederationConfig::new(Method::FedcomeSgd, 5);
        let mut cfg_b = FederationConfig::new(Method::Fedsgd, 5);
        for cfg in [&mut cfg_a, &mut cfg_b] {
            cfg.eta = 0.05;
            cfg.weight_decay = 1e-3;
            cfg.seed = 3;
        }
        let mut fa = Federation::new(cfg_a, spec.clone(), clients.clone())?;
        let mut fb = Federation::new(cfg_b, spec, clients)?;
        let mut worst = 0.0f64;
        for _ in 0..5 {
            fa.run_round()?;
            fb.run_round()?;
            worst = worst.max(max_param_divergence(fa.params(), fb.params()));
        }
        Ok((
            worst <= 1e-8,
            format!("max per-parameter trajectory divergence over 5 rounds: {worst:.3e}"),
        ))
    })());

    SuiteReport { suite: "descent".to_string(), checks }
}

// ---------------------------------------------------------------------------
// sampler suite
// ---------------------------------------------------------------------------

fn for_each_combination(n: usize, m: usize, mut f: impl FnMut(&[usize])) {
    if m > n {
        return;
    }
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        f(&idx);
        let mut k = m;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            if idx[k] != k + n - m {
                idx[k] += 1;
                for j in k + 1..m {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn random_table(rng: &mut ChaCha8Rng, n: usize) -> Result<SimilarityTable> {
    let mut t = SimilarityTable::new(n)?;
    for i in 0..n {
        for j in i + 1..n {
            t.set_pair(i, j, rng.gen_range(-1.0..1.0))?;
        }
    }
    Ok(t)
}

/// Exhaustive-enumeration checks of the annealed subset selection.
pub fn sampler_suite() -> SuiteReport {
    let mut checks = Vec::new();

    push(&mut checks, "energy_matches_enumeration_exactly", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5A);
        let table = random_table(&mut rng, 8)?;
        let mut all_exact = true;
        let mut subsets = 0usize;
        let mut err: Result<()> = Ok(());
        for_each_combination(8, 3, |subset| {
            subsets += 1;
            let mut oracle = 0.0;
            for p in 0..subset.len() {
                for q in p + 1..subset.len() {
                    oracle += table.get(subset[p], subset[q]);
                }
            }
            match sampler::subset_energy(&table, subset) {
                Ok(e) => {
                    if e != oracle {
                        all_exact = false;
                    }
                }
                Err(e) => err = Err(e),
            }
        });
        err?;
        Ok((all_exact, format!("all {subsets} C(8,3) subsets match bit-exactly")))
    })());

    push(&mut checks, "anneal_recovers_exhaustive_minimum", (|| {
        let mut successes = 0usize;
        for run in 0..100u64 {
            let n = 5 + (run as usize) % 6; // 5..=10
            let m = 2 + (run as usize) % 3; // 2..=4
            let mut rng = ChaCha8Rng::seed_from_u64(0xA11E + run);
            let table = random_table(&mut rng, n)?;
            let mut best = f64::INFINITY;
            let mut err: Result<()> = Ok(());
            for_each_combination(n, m, |subset| {
                match sampler::subset_energy(&table, subset) {
                    Ok(e) => best = best.min(e),
                    Err(e) => err = Err(e),
                }
            });
            err?;
            let mut cfg = SamplerConfig::new(m, run);
            cfg.mu = 1.0;
            let selected = sampler::anneal_select(&table, &cfg, 0)?;
            if sampler::subset_energy(&table, &selected)? == best {
                successes += 1;
            }
        }
        Ok((successes >= 95, format!("{successes}/100 runs hit the exhaustive minimum")))
    })());

    SuiteReport { suite: "sampler".to_string(), checks }
}

// ---------------------------------------------------------------------------
// gradient integrity (used by the acceptance gate; not a CLI suite)
// ---------------------------------------------------------------------------

/// Central-difference gradient check across random model configurations.
/// Returns the worst relative error observed; errors are measured as
/// `|fd − grad| / max(1, |grad|)`.
pub fn gradient_finite_difference_worst_error(
    configurations: usize,
    coords_per_config: usize,
    eps: f64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF1D);
    let mut worst = 0.0f64;
    for k in 0..configurations {
        let input_dim = rng.gen_range(3..=8);
        let depth = rng.gen_range(0..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| rng.gen_range(4..=10)).collect();
        let classes = rng.gen_range(2..=6);
        let activation = if k % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let spec = MlpSpec::new(input_dim, hidden, classes, activation)?;

        let n = rng.gen_range(5..=20);
        let mut features = Matrix::zeros(n, input_dim);
        for v in features.as_mut_slice() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let batch = crate::model::Batch::new(features, labels)?;

        let mut params = model::init_params(&spec, rng.gen())?;
        for v in params.as_mut_slice() {
            *v += rng.gen_range(-0.1..0.1);
        }
        let grad = model::grad(&spec, &params, &batch)?;
        for _ in 0..coords_per_config {
            let c = rng.gen_range(0..params.len());
            let mut plus = params.clone();
            plus.as_mut_slice()[c] += eps;
            let mut minus = params.clone();
            minus.as_mut_slice()[c] -= eps;
            let fd = (model::loss(&spec, &plus, &batch)? - model::loss(&spec, &minus, &batch)?)
                / (2.0 * eps);
            let g = grad.as_slice()[c];
            let err = (fd - g).abs() / g.abs().max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
