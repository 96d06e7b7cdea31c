//! The nine contract-level acceptance checks. Each test prints one
//! PASS/FAIL line with the measured values (visible with
//! `cargo test -- --nocapture`, and in the panic message on failure).

use std::time::Instant;

use fedcome_core::metrics;
use fedcome_core::orchestrator::{
    run_experiment, FederationConfig, Method, Participation, PartialSampler,
};
use fedcome_core::verify;

fn finish(criterion: usize, title: &str, passed: bool, detail: String) {
    let line = format!("criterion {criterion} ({title}): {detail}");
    assert!(passed, "[FAIL] {line}");
    println!("[PASS] {line}");
}

fn suite_check(report: &fedcome_core::SuiteReport, name: &str) -> (bool, String) {
    let check = report
        .checks
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"));
    (check.passed, check.detail.clone())
}

#[test]
fn criterion_1_consensus_invariant() {
    let start = Instant::now();
    let report = verify::consensus_suite();
    let (passed, detail) = suite_check(&report, "invariant_100_random_matrices");
    let elapsed = start.elapsed().as_secs_f64();
    finish(
        1,
        "consensus invariant",
        passed && elapsed < 30.0,
        format!("{detail}; {elapsed:.1}s (limit 30s)"),
    );
}

#[test]
fn criterion_2_qp_correctness() {
    let start = Instant::now();
    let report = verify::qp_suite();
    let (fixtures_ok, fixtures_detail) = suite_check(&report, "hand_fixtures_exact");
    let (battery_ok, battery_detail) = suite_check(&report, "battery_200_oracle_and_kkt");
    let elapsed = start.elapsed().as_secs_f64();
    finish(
        2,
        "qp correctness",
        fixtures_ok && battery_ok && elapsed < 60.0,
        format!("{battery_detail}; {fixtures_detail}; {elapsed:.1}s (limit 60s)"),
    );
}

#[test]
fn criterion_3_per_round_descent() {
    let start = Instant::now();
    let report = verify::descent_suite();
    let (passed, detail) = suite_check(&report, "per_client_and_global_monotone_200_rounds");
    let elapsed = start.elapsed().as_secs_f64();
    finish(
        3,
        "per-round descent",
        passed && elapsed < 300.0,
        format!("{detail}; {elapsed:.1}s (limit 300s)"),
    );
}

#[test]
fn criterion_4_identity_on_consensual() {
    let report = verify::descent_suite();
    let (passed, detail) = suite_check(&report, "consensual_fixture_matches_plain_sgd");
    finish(4, "identity on consensual fixtures", passed, detail);
}

// One full-batch gradient step per client per round: the regime in which
// the consensus correction acts on the true per-client risk gradients.
fn benchmark_config(method: Method, seed: u64) -> FederationConfig {
    let mut cfg = FederationConfig::new(method, 150);
    cfg.local_epochs = 1;
    cfg.batch_size = 0;
    cfg.eta = 0.05;
    cfg.eta_g = 1.0;
    cfg.lr_decay = 0.998;
    cfg.weight_decay = 1e-3;
    cfg.seed = seed;
    cfg
}

#[test]
fn criterion_5_heterogeneity_benefit() {
    let start = Instant::now();
    let spec = verify::benchmark_spec();
    let mut fedcome_accs = Vec::new();
    let mut fedavg_accs = Vec::new();
    for seed in 0..3u64 {
        let clients = verify::benchmark_clients(20, 2, seed).unwrap();
        for (method, out) in [
            (Method::Fedcome, &mut fedcome_accs),
            (Method::Fedavg, &mut fedavg_accs),
        ] {
            let records = run_experiment(
                benchmark_config(method, seed),
                spec.clone(),
                clients.clone(),
            )
            .unwrap();
            out.push(records.last().unwrap().weighted_acc);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (fc, fa) = (mean(&fedcome_accs), mean(&fedavg_accs));
    let gain_pp = (fc - fa) * 100.0;
    let elapsed = start.elapsed().as_secs_f64();
    finish(
        5,
        "heterogeneity benefit",
        gain_pp >= 2.0 && elapsed < 600.0,
        format!(
            "mean final weighted acc over 3 seeds: consensus {fc:.4} vs plain weighted averaging {fa:.4} (gain {gain_pp:+.2} pp, need >= +2); fedcome runs {fedcome_accs:?}, fedavg runs {fedavg_accs:?}; {elapsed:.1}s (limit 600s)"
        ),
    );
}

#[test]
fn criterion_6_sampler_optimality() {
    let report = verify::sampler_suite();
    let (energy_ok, energy_detail) = suite_check(&report, "energy_matches_enumeration_exactly");
    let (anneal_ok, anneal_detail) = suite_check(&report, "anneal_recovers_exhaustive_minimum");
    finish(
        6,
        "sampler optimality",
        energy_ok && anneal_ok,
        format!("{anneal_detail}; {energy_detail}"),
    );
}

#[test]
fn criterion_7_partial_participation_benefit() {
    let start = Instant::now();
    let spec = verify::coverage_spec();
    let mut acc = [Vec::new(), Vec::new()]; // [anneal, random]
    let mut upticks = [0usize, 0usize];
    for seed in 0..3u64 {
        let clients = verify::coverage_clients(seed).unwrap();
        let init = verify::initial_losses(&spec, &clients, seed).unwrap();
        for (slot, sampler) in [(0, PartialSampler::Anneal), (1, PartialSampler::Random)] {
            let mut cfg = benchmark_config(Method::Fedcome, seed);
            cfg.participation = Participation::Partial { m: 4, sampler };
            // Full retention: once the annealer has found a class-spanning
            // cohort, keeping it is exactly what protects bystanders.
            cfg.sampler.mu = 1.0;
            let records = run_experiment(cfg, spec.clone(), clients.clone()).unwrap();
            acc[slot].push(records.last().unwrap().weighted_acc);
            upticks[slot] += verify::unselected_uptick_count(&init, &records, 1e-4);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (anneal_acc, random_acc) = (mean(&acc[0]), mean(&acc[1]));
    let acc_ok = anneal_acc >= random_acc - 0.005;
    let uptick_ok = (upticks[0] as f64) <= 0.20 * upticks[1] as f64;
    let elapsed = start.elapsed().as_secs_f64();
    finish(
        7,
        "annealed partial participation",
        acc_ok && uptick_ok && elapsed < 600.0,
        format!(
            "mean final weighted acc: anneal {anneal_acc:.4} vs random {random_acc:.4} (non-inferiority margin 0.5 pp); unselected-client upticks over 3 seeds at slack 1e-4: anneal {} vs random {} (need <= 20%); {elapsed:.1}s",
            upticks[0], upticks[1]
        ),
    );
}

#[test]
fn criterion_8_gradient_integrity() {
    let worst = verify::gradient_finite_difference_worst_error(10, 50, 1e-5).unwrap();
    finish(
        8,
        "gradient integrity",
        worst <= 1e-5,
        format!("worst central-difference relative error over 10 configs x 50 coords: {worst:.3e} (limit 1e-5)"),
    );
}

#[test]
fn criterion_9_byte_identical_reruns() {
    let spec = verify::benchmark_spec();
    let clients = verify::benchmark_clients(20, 2, 0).unwrap();
    let cfg = benchmark_config(Method::Fedcome, 0);
    let run = |cfg: FederationConfig| {
        let records = run_experiment(cfg, spec.clone(), clients.clone()).unwrap();
        metrics::csv_string(&records, 20).unwrap()
    };
    let first = run(cfg.clone());
    let second = run(cfg);
    finish(
        9,
        "byte-identical reruns",
        first == second && !first.is_empty(),
        format!(
            "two identically configured 150-round runs produced identical {}-byte CSV logs",
            first.len()
        ),
    );
}
