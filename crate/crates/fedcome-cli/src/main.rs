//! `fedcome` — deterministic federated-learning experiments from JSON
//! manifests.
//!
//! Subcommands:
//!
//! - `run <manifest>`: execute one experiment; writes `metrics.csv` and
//!   `summary.json` (plus `similarity.csv` for the consensus methods) into
//!   the manifest's `output_dir`.
//! - `verify <suite>`: run a built-in property suite (`qp`, `consensus`,
//!   `descent`, `sampler`); prints one `[PASS]`/`[FAIL]` line per check.
//! - `sweep <manifest> --param <p> --values <v,..>`: one sequential run per
//!   value in `output_dir/<param>=<value>/`, plus `sweep.csv` summarizing
//!   all completed runs.
//!
//! `--set path=value` overrides any manifest field by dotted path; the
//! `FEDCOME_SEED` environment variable overrides `federation.seed` and wins
//! over `--set`. Exit codes: 0 success, 1 runtime failure, 2 usage or
//! configuration error.

mod manifest;

use std::fmt::Display;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use fedcome_core::metrics::{fmt_g17, Summary};
use fedcome_core::verify;

#[derive(Parser)]
#[command(
    name = "fedcome",
    version,
    about = "Deterministic federated-learning simulator with consensus-corrected aggregation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment described by a JSON manifest.
    Run {
        /// Path to the manifest file.
        manifest: PathBuf,
        /// Override a manifest field by dotted path, e.g. federation.eta=0.01.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
    /// Run a built-in verification suite.
    Verify {
        /// One of: qp, consensus, descent, sampler.
        suite: String,
    },
    /// Run the manifest once per value of one swept parameter.
    Sweep {
        /// Path to the base manifest file.
        manifest: PathBuf,
        /// One of: alpha, mu, participation_ratio, classes_per_client.
        #[arg(long)]
        param: String,
        /// Comma-separated list of values to sweep over.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        /// Override a base-manifest field by dotted path.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
}

/// A command failure carrying its process exit code.
struct Failure {
    code: u8,
    message: String,
}

/// Usage or configuration error (exit 2).
fn usage(e: impl Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

/// Runtime failure after successful validation (exit 1).
fn runtime(e: impl Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run { manifest, set } => cmd_run(&manifest, &set),
        Cmd::Verify { suite } => cmd_verify(&suite),
        Cmd::Sweep { manifest, param, values, set } => {
            cmd_sweep(&manifest, &param, &values, &set)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_run(path: &std::path::Path, overrides: &[String]) -> Result<(), Failure> {
    let m = manifest::load_manifest(path, overrides).map_err(usage)?;
    let built = manifest::build(&m).map_err(usage)?;
    let rounds = built.cfg.rounds;
    let summary = manifest::execute(built).map_err(runtime)?;
    println!(
        "run complete: {rounds} rounds, final weighted accuracy {:.4} -> {}",
        summary.final_weighted_acc,
        m.output_dir.display()
    );
    Ok(())
}

fn cmd_verify(suite: &str) -> Result<(), Failure> {
    let report = verify::run_suite(suite).ok_or_else(|| {
        usage(format!(
            "unknown suite {suite:?}; expected one of: {}",
            verify::SUITE_NAMES.join(", ")
        ))
    })?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(runtime(format!("suite {suite} failed")))
    }
}

const SWEEP_PARAMS: [&str; 4] = ["alpha", "mu", "participation_ratio", "classes_per_client"];

/// The parsed form of one swept value, validated before any run starts.
enum Swept {
    Float(f64),
    Int(usize),
}

fn parse_swept(param: &str, raw: &str) -> Result<Swept, Failure> {
    match param {
        "classes_per_client" => raw
            .trim()
            .parse::<usize>()
            .map(Swept::Int)
            .map_err(|_| usage(format!("--values: {raw:?} is not a positive integer"))),
        "participation_ratio" => {
            let v: f64 = raw
                .trim()
                .parse()
                .map_err(|_| usage(format!("--values: {raw:?} is not a number")))?;
            if !(v > 0.0 && v <= 1.0) {
                return Err(usage(format!(
                    "--values: participation_ratio {raw:?} must lie in (0, 1]"
                )));
            }
            Ok(Swept::Float(v))
        }
        _ => raw
            .trim()
            .parse::<f64>()
            .map(Swept::Float)
            .map_err(|_| usage(format!("--values: {raw:?} is not a number"))),
    }
}

/// Applies one swept value to a manifest JSON tree.
fn apply_swept(tree: &mut Value, param: &str, value: &Swept, num_clients: usize) {
    let set = |tree: &mut Value, path: &[&str], v: Value| {
        let mut cur = tree;
        for p in &path[..path.len() - 1] {
            cur = cur
                .as_object_mut()
                .expect("manifest tree validated as objects")
                .entry(p.to_string())
                .or_insert_with(|| Value::Object(serde_json::Map::new()));
        }
        cur.as_object_mut()
            .expect("manifest tree validated as objects")
            .insert(path[path.len() - 1].to_string(), v);
    };
    match (param, value) {
        ("alpha", Swept::Float(v)) => {
            set(tree, &["federation", "sampler", "alpha"], Value::from(*v));
        }
        ("mu", Swept::Float(v)) => {
            set(tree, &["federation", "sampler", "mu"], Value::from(*v));
        }
        ("classes_per_client", Swept::Int(v)) => {
            set(
                tree,
                &["dataset", "partition", "classes_per_client"],
                Value::from(*v),
            );
        }
        ("participation_ratio", Swept::Float(v)) => {
            let m = ((v * num_clients as f64).ceil() as usize).clamp(1, num_clients);
            let sampler = tree
                .pointer("/federation/participation/sampler")
                .cloned()
                .unwrap_or_else(|| Value::from("anneal"));
            set(tree, &["federation", "participation", "mode"], Value::from("partial"));
            set(tree, &["federation", "participation", "m"], Value::from(m));
            set(tree, &["federation", "participation", "sampler"], sampler);
        }
        _ => unreachable!("param/value kinds are matched in parse_swept"),
    }
}

fn cmd_sweep(
    path: &std::path::Path,
    param: &str,
    values: &[String],
    overrides: &[String],
) -> Result<(), Failure> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(usage(format!(
            "unknown sweep parameter {param:?}; expected one of: {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    let values: Vec<&str> = values
        .iter()
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(usage("--values: at least one value is required"));
    }
    let base = manifest::load_manifest_value(path, overrides).map_err(usage)?;
    let base_manifest = manifest::manifest_from_value(base.clone()).map_err(usage)?;
    let base_out = base_manifest.output_dir.clone();
    let num_clients = base_manifest.dataset.partition.num_clients;
    let parsed: Vec<Swept> = values
        .iter()
        .map(|v| parse_swept(param, v))
        .collect::<Result<_, _>>()?;

    let mut rows: Vec<(String, Summary)> = Vec::new();
    let mut failures = 0usize;
    for (raw, value) in values.iter().zip(&parsed) {
        let mut tree = base.clone();
        let sub_dir = base_out.join(format!("{param}={raw}"));
        apply_swept(&mut tree, param, value, num_clients);
        if let Some(obj) = tree.as_object_mut() {
            obj.insert(
                "output_dir".to_string(),
                Value::from(sub_dir.to_string_lossy().into_owned()),
            );
        }
        let outcome = manifest::manifest_from_value(tree)
            .and_then(|m| manifest::build(&m))
            .and_then(manifest::execute);
        match outcome {
            Ok(summary) => {
                println!(
                    "sweep {param}={raw}: final weighted accuracy {:.4}",
                    summary.final_weighted_acc
                );
                rows.push((raw.to_string(), summary));
            }
            Err(e) => {
                eprintln!("sweep {param}={raw}: {e}");
                failures += 1;
            }
        }
    }

    std::fs::create_dir_all(&base_out)
        .map_err(|e| runtime(format!("output_dir {}: {e}", base_out.display())))?;
    let sweep_csv = base_out.join("sweep.csv");
    let mut f = std::fs::File::create(&sweep_csv)
        .map_err(|e| runtime(format!("{}: {e}", sweep_csv.display())))?;
    let write = (|| -> std::io::Result<()> {
        writeln!(
            f,
            "param,value,final_weighted_acc,mean_final_acc,acc_std,total_violations"
        )?;
        for (raw, s) in &rows {
            writeln!(
                f,
                "{param},{raw},{},{},{},{}",
                fmt_g17(s.final_weighted_acc),
                fmt_g17(s.mean_final_acc),
                fmt_g17(s.acc_std),
                s.total_violations
            )?;
        }
        Ok(())
    })();
    write.map_err(|e| runtime(format!("{}: {e}", sweep_csv.display())))?;

    if failures > 0 {
        return Err(runtime(format!(
            "{failures} of {} sweep runs failed",
            values.len()
        )));
    }
    println!("sweep complete: {} runs -> {}", rows.len(), base_out.display());
    Ok(())
}
