//! Experiment logging and analysis.
//!
//! The CSV log has one row per round with the schema
//!
//! ```text
//! round,weighted_acc,max_violation,mean_drift,qp_fallbacks,loss_c0,…,loss_c{N-1},acc_c0,…,acc_c{N-1}
//! ```
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every finite `f64` bit-exactly; identical runs
//! therefore produce byte-identical files. Wall-clock time is deliberately
//! not serialized.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::orchestrator::{FederationConfig, RoundRecord};

/// Scientific notation with 17 significant digits: parses back to the same
/// bits for every finite `f64`.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_header(num_clients: usize) -> String {
    let mut cols = vec![
        "round".to_string(),
        "weighted_acc".to_string(),
        "max_violation".to_string(),
        "mean_drift".to_string(),
        "qp_fallbacks".to_string(),
    ];
    for i in 0..num_clients {
        cols.push(format!("loss_c{i}"));
    }
    for i in 0..num_clients {
        cols.push(format!("acc_c{i}"));
    }
    cols.join(",")
}

/// Writes the round log as CSV.
pub fn write_csv<W: Write>(
    records: &[RoundRecord],
    num_clients: usize,
    mut w: W,
) -> Result<()> {
    writeln!(w, "{}", csv_header(num_clients))?;
    for r in records {
        if r.train_loss.len() != num_clients || r.test_acc.len() != num_clients {
            return Err(Error::dimension(format!(
                "csv: round {} has {} losses / {} accuracies, expected {num_clients}",
                r.round,
                r.train_loss.len(),
                r.test_acc.len()
            )));
        }
        let mut cols = vec![
            r.round.to_string(),
            fmt_g17(r.weighted_acc),
            fmt_g17(r.max_violation),
            fmt_g17(r.mean_drift),
            r.qp_fallbacks.to_string(),
        ];
        cols.extend(r.train_loss.iter().map(|&v| fmt_g17(v)));
        cols.extend(r.test_acc.iter().map(|&v| fmt_g17(v)));
        writeln!(w, "{}", cols.join(","))?;
    }
    Ok(())
}

/// The CSV log as an in-memory string.
pub fn csv_string(records: &[RoundRecord], num_clients: usize) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(records, num_clients, &mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::format("csv: non-utf8 output"))
}

pub fn write_csv_file<P: AsRef<Path>>(
    records: &[RoundRecord],
    num_clients: usize,
    path: P,
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_csv(records, num_clients, std::io::BufWriter::new(f))
}

/// One parsed CSV row; the fields a log row carries (selection and timing
/// are not serialized).
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRound {
    pub round: usize,
    pub weighted_acc: f64,
    pub max_violation: f64,
    pub mean_drift: f64,
    pub qp_fallbacks: usize,
    pub train_loss: Vec<f64>,
    pub test_acc: Vec<f64>,
}

/// Parses a log written by [`write_csv`]; the client count is recovered
/// from the header.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<CsvRound>> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("csv: empty file"))??;
    let names: Vec<&str> = header.trim_end().split(',').collect();
    let fixed = ["round", "weighted_acc", "max_violation", "mean_drift", "qp_fallbacks"];
    if names.len() < fixed.len() || names[..fixed.len()] != fixed {
        return Err(Error::format(format!("csv: unexpected header {header:?}")));
    }
    let rest = names.len() - fixed.len();
    if rest % 2 != 0 {
        return Err(Error::format("csv: unpaired loss/acc columns"));
    }
    let n = rest / 2;
    for i in 0..n {
        if names[fixed.len() + i] != format!("loss_c{i}")
            || names[fixed.len() + n + i] != format!("acc_c{i}")
        {
            return Err(Error::format(format!("csv: unexpected header {header:?}")));
        }
    }

    let parse_f = |cell: &str, line: usize| -> Result<f64> {
        cell.parse::<f64>()
            .map_err(|_| Error::format(format!("csv line {line}: bad float {cell:?}")))
    };
    let mut out = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ln = k + 2;
        let cells: Vec<&str> = line.trim_end().split(',').collect();
        if cells.len() != names.len() {
            return Err(Error::format(format!(
                "csv line {ln}: {} columns, expected {}",
                cells.len(),
                names.len()
            )));
        }
        let round: usize = cells[0]
            .parse()
            .map_err(|_| Error::format(format!("csv line {ln}: bad round {:?}", cells[0])))?;
        let qp_fallbacks: usize = cells[4]
            .parse()
            .map_err(|_| Error::format(format!("csv line {ln}: bad count {:?}", cells[4])))?;
        let mut row = CsvRound {
            round,
            weighted_acc: parse_f(cells[1], ln)?,
            max_violation: parse_f(cells[2], ln)?,
            mean_drift: parse_f(cells[3], ln)?,
            qp_fallbacks,
            train_loss: Vec::with_capacity(n),
            test_acc: Vec::with_capacity(n),
        };
        for i in 0..n {
            row.train_loss.push(parse_f(cells[5 + i], ln)?);
        }
        for i in 0..n {
            row.test_acc.push(parse_f(cells[5 + n + i], ln)?);
        }
        out.push(row);
    }
    Ok(out)
}

pub fn read_csv_file<P: AsRef<Path>>(path: P) -> Result<Vec<CsvRound>> {
    let f = std::fs::File::open(path)?;
    read_csv(std::io::BufReader::new(f))
}

/// End-of-run digest written as `summary.json`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Summary {
    /// Weighted accuracy after the final round (0 for empty runs).
    pub final_weighted_acc: f64,
    /// Unweighted mean of the final per-client accuracies.
    pub mean_final_acc: f64,
    /// Population standard deviation of the final per-client accuracies.
    pub acc_std: f64,
    /// Number of rounds whose aggregation inputs still held a negative
    /// pairwise product.
    pub total_violations: usize,
    pub config_snapshot: FederationConfig,
}

pub fn summarize(records: &[RoundRecord], config: &FederationConfig) -> Summary {
    let (final_weighted_acc, mean_final_acc, acc_std) = match records.last() {
        None => (0.0, 0.0, 0.0),
        Some(last) => {
            let n = last.test_acc.len() as f64;
            let mean = last.test_acc.iter().sum::<f64>() / n;
            let var =
                last.test_acc.iter().map(|&a| (a - mean) * (a - mean)).sum::<f64>() / n;
            (last.weighted_acc, mean, var.sqrt())
        }
    };
    let total_violations = records.iter().filter(|r| r.max_violation < 0.0).count();
    Summary {
        final_weighted_acc,
        mean_final_acc,
        acc_std,
        total_violations,
        config_snapshot: config.clone(),
    }
}

pub fn write_summary_file<P: AsRef<Path>>(summary: &Summary, path: P) -> Result<()> {
    let json = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::format(format!("summary json: {e}")))?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// A completed run: the config it was launched with plus every round.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentLog {
    pub config: FederationConfig,
    pub num_clients: usize,
    pub records: Vec<RoundRecord>,
}

impl ExperimentLog {
    pub fn new(
        config: FederationConfig,
        num_clients: usize,
        records: Vec<RoundRecord>,
    ) -> Self {
        ExperimentLog { config, num_clients, records }
    }

    pub fn summary(&self) -> Summary {
        summarize(&self.records, &self.config)
    }

    pub fn write_csv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_csv_file(&self.records, self.num_clients, path)
    }

    pub fn write_summary_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        write_summary_file(&self.summary(), path)
    }
}

/// Histogram of final accuracies over `bins` equal-width bins on `[0, 1]`;
/// an accuracy of exactly 1.0 lands in the last bin.
pub fn fairness_histogram(accs: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::config("fairness histogram: bins must be >= 1"));
    }
    let mut hist = vec![0usize; bins];
    for &a in accs {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::config(format!(
                "fairness histogram: accuracy {a} outside [0, 1]"
            )));
        }
        let bin = ((a * bins as f64).floor() as usize).min(bins - 1);
        hist[bin] += 1;
    }
    Ok(hist)
}

/// Counts of loss increases beyond `slack` between consecutive checkpoints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonotonicityReport {
    /// Per-client uptick counts.
    pub per_client: Vec<usize>,
    /// Upticks of the across-client mean loss.
    pub global: usize,
}

impl MonotonicityReport {
    pub fn is_monotone(&self) -> bool {
        self.global == 0 && self.per_client.iter().all(|&c| c == 0)
    }

    pub fn total(&self) -> usize {
        self.per_client.iter().sum()
    }
}

/// Checks a sequence of per-client loss snapshots (outer index = time). Each
/// snapshot must have the same number of clients.
pub fn monotonicity_from_losses(rows: &[Vec<f64>], slack: f64) -> Result<MonotonicityReport> {
    if rows.is_empty() {
        return Ok(MonotonicityReport { per_client: Vec::new(), global: 0 });
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::dimension("monotonicity: ragged loss rows"));
    }
    let mut per_client = vec![0usize; n];
    let mut global = 0usize;
    for w in rows.windows(2) {
        for i in 0..n {
            if w[1][i] > w[0][i] + slack {
                per_client[i] += 1;
            }
        }
        let m0 = w[0].iter().sum::<f64>() / n as f64;
        let m1 = w[1].iter().sum::<f64>() / n as f64;
        if m1 > m0 + slack {
            global += 1;
        }
    }
    Ok(MonotonicityReport { per_client, global })
}

/// [`monotonicity_from_losses`] over the training losses of a round log,
/// optionally prefixed by the losses at the initial parameters so the first
/// round's transition is also checked.
pub fn monotonicity_report(
    initial_loss: Option<&[f64]>,
    records: &[RoundRecord],
    slack: f64,
) -> Result<MonotonicityReport> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(records.len() + 1);
    if let Some(init) = initial_loss {
        rows.push(init.to_vec());
    }
    rows.extend(records.iter().map(|r| r.train_loss.clone()));
    monotonicity_from_losses(&rows, slack)
}
