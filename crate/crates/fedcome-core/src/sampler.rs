//! Similarity-driven client selection.
//!
//! The server keeps a symmetric table `S` of pairwise client similarities
//! (exponential moving average of gradient cosines, updated only for pairs
//! that participated together). Selecting the round's cohort means finding
//! an `m`-subset `P` minimizing the energy
//!
//! ```text
//! H(P) = Σ_{i<j ∈ P} S[i][j]
//! ```
//!
//! i.e. preferring mutually *dissimilar* clients, which widens the data
//! coverage of each round. Minimizing `H` exactly is combinatorial, so the
//! sampler runs simulated annealing over single-swap moves with a geometric
//! temperature schedule, then blends in exploration: a fraction `1 − mu` of
//! the annealed cohort is replaced by clients drawn uniformly from everyone
//! not already kept. `mu = 1` is pure exploitation; `mu = 0` discards the
//! annealed result entirely and the selection is exactly uniform over
//! `m`-subsets.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{self, Matrix};
use crate::rng::{stream_from_parts, StreamPurpose};
use crate::GradientMatrix;

/// Symmetric pairwise similarity table, zero-initialized (unknown pairs are
/// neutral). The diagonal is unused and stays zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityTable {
    n: usize,
    s: Matrix,
}

impl SimilarityTable {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::config("similarity table: need at least one client"));
        }
        Ok(SimilarityTable { n, s: Matrix::zeros(n, n) })
    }

    pub fn num_clients(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.s[(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`; the diagonal is rejected.
    pub fn set_pair(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if i >= self.n || j >= self.n {
            return Err(Error::index(format!(
                "similarity table: pair ({i}, {j}) out of range for {} clients",
                self.n
            )));
        }
        if i == j {
            return Err(Error::index("similarity table: diagonal is not stored"));
        }
        if !value.is_finite() {
            return Err(Error::config("similarity table: non-finite value"));
        }
        self.s[(i, j)] = value;
        self.s[(j, i)] = value;
        Ok(())
    }

    /// Writes the full `n × n` table as CSV, one row per line, values in
    /// scientific notation with 17 significant digits (bit round-trip safe).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for i in 0..self.n {
            let row: Vec<String> =
                (0..self.n).map(|j| format!("{:.16e}", self.s[(i, j)])).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn dump_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parses a table written by [`SimilarityTable::write_csv`], enforcing a
    /// square shape, finite entries, exact symmetry, and a zero diagonal.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (ln, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row = Vec::new();
            for cell in line.split(',') {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    Error::format(format!("similarity csv line {}: bad value {cell:?}", ln + 1))
                })?;
                if !v.is_finite() {
                    return Err(Error::format(format!(
                        "similarity csv line {}: non-finite value",
                        ln + 1
                    )));
                }
                row.push(v);
            }
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 {
            return Err(Error::format("similarity csv: empty file"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::format(format!("similarity csv: expected {n} columns per row")));
        }
        let mut table = SimilarityTable::new(n)?;
        for i in 0..n {
            if rows[i][i] != 0.0 {
                return Err(Error::format(format!(
                    "similarity csv: nonzero diagonal at row {i}"
                )));
            }
            for j in 0..n {
                if rows[i][j] != rows[j][i] {
                    return Err(Error::format(format!(
                        "similarity csv: asymmetric at ({i}, {j})"
                    )));
                }
                table.s[(i, j)] = rows[i][j];
            }
        }
        Ok(table)
    }

    pub fn restore_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

/// Annealing and exploration knobs. `m` is the cohort size; `seed` keys the
/// sampler's private random streams (round number is mixed in per call).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    pub m: usize,
    pub mu: f64,
    pub alpha: f64,
    pub sa_iters: usize,
    pub t0: f64,
    pub temp_decay: f64,
    pub seed: u64,
}

impl SamplerConfig {
    /// Default schedule: `mu = 0.7`, `alpha = 0.5`, 600 sweeps from
    /// temperature 1.0 decaying by 0.99.
    pub fn new(m: usize, seed: u64) -> Self {
        SamplerConfig { m, mu: 0.7, alpha: 0.5, sa_iters: 600, t0: 1.0, temp_decay: 0.99, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::config("sampler.m: must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.mu) || !self.mu.is_finite() {
            return Err(Error::config("sampler.mu: must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::config("sampler.alpha: must lie in [0, 1]"));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::config("sampler.t0: must be > 0"));
        }
        if !(self.temp_decay > 0.0 && self.temp_decay <= 1.0) {
            return Err(Error::config("sampler.temp_decay: must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Energy `H(P) = Σ_{i<j} S[i][j]` over the subset, accumulated in sorted
/// index order so the value is independent of the order ids are passed in.
pub fn subset_energy(table: &SimilarityTable, subset: &[usize]) -> Result<f64> {
    let mut ids = subset.to_vec();
    ids.sort_unstable();
    for w in ids.windows(2) {
        if w[0] == w[1] {
            return Err(Error::index(format!("subset energy: duplicate client {}", w[0])));
        }
    }
    if let Some(&max) = ids.last() {
        if max >= table.n {
            return Err(Error::index(format!(
                "subset energy: client {max} out of range for {} clients",
                table.n
            )));
        }
    }
    let mut h = 0.0;
    for (p, &i) in ids.iter().enumerate() {
        for &j in &ids[p + 1..] {
            h += table.s[(i, j)];
        }
    }
    Ok(h)
}

/// Cosine similarity clamped to `[-1, 1]`. The flag reports degeneracy:
/// either vector having zero norm, in which case the value is 0.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<(f64, bool)> {
    let na = numerics::norm2(a);
    let nb = numerics::norm2(b);
    if na == 0.0 || nb == 0.0 {
        // still validates dimensions
        numerics::dot(a, b)?;
        return Ok((0.0, true));
    }
    let c = numerics::dot(a, b)? / (na * nb);
    Ok((c.clamp(-1.0, 1.0), false))
}

/// Folds this round's gradient cosines into the table:
/// `S[i][j] <- alpha·S[i][j] + (1 − alpha)·cos(g_i, g_j)` for every pair of
/// clients present in `g`. Pairs not in the cohort are untouched.
pub fn update_table(table: &mut SimilarityTable, g: &GradientMatrix, alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::config("sampler.alpha: must lie in [0, 1]"));
    }
    let ids = g.client_ids();
    if let Some(&max) = ids.iter().max() {
        if max >= table.n {
            return Err(Error::index(format!(
                "similarity update: client {max} out of range for {} clients",
                table.n
            )));
        }
    }
    for p in 0..ids.len() {
        for q in p + 1..ids.len() {
            let (cos, _) = cosine(g.column(p).as_slice(), g.column(q).as_slice())?;
            let old = table.get(ids[p], ids[q]);
            table.set_pair(ids[p], ids[q], alpha * old + (1.0 - alpha) * cos)?;
        }
    }
    Ok(())
}

/// Selects the round's cohort: anneal toward a minimum-energy `m`-subset,
/// then replace `ceil((1 − mu)·m)` members with clients drawn uniformly from
/// everyone not kept. Returns sorted client ids. Fully determined by
/// `(cfg.seed, round)`.
pub fn anneal_select(
    table: &SimilarityTable,
    cfg: &SamplerConfig,
    round: usize,
) -> Result<Vec<usize>> {
    cfg.validate()?;
    let n = table.n;
    if cfg.m > n {
        return Err(Error::config(format!(
            "sampler.m: cohort of {} from {n} clients",
            cfg.m
        )));
    }
    let m = cfg.m;
    if m == n {
        return Ok((0..n).collect());
    }

    let mut rng_sa = stream_from_parts(cfg.seed, StreamPurpose::Anneal as u64, round as u64, 0);

    // random initial m-subset
    let mut pool: Vec<usize> = (0..n).collect();
    pool.shuffle(&mut rng_sa);
    let mut current: Vec<usize> = pool[..m].to_vec();
    let mut member = vec![false; n];
    for &c in &current {
        member[c] = true;
    }
    let mut current_e = subset_energy(table, &current)?;
    let mut best = current.clone();
    let mut best_e = current_e;

    let mut temp = cfg.t0;
    for _ in 0..cfg.sa_iters {
        // propose swapping one member for one non-member
        let slot = rng_sa.gen_range(0..m);
        let out = current[slot];
        let pick = rng_sa.gen_range(0..n - m);
        let mut seen = 0usize;
        let mut inc = usize::MAX;
        for c in 0..n {
            if !member[c] {
                if seen == pick {
                    inc = c;
                    break;
                }
                seen += 1;
            }
        }
        debug_assert!(inc != usize::MAX);

        let mut delta = 0.0;
        for &c in &current {
            if c != out {
                delta += table.s[(inc, c)] - table.s[(out, c)];
            }
        }
        let accept = delta <= 0.0 || rng_sa.gen::<f64>() < (-delta / temp).exp();
        if accept {
            member[out] = false;
            member[inc] = true;
            current[slot] = inc;
            current_e += delta;
            if current_e < best_e {
                // re-derive exactly so incremental rounding cannot drift the record
                let exact = subset_energy(table, &current)?;
                if exact < best_e {
                    best = current.clone();
                    best_e = exact;
                }
            }
        }
        temp *= cfg.temp_decay;
    }

    // exploration: keep a mu-fraction of the annealed cohort, fill the rest
    // uniformly from everyone not kept (mu = 0 therefore ignores annealing
    // and draws a uniform m-subset)
    let replace = ((1.0 - cfg.mu) * m as f64).ceil() as usize;
    let replace = replace.min(m);
    let mut selected = if replace == 0 {
        best
    } else {
        let mut rng_ex =
            stream_from_parts(cfg.seed, StreamPurpose::Explore as u64, round as u64, 0);
        let mut annealed = best;
        annealed.shuffle(&mut rng_ex);
        let kept: Vec<usize> = annealed[..m - replace].to_vec();
        let mut is_kept = vec![false; n];
        for &c in &kept {
            is_kept[c] = true;
        }
        let mut candidates: Vec<usize> = (0..n).filter(|&c| !is_kept[c]).collect();
        candidates.shuffle(&mut rng_ex);
        let mut sel = kept;
        sel.extend_from_slice(&candidates[..replace]);
        sel
    };
    selected.sort_unstable();
    Ok(selected)
}
