//! Dataset generation, partitioning, and loaders.
//!
//! Three sources feed the simulator: synthetic Gaussian blobs (the default
//! for experiments and tests), IDX image/label pairs (MNIST-style binary
//! files), and numeric CSV with a header row. All sources produce a single
//! pooled [`Batch`] which [`pathological_partition`] then splits across
//! clients the hard way: samples are sorted by label, cut into `N·C` equal
//! shards (remainder appended to the last shard), and each client is dealt
//! `C` shards via a seeded shuffle. With balanced classes and aligned shard
//! boundaries every client sees at most `C` distinct labels, which is the
//! heterogeneity knob: smaller `C` means more pathological splits.
//!
//! Each client's samples are divided 6:1 into train/test by deterministic
//! round-robin (every 7th sample, positions 6, 13, 20, … becomes test).

use byteorder::{BigEndian, ReadBytesExt};
use rand::Rng;
use rand_distr::StandardNormal;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Batch;
use crate::numerics::{Matrix, Vector};
use crate::rng::stream_from_parts;

/// IDX magic numbers (big-endian): unsigned-byte tensors of rank 3 and 1.
const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// How to split a pooled dataset across clients.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PartitionSpec {
    pub num_clients: usize,
    pub classes_per_client: usize,
    pub seed: u64,
}

/// One client's local data. `test` is `None` when the client holds fewer
/// than 7 samples and the round-robin split yields no test rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub train: Batch,
    pub test: Option<Batch>,
}

impl ClientDataset {
    pub fn train_len(&self) -> usize {
        self.train.len()
    }

    pub fn test_len(&self) -> usize {
        self.test.as_ref().map_or(0, |b| b.len())
    }
}

/// Generates `num_classes · samples_per_class` Gaussian blob samples.
///
/// Class `c` is centered at `separation · u_c` where `u_c` is a seeded unit
/// direction, with unit isotropic noise around the center. Samples are laid
/// out class-major (all of class 0, then class 1, …). Deterministic in
/// `seed`.
pub fn synth_dataset(
    num_classes: usize,
    samples_per_class: usize,
    dim: usize,
    separation: f64,
    seed: u64,
) -> Result<Batch> {
    if num_classes < 2 {
        return Err(Error::config("synthetic.num_classes: must be >= 2"));
    }
    if samples_per_class == 0 {
        return Err(Error::config("synthetic.samples_per_class: must be >= 1"));
    }
    if dim == 0 {
        return Err(Error::config("synthetic.dim: must be >= 1"));
    }
    if !(separation >= 0.0) {
        return Err(Error::config("synthetic.separation: must be >= 0"));
    }

    // one stream for the class directions, one per class for its samples
    let mut dir_rng = stream_from_parts(seed, 0x6469_7273, 0, 0);
    let mut means = Vec::with_capacity(num_classes);
    for _ in 0..num_classes {
        let mut u: Vec<f64> = (0..dim).map(|_| dir_rng.sample(StandardNormal)).collect();
        let mut n = crate::numerics::norm2(&u);
        while n < 1e-12 {
            u = (0..dim).map(|_| dir_rng.sample(StandardNormal)).collect();
            n = crate::numerics::norm2(&u);
        }
        for v in u.iter_mut() {
            *v *= separation / n;
        }
        means.push(u);
    }

    let n_total = num_classes * samples_per_class;
    let mut features = Vec::with_capacity(n_total * dim);
    let mut labels = Vec::with_capacity(n_total);
    for (c, mean) in means.iter().enumerate() {
        let mut rng = stream_from_parts(seed, 0x7361_6d70, c as u64, 0);
        for _ in 0..samples_per_class {
            for m in mean {
                let z: f64 = rng.sample(StandardNormal);
                features.push(m + z);
            }
            labels.push(c);
        }
    }
    Batch::new(Matrix::from_rows(n_total, dim, features)?, labels)
}

/// Label-sharded pathological split; see the module docs for the scheme.
///
/// Errors when the pool is too small for `N·C` non-empty shards or when
/// `classes_per_client` exceeds the number of distinct labels present.
pub fn pathological_partition(
    full: &Batch,
    spec: &PartitionSpec,
) -> Result<Vec<ClientDataset>> {
    if spec.num_clients == 0 {
        return Err(Error::config("partition.num_clients: must be >= 1"));
    }
    if spec.classes_per_client == 0 {
        return Err(Error::config("partition.classes_per_client: must be >= 1"));
    }
    let mut distinct: Vec<usize> = full.labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if spec.classes_per_client > distinct.len() {
        return Err(Error::config(format!(
            "partition.classes_per_client: {} exceeds {} distinct labels",
            spec.classes_per_client,
            distinct.len()
        )));
    }

    let num_shards = spec.num_clients * spec.classes_per_client;
    let shard_size = full.len() / num_shards;
    if shard_size == 0 {
        return Err(Error::config(format!(
            "partition: {} samples cannot fill {num_shards} shards",
            full.len()
        )));
    }

    // sort sample indices by label (stable, so ties keep source order)
    let mut order: Vec<usize> = (0..full.len()).collect();
    order.sort_by_key(|&i| full.labels[i]);

    // cut into num_shards shards; the division remainder goes to the last
    let mut shards: Vec<&[usize]> = Vec::with_capacity(num_shards);
    for s in 0..num_shards {
        let start = s * shard_size;
        let end = if s + 1 == num_shards { full.len() } else { start + shard_size };
        shards.push(&order[start..end]);
    }

    // deal C shards per client via a seeded shuffle of shard ids
    let mut shard_ids: Vec<usize> = (0..num_shards).collect();
    let mut rng = stream_from_parts(spec.seed, 0x7368_6172, 0, 0);
    rand::seq::SliceRandom::shuffle(&mut shard_ids[..], &mut rng);

    let mut clients = Vec::with_capacity(spec.num_clients);
    for client_id in 0..spec.num_clients {
        let mut indices = Vec::new();
        for k in 0..spec.classes_per_client {
            let shard = shard_ids[client_id * spec.classes_per_client + k];
            indices.extend_from_slice(shards[shard]);
        }
        // 6:1 round-robin split: every 7th local position is test
        let mut train_idx = Vec::with_capacity(indices.len());
        let mut test_idx = Vec::new();
        for (p, &i) in indices.iter().enumerate() {
            if p % 7 == 6 {
                test_idx.push(i);
            } else {
                train_idx.push(i);
            }
        }
        let train = full.subset(&train_idx)?;
        let test = if test_idx.is_empty() {
            None
        } else {
            Some(full.subset(&test_idx)?)
        };
        clients.push(ClientDataset { client_id, train, test });
    }
    Ok(clients)
}

fn read_u32_be(r: &mut impl Read, what: &str) -> Result<u32> {
    r.read_u32::<BigEndian>()
        .map_err(|_| Error::format(format!("truncated IDX header while reading {what}")))
}

/// Loads an IDX image/label file pair into one pooled batch.
///
/// Pixels are scaled to `[0,1]` by dividing by 255. Errors on wrong magic
/// numbers, image/label count mismatch, or truncation.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Batch> {
    let mut img = std::io::BufReader::new(std::fs::File::open(images_path)?);
    let magic = read_u32_be(&mut img, "image magic")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::format(format!(
            "bad IDX image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&mut img, "image count")? as usize;
    let rows = read_u32_be(&mut img, "image rows")? as usize;
    let cols = read_u32_be(&mut img, "image cols")? as usize;
    let mut pixels = vec![0u8; count * rows * cols];
    img.read_exact(&mut pixels)
        .map_err(|_| Error::format("truncated IDX image data"))?;

    let mut lbl = std::io::BufReader::new(std::fs::File::open(labels_path)?);
    let magic = read_u32_be(&mut lbl, "label magic")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::format(format!(
            "bad IDX label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let label_count = read_u32_be(&mut lbl, "label count")? as usize;
    if label_count != count {
        return Err(Error::format(format!(
            "IDX count mismatch: {count} images vs {label_count} labels"
        )));
    }
    let mut raw_labels = vec![0u8; label_count];
    lbl.read_exact(&mut raw_labels)
        .map_err(|_| Error::format("truncated IDX label data"))?;

    let features: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    Batch::new(Matrix::from_rows(count, rows * cols, features)?, labels)
}

/// Loads a numeric CSV with a header row. The named column provides labels
/// (values must be non-negative integers); all other columns are features in
/// header order.
pub fn load_csv(path: &Path, label_column: &str) -> Result<Batch> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::format(format!("cannot read csv: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::format(format!("cannot read csv header: {e}")))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            Error::format(format!("label column {label_column:?} not found in header"))
        })?;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::format(format!("csv row {}: {e}", line + 2)))?;
        if record.len() != headers.len() {
            return Err(Error::format(format!(
                "csv row {}: {} fields, header has {}",
                line + 2,
                record.len(),
                headers.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                Error::format(format!(
                    "csv row {}, column {:?}: non-numeric value {field:?}",
                    line + 2,
                    &headers[col]
                ))
            })?;
            if col == label_idx {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::format(format!(
                        "csv row {}: label {value} is not a non-negative integer",
                        line + 2
                    )));
                }
                labels.push(value as usize);
            } else {
                features.push(value);
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::format("csv has a header but no data rows"));
    }
    Batch::new(
        Matrix::from_rows(rows, headers.len() - 1, features)?,
        labels,
    )
}

/// Mean distance of class-`c` samples to each estimated class center; used
/// by tests as a crude separability oracle.
fn class_means(batch: &Batch, num_classes: usize) -> Vec<Vector> {
    let dim = batch.features.cols();
    let mut sums = vec![vec![0.0; dim]; num_classes];
    let mut counts = vec![0usize; num_classes];
    for (i, &y) in batch.labels.iter().enumerate() {
        counts[y] += 1;
        for (s, x) in sums[y].iter_mut().zip(batch.features.row(i)) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(mut s, n)| {
            if n > 0 {
                for v in s.iter_mut() {
                    *v /= n as f64;
                }
            }
            Vector::new(s)
        })
        .collect()
}

/// Nearest-estimated-mean classification accuracy; test oracle only.
#[doc(hidden)]
pub fn nearest_mean_accuracy(batch: &Batch, num_classes: usize) -> f64 {
    let means = class_means(batch, num_classes);
    let mut correct = 0usize;
    for (i, &y) in batch.labels.iter().enumerate() {
        let x = batch.features.row(i);
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (c, m) in means.iter().enumerate() {
            let mut d = 0.0;
            for (xv, mv) in x.iter().zip(m.as_slice()) {
                d += (xv - mv) * (xv - mv);
            }
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        if best == y {
            correct += 1;
        }
    }
    correct as f64 / batch.len() as f64
}
