//! Run manifests: the JSON document that fully determines one experiment.
//!
//! A manifest names one dataset source, a partition, a model, a federation
//! configuration, and an output directory. The loading pipeline is
//!
//! 1. read + parse the JSON file,
//! 2. apply `--set path=value` overrides onto the raw JSON tree,
//! 3. apply the `FEDCOME_SEED` environment variable (overrides
//!    `federation.seed`, taking precedence over `--set`),
//! 4. deserialize and validate.
//!
//! Everything up to and including validation is a usage/config failure
//! (exit 2); anything after (training, writing artifacts) is a runtime
//! failure (exit 1). [`load_manifest`]/[`build`] implement the former,
//! [`execute`] the latter.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use fedcome_core::data::{self, ClientDataset, PartitionSpec};
use fedcome_core::error::{Error, Result};
use fedcome_core::metrics;
use fedcome_core::model::{Activation, Batch, MlpSpec};
use fedcome_core::orchestrator::{Federation, FederationConfig};
use fedcome_core::sampler::SimilarityTable;

/// Environment variable that overrides `federation.seed` when set.
pub const SEED_ENV_VAR: &str = "FEDCOME_SEED";

/// Where the training pool comes from. Exactly one source per manifest,
/// enforced by the `source` tag.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Gaussian class blobs generated in-process.
    Synthetic {
        #[serde(default = "default_num_classes")]
        num_classes: usize,
        #[serde(default = "default_samples_per_class")]
        samples_per_class: usize,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Numeric CSV with a header row; one column holds the class label.
    Csv { path: PathBuf, label_column: String },
    /// IDX image/label file pair (big-endian binary format).
    Idx { images: PathBuf, labels: PathBuf },
}

fn default_num_classes() -> usize {
    10
}
fn default_samples_per_class() -> usize {
    120
}
fn default_dim() -> usize {
    10
}
fn default_separation() -> f64 {
    3.0
}

/// Dataset source plus the client partition applied to it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(flatten)]
    pub source: DatasetSource,
    pub partition: PartitionManifest,
}

/// How the pooled dataset is sharded across clients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub num_clients: usize,
    #[serde(default = "default_classes_per_client")]
    pub classes_per_client: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_classes_per_client() -> usize {
    2
}

/// Model architecture. Input width is always taken from the data; the
/// class count is derived from the labels unless pinned explicitly.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelManifest {
    pub hidden_dims: Vec<usize>,
    pub activation: Activation,
    /// Overrides the derived class count (`max label + 1`). Useful when a
    /// file-based dataset does not contain every class.
    pub num_classes: Option<usize>,
}

impl Default for ModelManifest {
    fn default() -> Self {
        ModelManifest {
            hidden_dims: vec![16],
            activation: Activation::Tanh,
            num_classes: None,
        }
    }
}

/// The complete run description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub dataset: DatasetManifest,
    #[serde(default)]
    pub model: ModelManifest,
    pub federation: FederationConfig,
    pub output_dir: PathBuf,
    /// Optional similarity-table CSV to restore before round 0.
    #[serde(default)]
    pub similarity_init: Option<PathBuf>,
}

/// A validated experiment, ready to execute.
pub struct BuiltExperiment {
    pub spec: MlpSpec,
    pub clients: Vec<ClientDataset>,
    pub cfg: FederationConfig,
    pub output_dir: PathBuf,
    pub similarity: Option<SimilarityTable>,
}

/// Parses `path=value` and writes the JSON-parsed value (falling back to a
/// string when the text is not valid JSON) at the dotted path, creating
/// intermediate objects as needed.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        Error::config(format!("--set {assignment:?}: expected path=value"))
    })?;
    let parts: Vec<&str> = path.split('.').collect();
    if path.is_empty() || parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(format!(
            "--set {assignment:?}: empty path component"
        )));
    }
    let mut cur = root;
    for part in &parts[..parts.len() - 1] {
        let obj = cur.as_object_mut().ok_or_else(|| {
            Error::config(format!(
                "--set {path}: {part:?} cannot be entered, parent is not an object"
            ))
        })?;
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Map::new()));
    }
    let leaf = parts[parts.len() - 1];
    let parsed = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
    let obj = cur.as_object_mut().ok_or_else(|| {
        Error::config(format!(
            "--set {path}: {leaf:?} cannot be set, parent is not an object"
        ))
    })?;
    obj.insert(leaf.to_string(), parsed);
    Ok(())
}

/// Applies `FEDCOME_SEED` (if set) to `federation.seed`.
pub fn apply_seed_env(root: &mut Value) -> Result<()> {
    let Ok(text) = std::env::var(SEED_ENV_VAR) else {
        return Ok(());
    };
    let seed: u64 = text.trim().parse().map_err(|_| {
        Error::config(format!(
            "{SEED_ENV_VAR}: {text:?} is not an unsigned 64-bit integer"
        ))
    })?;
    let obj = root
        .as_object_mut()
        .ok_or_else(|| Error::config("manifest: top level must be a JSON object"))?;
    let fed = obj
        .entry("federation".to_string())
        .or_insert_with(|| Value::Object(Map::new()));
    let fed = fed
        .as_object_mut()
        .ok_or_else(|| Error::config("manifest.federation: must be a JSON object"))?;
    fed.insert("seed".to_string(), Value::from(seed));
    Ok(())
}

/// Reads the manifest file and applies overrides and the seed environment
/// variable, returning the raw JSON tree (still undeserialized so sweeps
/// can mutate it per value).
pub fn load_manifest_value(path: &Path, overrides: &[String]) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::config(format!("manifest {}: {e}", path.display()))
    })?;
    let mut root: Value = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("manifest {}: {e}", path.display())))?;
    for assignment in overrides {
        apply_override(&mut root, assignment)?;
    }
    apply_seed_env(&mut root)?;
    Ok(root)
}

/// Deserializes a JSON tree into a [`RunManifest`].
pub fn manifest_from_value(root: Value) -> Result<RunManifest> {
    serde_json::from_value(root).map_err(|e| Error::config(format!("manifest: {e}")))
}

/// One-shot load for the `run` subcommand.
pub fn load_manifest(path: &Path, overrides: &[String]) -> Result<RunManifest> {
    manifest_from_value(load_manifest_value(path, overrides)?)
}

fn load_pool(source: &DatasetSource) -> Result<Batch> {
    match source {
        DatasetSource::Synthetic {
            num_classes,
            samples_per_class,
            dim,
            separation,
            seed,
        } => data::synth_dataset(*num_classes, *samples_per_class, *dim, *separation, *seed),
        DatasetSource::Csv { path, label_column } => data::load_csv(path, label_column),
        DatasetSource::Idx { images, labels } => data::load_idx(images, labels),
    }
}

/// Builds datasets and the model spec, and validates everything, without
/// touching the filesystem outside of reading dataset files. Also creates
/// `output_dir` so that an uncreatable directory surfaces as a config
/// error.
pub fn build(manifest: &RunManifest) -> Result<BuiltExperiment> {
    let pool = load_pool(&manifest.dataset.source)?;
    let part = &manifest.dataset.partition;
    let clients = data::pathological_partition(
        &pool,
        &PartitionSpec {
            num_clients: part.num_clients,
            classes_per_client: part.classes_per_client,
            seed: part.seed,
        },
    )?;
    let input_dim = pool.features.cols();
    let derived_classes = pool.labels.iter().copied().max().map_or(0, |m| m + 1);
    let num_classes = manifest.model.num_classes.unwrap_or(derived_classes);
    let spec = MlpSpec::new(
        input_dim,
        manifest.model.hidden_dims.clone(),
        num_classes,
        manifest.model.activation,
    )?;
    if let Some(max) = pool.labels.iter().copied().max() {
        if max >= num_classes {
            return Err(Error::config(format!(
                "model.num_classes: {num_classes} but dataset contains label {max}"
            )));
        }
    }
    manifest.federation.validate(clients.len())?;
    let similarity = match &manifest.similarity_init {
        None => None,
        Some(path) => {
            let table = SimilarityTable::restore_csv(path).map_err(|e| {
                Error::config(format!("similarity_init {}: {e}", path.display()))
            })?;
            if table.num_clients() != clients.len() {
                return Err(Error::config(format!(
                    "similarity_init: table is {}x{0} but the run has {} clients",
                    table.num_clients(),
                    clients.len()
                )));
            }
            Some(table)
        }
    };
    std::fs::create_dir_all(&manifest.output_dir).map_err(|e| {
        Error::config(format!(
            "output_dir {}: {e}",
            manifest.output_dir.display()
        ))
    })?;
    Ok(BuiltExperiment {
        spec,
        clients,
        cfg: manifest.federation.clone(),
        output_dir: manifest.output_dir.clone(),
        similarity,
    })
}

/// Runs a built experiment and writes `metrics.csv`, `summary.json`, and —
/// for the consensus methods, which maintain the similarity table — a
/// `similarity.csv` dump. Returns the run summary.
pub fn execute(built: BuiltExperiment) -> Result<metrics::Summary> {
    let num_clients = built.clients.len();
    let mut fed = Federation::new(built.cfg, built.spec, built.clients)?;
    if let Some(table) = built.similarity {
        fed.set_similarity_table(table)?;
    }
    let records = fed.run()?;
    metrics::write_csv_file(&records, num_clients, built.output_dir.join("metrics.csv"))?;
    let summary = metrics::summarize(&records, fed.config());
    metrics::write_summary_file(&summary, built.output_dir.join("summary.json"))?;
    if fed.config().method.uses_consensus() {
        fed.similarity_table()
            .dump_csv(built.output_dir.join("similarity.csv"))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fedcome_core::orchestrator::{Method, Participation};
    use serde_json::json;

    fn minimal_value() -> Value {
        json!({
            "dataset": {
                "source": "synthetic",
                "num_classes": 4,
                "samples_per_class": 20,
                "dim": 4,
                "partition": { "num_clients": 4, "classes_per_client": 2 }
            },
            "federation": { "method": "fedcome", "rounds": 2 },
            "output_dir": "unused"
        })
    }

    #[test]
    fn minimal_manifest_deserializes_with_defaults() {
        let m = manifest_from_value(minimal_value()).unwrap();
        assert_eq!(m.federation.method, Method::Fedcome);
        assert_eq!(m.federation.rounds, 2);
        assert_eq!(m.federation.batch_size, 50);
        assert_eq!(m.federation.eta, 0.05);
        assert_eq!(m.federation.participation, Participation::Full);
        assert_eq!(m.model.hidden_dims, vec![16]);
        assert_eq!(m.model.activation, Activation::Tanh);
        assert!(m.similarity_init.is_none());
    }

    #[test]
    fn override_sets_nested_numbers_and_strings() {
        let mut v = minimal_value();
        apply_override(&mut v, "federation.eta=0.01").unwrap();
        apply_override(&mut v, "federation.method=fedavg").unwrap();
        apply_override(&mut v, "model.hidden_dims=[8,4]").unwrap();
        apply_override(&mut v, "federation.participation.mode=partial").unwrap();
        apply_override(&mut v, "federation.participation.m=2").unwrap();
        let m = manifest_from_value(v).unwrap();
        assert_eq!(m.federation.eta, 0.01);
        assert_eq!(m.federation.method, Method::Fedavg);
        assert_eq!(m.model.hidden_dims, vec![8, 4]);
        match m.federation.participation {
            Participation::Partial { m, .. } => assert_eq!(m, 2),
            other => panic!("expected partial, got {other:?}"),
        }
    }

    #[test]
    fn override_rejects_malformed_assignments() {
        let mut v = minimal_value();
        assert!(apply_override(&mut v, "no-equals-sign").is_err());
        assert!(apply_override(&mut v, ".leading=1").is_err());
        // descending through an existing scalar is an error
        apply_override(&mut v, "federation.eta=0.01").unwrap();
        assert!(apply_override(&mut v, "federation.eta.deep=1").is_err());
    }

    #[test]
    fn build_validates_field_paths() {
        let mut v = minimal_value();
        apply_override(&mut v, "federation.eta=-1").unwrap();
        let m = manifest_from_value(v).unwrap();
        let err = build(&m).err().expect("invalid eta must be rejected").to_string();
        assert!(err.contains("federation.eta"), "message was: {err}");
    }

    #[test]
    fn build_derives_model_dimensions() {
        let mut m = manifest_from_value(minimal_value()).unwrap();
        m.output_dir = std::env::temp_dir().join("fedcome-manifest-test");
        let built = build(&m).unwrap();
        assert_eq!(built.spec.input_dim, 4);
        assert_eq!(built.spec.num_classes, 4);
        assert_eq!(built.clients.len(), 4);
    }

    #[test]
    fn seed_env_parse_failure_names_the_variable() {
        // Set/unset in one thread; test binaries run tests in parallel, so
        // use a dedicated guard value unlikely to collide.
        std::env::set_var(SEED_ENV_VAR, "not-a-number");
        let mut v = minimal_value();
        let err = apply_seed_env(&mut v).unwrap_err().to_string();
        std::env::remove_var(SEED_ENV_VAR);
        assert!(err.contains(SEED_ENV_VAR), "message was: {err}");
    }
}
