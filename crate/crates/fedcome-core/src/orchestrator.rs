//! Federated training loop.
//!
//! One round: select a cohort, run local training on each selected client
//! from the shared parameters, optionally correct the resulting update
//! directions for consensus, apply the aggregated direction on the server,
//! decay the local learning rate, then evaluate every client on the new
//! parameters.
//!
//! Four methods share the loop:
//!
//! * `fedcome` — clients run `local_epochs` of minibatch SGD; the update
//!   directions are the pseudo-gradients `theta_start − theta_end`; the
//!   server corrects them for consensus and applies the uniform mean scaled
//!   by `eta_g`.
//! * `fedavg` — same local training, no correction; the server applies the
//!   sample-size-weighted mean scaled by `eta_g`.
//! * `fedsgd` — clients send one full-batch gradient; the server applies
//!   the uniform mean scaled by the (decaying) local rate `eta_t`.
//! * `fedcome_sgd` — `fedsgd` plus consensus correction, the one-step
//!   variant with the per-round descent guarantee. Like `fedsgd` it
//!   requires full participation.
//!
//! All randomness flows from `FederationConfig::seed` through labelled
//! ChaCha streams, so runs are bitwise reproducible.

use std::time::Instant;

use rand::seq::SliceRandom;

use crate::consensus::{self, GradientMatrix};
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::model::{self, Batch, MlpSpec, ParamVector};
use crate::numerics::{self, Vector};
use crate::rng::{mix_seed, stream_from_parts, RngHub, StreamPurpose};
use crate::sampler::{self, SamplerConfig, SimilarityTable};

const SAMPLER_SEED_SALT: u64 = 0x7361_6d70; // "samp"
const LOCAL_SEED_SALT: u64 = 0x6c6f_6361; // "loca"

/// Aggregation method run by the server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fedcome,
    Fedavg,
    Fedsgd,
    FedcomeSgd,
}

impl Method {
    pub fn uses_consensus(self) -> bool {
        matches!(self, Method::Fedcome | Method::FedcomeSgd)
    }

    /// The one-step gradient methods aggregate raw gradients with the local
    /// rate; their analysis (and the descent guarantee) assumes every
    /// client contributes every round.
    pub fn requires_full_participation(self) -> bool {
        matches!(self, Method::Fedsgd | Method::FedcomeSgd)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Fedcome => "fedcome",
            Method::Fedavg => "fedavg",
            Method::Fedsgd => "fedsgd",
            Method::FedcomeSgd => "fedcome_sgd",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How a partial cohort is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialSampler {
    /// Similarity-table simulated annealing (see [`crate::sampler`]).
    #[default]
    Anneal,
    /// Uniformly random `m`-subset each round.
    Random,
}

/// Cohort policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Participation {
    Full,
    Partial {
        m: usize,
        #[serde(default)]
        sampler: PartialSampler,
    },
}

/// Annealing-sampler knobs carried by the federation config. Cohort size
/// and seed are supplied by `participation` and `seed`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    pub mu: f64,
    pub alpha: f64,
    pub sa_iters: usize,
    pub t0: f64,
    pub temp_decay: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings { mu: 0.7, alpha: 0.5, sa_iters: 600, t0: 1.0, temp_decay: 0.99 }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mu) || !self.mu.is_finite() {
            return Err(Error::config("federation.sampler.mu: must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha) || !self.alpha.is_finite() {
            return Err(Error::config("federation.sampler.alpha: must lie in [0, 1]"));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::config("federation.sampler.t0: must be > 0"));
        }
        if !(self.temp_decay > 0.0 && self.temp_decay <= 1.0) {
            return Err(Error::config("federation.sampler.temp_decay: must lie in (0, 1]"));
        }
        Ok(())
    }

    fn to_sampler_config(&self, m: usize, seed: u64) -> SamplerConfig {
        SamplerConfig {
            m,
            mu: self.mu,
            alpha: self.alpha,
            sa_iters: self.sa_iters,
            t0: self.t0,
            temp_decay: self.temp_decay,
            seed,
        }
    }
}

fn default_local_epochs() -> usize {
    1
}
fn default_batch_size() -> usize {
    50
}
fn default_eta() -> f64 {
    0.05
}
fn default_eta_g() -> f64 {
    1.0
}
fn default_lr_decay() -> f64 {
    0.998
}
fn default_weight_decay() -> f64 {
    1e-3
}
fn default_participation() -> Participation {
    Participation::Full
}

/// Full experiment configuration (everything except the model and data).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FederationConfig {
    pub method: Method,
    pub rounds: usize,
    #[serde(default = "default_local_epochs")]
    pub local_epochs: usize,
    /// Minibatch size for local training; 0 means full batch.
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Local learning rate `eta_0`, decayed by `lr_decay` each round.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Server step scale for the multi-step methods (fedcome, fedavg).
    #[serde(default = "default_eta_g")]
    pub eta_g: f64,
    #[serde(default = "default_lr_decay")]
    pub lr_decay: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_participation")]
    pub participation: Participation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sampler: SamplerSettings,
}

impl FederationConfig {
    /// Config with the given method and round count, everything else at the
    /// documented defaults.
    pub fn new(method: Method, rounds: usize) -> Self {
        FederationConfig {
            method,
            rounds,
            local_epochs: default_local_epochs(),
            batch_size: default_batch_size(),
            eta: default_eta(),
            eta_g: default_eta_g(),
            lr_decay: default_lr_decay(),
            weight_decay: default_weight_decay(),
            participation: default_participation(),
            seed: 0,
            sampler: SamplerSettings::default(),
        }
    }

    pub fn validate(&self, num_clients: usize) -> Result<()> {
        if num_clients == 0 {
            return Err(Error::config("federation: need at least one client"));
        }
        if self.local_epochs == 0 {
            return Err(Error::config("federation.local_epochs: must be >= 1"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::config("federation.eta: must be > 0"));
        }
        if !(self.eta_g > 0.0) || !self.eta_g.is_finite() {
            return Err(Error::config("federation.eta_g: must be > 0"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::config("federation.lr_decay: must lie in (0, 1]"));
        }
        if !(self.weight_decay >= 0.0) || !self.weight_decay.is_finite() {
            return Err(Error::config("federation.weight_decay: must be >= 0"));
        }
        match self.participation {
            Participation::Full => {}
            Participation::Partial { m, .. } => {
                if self.method.requires_full_participation() {
                    return Err(Error::config(format!(
                        "federation.participation: {} requires full participation",
                        self.method
                    )));
                }
                if m == 0 || m > num_clients {
                    return Err(Error::config(format!(
                        "federation.participation.m: cohort of {m} from {num_clients} clients"
                    )));
                }
            }
        }
        self.sampler.validate()
    }
}

/// Everything produced by one round. `wall_time_ms` is the only
/// nondeterministic field and is excluded from serialized output.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// Round index, 0-based.
    pub round: usize,
    /// Sorted ids of the clients that trained this round.
    pub selected: Vec<usize>,
    /// Training loss of every client at the *post-round* parameters.
    pub train_loss: Vec<f64>,
    /// Test accuracy of every client at the post-round parameters
    /// (0 for clients without a test split).
    pub test_acc: Vec<f64>,
    /// Test accuracies weighted by training-set sizes.
    pub weighted_acc: f64,
    /// Most negative update-direction inner product left after this round's
    /// aggregation inputs were formed (0 when none are negative).
    pub max_violation: f64,
    /// Mean per-client consensus drift (0 for methods without correction).
    pub mean_drift: f64,
    /// QP fallbacks taken this round.
    pub qp_fallbacks: usize,
    pub wall_time_ms: f64,
}

/// Local training outcome for one client.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalOutcome {
    /// `theta_start − theta_end`: the direction the client wants the server
    /// to move in, pre-scaled by its local steps.
    pub pseudo_gradient: Vector,
    /// Full training-set loss at the final local parameters.
    pub final_loss: f64,
    /// Number of SGD steps taken.
    pub steps: usize,
}

/// Runs `epochs` of minibatch SGD from `start` and reports the
/// pseudo-gradient. `batch_size` 0 (or ≥ the dataset) means full batch.
/// Gradients include the additive weight-decay term `wd·theta`. Minibatch
/// order is a fresh seeded shuffle per epoch; fully determined by `seed`.
pub fn local_train(
    spec: &MlpSpec,
    start: &ParamVector,
    train: &Batch,
    epochs: usize,
    batch_size: usize,
    eta: f64,
    weight_decay: f64,
    seed: u64,
) -> Result<LocalOutcome> {
    if epochs == 0 {
        return Err(Error::config("local_train: epochs must be >= 1"));
    }
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::config("local_train: eta must be >= 0"));
    }
    if !(weight_decay >= 0.0) || !weight_decay.is_finite() {
        return Err(Error::config("local_train: weight_decay must be >= 0"));
    }
    let n = train.len();
    let full_batch = batch_size == 0 || batch_size >= n;
    let mut theta = start.clone();
    let mut steps = 0usize;
    for epoch in 0..epochs {
        if full_batch {
            let mut g = model::grad(spec, &theta, train)?;
            if weight_decay > 0.0 {
                numerics::axpy(weight_decay, theta.as_slice(), g.as_mut_slice())?;
            }
            numerics::axpy(-eta, g.as_slice(), theta.as_mut_slice())?;
            steps += 1;
        } else {
            let mut order: Vec<usize> = (0..n).collect();
            let mut rng =
                stream_from_parts(seed, StreamPurpose::Shuffle as u64, epoch as u64, 0);
            order.shuffle(&mut rng);
            for chunk in order.chunks(batch_size) {
                let batch = train.subset(chunk)?;
                let mut g = model::grad(spec, &theta, &batch)?;
                if weight_decay > 0.0 {
                    numerics::axpy(weight_decay, theta.as_slice(), g.as_mut_slice())?;
                }
                numerics::axpy(-eta, g.as_slice(), theta.as_mut_slice())?;
                steps += 1;
            }
        }
    }
    let pseudo_gradient = start.sub(&theta)?;
    pseudo_gradient.assert_finite("pseudo-gradient");
    let final_loss = model::loss(spec, &theta, train)?;
    Ok(LocalOutcome { pseudo_gradient, final_loss, steps })
}

/// Mean of `accs` weighted by `sizes` (all sizes must be positive).
pub fn weighted_accuracy(accs: &[f64], sizes: &[f64]) -> Result<f64> {
    if accs.is_empty() || accs.len() != sizes.len() {
        return Err(Error::dimension(format!(
            "weighted accuracy: {} accuracies vs {} sizes",
            accs.len(),
            sizes.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &s) in accs.iter().zip(sizes) {
        if !(s > 0.0) {
            return Err(Error::config("weighted accuracy: sizes must be positive"));
        }
        num += a * s;
        den += s;
    }
    Ok(num / den)
}

/// A running federated experiment: shared parameters, per-client data, the
/// similarity table, and the round counter. Advance it round by round via
/// [`Federation::run_round`] or to completion via [`Federation::run`].
#[derive(Debug, Clone)]
pub struct Federation {
    cfg: FederationConfig,
    spec: MlpSpec,
    clients: Vec<ClientDataset>,
    params: ParamVector,
    table: SimilarityTable,
    hub: RngHub,
    round: usize,
    eta_t: f64,
    train_sizes: Vec<f64>,
}

impl Federation {
    pub fn new(
        cfg: FederationConfig,
        spec: MlpSpec,
        clients: Vec<ClientDataset>,
    ) -> Result<Self> {
        spec.validate()?;
        cfg.validate(clients.len())?;
        for (i, c) in clients.iter().enumerate() {
            if c.client_id != i {
                return Err(Error::config(format!(
                    "federation clients: expected id {i} at position {i}, found {}",
                    c.client_id
                )));
            }
            for (name, batch) in [("train", Some(&c.train)), ("test", c.test.as_ref())] {
                if let Some(b) = batch {
                    if b.features.cols() != spec.input_dim {
                        return Err(Error::config(format!(
                            "federation clients: client {i} {name} features have dim {}, model expects {}",
                            b.features.cols(),
                            spec.input_dim
                        )));
                    }
                    if let Some(&bad) =
                        b.labels.iter().find(|&&l| l >= spec.num_classes)
                    {
                        return Err(Error::config(format!(
                            "federation clients: client {i} {name} label {bad} out of range for {} classes",
                            spec.num_classes
                        )));
                    }
                }
            }
        }
        let params = model::init_params(&spec, cfg.seed)?;
        let table = SimilarityTable::new(clients.len())?;
        let hub = RngHub::new(cfg.seed);
        let eta_t = cfg.eta;
        let train_sizes: Vec<f64> = clients.iter().map(|c| c.train_len() as f64).collect();
        Ok(Federation { cfg, spec, clients, params, table, hub, round: 0, eta_t, train_sizes })
    }

    pub fn config(&self) -> &FederationConfig {
        &self.cfg
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn current_eta(&self) -> f64 {
        self.eta_t
    }

    pub fn num_clients(&self) -> usize {
        self.clients.len()
    }

    pub fn similarity_table(&self) -> &SimilarityTable {
        &self.table
    }

    /// Replaces the similarity table (e.g. restored from a CSV dump so a
    /// new run starts from previously learned similarities).
    pub fn set_similarity_table(&mut self, table: SimilarityTable) -> Result<()> {
        if table.num_clients() != self.clients.len() {
            return Err(Error::config(format!(
                "similarity table: {} clients, federation has {}",
                table.num_clients(),
                self.clients.len()
            )));
        }
        self.table = table;
        Ok(())
    }

    fn select(&self, round: usize) -> Result<Vec<usize>> {
        let n = self.clients.len();
        match self.cfg.participation {
            Participation::Full => Ok((0..n).collect()),
            Participation::Partial { m, sampler: PartialSampler::Random } => {
                let mut ids: Vec<usize> = (0..n).collect();
                let mut rng = self.hub.stream(StreamPurpose::Select, round as u64, 0);
                ids.shuffle(&mut rng);
                let mut sel = ids[..m].to_vec();
                sel.sort_unstable();
                Ok(sel)
            }
            Participation::Partial { m, sampler: PartialSampler::Anneal } => {
                let seed = mix_seed(&[self.cfg.seed, SAMPLER_SEED_SALT]);
                let cfg = self.cfg.sampler.to_sampler_config(m, seed);
                sampler::anneal_select(&self.table, &cfg, round)
            }
        }
    }

    /// Runs one round and advances the internal state.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        let started = Instant::now();
        let t = self.round;
        let selected = self.select(t)?;

        // local phase: one update direction per selected client
        let mut directions = Vec::with_capacity(selected.len());
        let mut total_steps = 0usize;
        for &i in &selected {
            let client = &self.clients[i];
            match self.cfg.method {
                Method::Fedcome | Method::Fedavg => {
                    let seed = mix_seed(&[self.cfg.seed, LOCAL_SEED_SALT, t as u64, i as u64]);
                    let out = local_train(
                        &self.spec,
                        &self.params,
                        &client.train,
                        self.cfg.local_epochs,
                        self.cfg.batch_size,
                        self.eta_t,
                        self.cfg.weight_decay,
                        seed,
                    )?;
                    total_steps += out.steps;
                    directions.push(out.pseudo_gradient);
                }
                Method::Fedsgd | Method::FedcomeSgd => {
                    let mut g = model::grad(&self.spec, &self.params, &client.train)?;
                    if self.cfg.weight_decay > 0.0 {
                        numerics::axpy(
                            self.cfg.weight_decay,
                            self.params.as_slice(),
                            g.as_mut_slice(),
                        )?;
                    }
                    total_steps += 1;
                    directions.push(g.values().clone());
                }
            }
        }
        let g = GradientMatrix::new(directions, selected.clone())?;

        // server phase: optional consensus correction, then one step
        let (direction, max_violation, mean_drift, qp_fallbacks) = if self.cfg.method.uses_consensus()
        {
            sampler::update_table(&mut self.table, &g, self.cfg.sampler.alpha)?;
            let (k_local, drift_eta) = match self.cfg.method {
                Method::FedcomeSgd => (1, 1.0),
                _ => {
                    let mean_steps =
                        (total_steps as f64 / selected.len() as f64).ceil() as usize;
                    (mean_steps.max(1), self.eta_t)
                }
            };
            let res = consensus::enforce_consensus(&g, k_local, drift_eta)?;
            let agg = consensus::aggregate(&res.corrected)?;
            let drift_mean =
                res.drift.as_slice().iter().sum::<f64>() / res.drift.len() as f64;
            (agg, res.max_violation, drift_mean, res.qp_fallbacks)
        } else {
            let viol = consensus::consensus_violations(&g)?;
            let worst = viol.iter().map(|v| v.2).fold(0.0f64, f64::min);
            let agg = match self.cfg.method {
                Method::Fedavg => {
                    let sizes: Vec<f64> =
                        selected.iter().map(|&i| self.train_sizes[i]).collect();
                    consensus::aggregate_weighted(&g, &sizes)?
                }
                _ => consensus::aggregate(&g)?,
            };
            (agg, worst, 0.0, 0)
        };

        let step_scale = match self.cfg.method {
            Method::Fedcome | Method::Fedavg => self.cfg.eta_g,
            Method::Fedsgd | Method::FedcomeSgd => self.eta_t,
        };
        numerics::axpy(-step_scale, direction.as_slice(), self.params.as_mut_slice())?;
        self.params.values().assert_finite("server parameters");
        self.eta_t *= self.cfg.lr_decay;

        // evaluation phase: every client, at the new parameters
        let mut train_loss = Vec::with_capacity(self.clients.len());
        let mut test_acc = Vec::with_capacity(self.clients.len());
        for c in &self.clients {
            train_loss.push(model::loss(&self.spec, &self.params, &c.train)?);
            let acc = match &c.test {
                Some(b) => model::accuracy(&self.spec, &self.params, b)?,
                None => 0.0,
            };
            test_acc.push(acc);
        }
        let weighted_acc = weighted_accuracy(&test_acc, &self.train_sizes)?;

        self.round += 1;
        Ok(RoundRecord {
            round: t,
            selected,
            train_loss,
            test_acc,
            weighted_acc,
            max_violation,
            mean_drift,
            qp_fallbacks,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Runs the remaining configured rounds.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let mut records = Vec::new();
        while self.round < self.cfg.rounds {
            records.push(self.run_round()?);
        }
        Ok(records)
    }
}

/// Builds a [`Federation`] and runs it to completion.
pub fn run_experiment(
    cfg: FederationConfig,
    spec: MlpSpec,
    clients: Vec<ClientDataset>,
) -> Result<Vec<RoundRecord>> {
    let mut fed = Federation::new(cfg, spec, clients)?;
    fed.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{pathological_partition, synth_dataset, PartitionSpec};
    use crate::model::Activation;

    fn tiny_spec() -> MlpSpec {
        MlpSpec::new(4, vec![6], 3, Activation::Tanh).unwrap()
    }

    fn tiny_clients(n: usize, classes_per_client: usize, seed: u64) -> Vec<ClientDataset> {
        let pool = synth_dataset(3, 21, 4, 3.0, seed).unwrap();
        pathological_partition(
            &pool,
            &PartitionSpec { num_clients: n, classes_per_client, seed },
        )
        .unwrap()
    }

    fn identical_clients(n: usize, seed: u64) -> Vec<ClientDataset> {
        let pool = synth_dataset(3, 8, 4, 3.0, seed).unwrap();
        (0..n)
            .map(|client_id| ClientDataset {
                client_id,
                train: pool.clone(),
                test: Some(pool.clone()),
            })
            .collect()
    }

    fn records_match(a: &RoundRecord, b: &RoundRecord) -> bool {
        a.round == b.round
            && a.selected == b.selected
            && a.train_loss == b.train_loss
            && a.test_acc == b.test_acc
            && a.weighted_acc == b.weighted_acc
            && a.max_violation == b.max_violation
            && a.mean_drift == b.mean_drift
            && a.qp_fallbacks == b.qp_fallbacks
    }

    #[test]
    fn zero_eta_local_training_goes_nowhere() {
        let spec = tiny_spec();
        let start = model::init_params(&spec, 7).unwrap();
        let pool = synth_dataset(3, 5, 4, 2.0, 1).unwrap();
        let out = local_train(&spec, &start, &pool, 2, 4, 0.0, 1e-3, 9).unwrap();
        assert!(out.pseudo_gradient.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(out.final_loss, model::loss(&spec, &start, &pool).unwrap());
    }

    #[test]
    fn one_full_batch_epoch_matches_the_gradient_algebra() {
        let spec = tiny_spec();
        let start = model::init_params(&spec, 3).unwrap();
        let pool = synth_dataset(3, 5, 4, 2.0, 2).unwrap();
        let (eta, wd) = (0.1, 0.01);
        let out = local_train(&spec, &start, &pool, 1, 0, eta, wd, 0).unwrap();
        assert_eq!(out.steps, 1);
        let mut expected = model::grad(&spec, &start, &pool).unwrap();
        numerics::axpy(wd, start.as_slice(), expected.as_mut_slice()).unwrap();
        for (p, e) in out.pseudo_gradient.as_slice().iter().zip(expected.as_slice()) {
            assert!((p - eta * e).abs() <= 1e-12, "{p} vs {}", eta * e);
        }
    }

    #[test]
    fn minibatch_step_count_covers_the_dataset() {
        let spec = tiny_spec();
        let start = model::init_params(&spec, 3).unwrap();
        let pool = synth_dataset(3, 5, 4, 2.0, 2).unwrap(); // 15 samples
        let out = local_train(&spec, &start, &pool, 2, 4, 0.05, 0.0, 5).unwrap();
        assert_eq!(out.steps, 8); // 2 epochs x ceil(15/4)
        let repeat = local_train(&spec, &start, &pool, 2, 4, 0.05, 0.0, 5).unwrap();
        assert_eq!(out, repeat);
        let other_seed = local_train(&spec, &start, &pool, 2, 4, 0.05, 0.0, 6).unwrap();
        assert_ne!(out.pseudo_gradient, other_seed.pseudo_gradient);
    }

    #[test]
    fn weighted_accuracy_examples() {
        assert_eq!(weighted_accuracy(&[1.0, 0.0], &[3.0, 1.0]).unwrap(), 0.75);
        assert_eq!(weighted_accuracy(&[0.5], &[10.0]).unwrap(), 0.5);
        assert!(weighted_accuracy(&[1.0], &[0.0]).is_err());
        assert!(weighted_accuracy(&[1.0, 0.0], &[1.0]).is_err());
        assert!(weighted_accuracy(&[], &[]).is_err());
    }

    #[test]
    fn config_defaults_fill_in_from_minimal_json() {
        let cfg: FederationConfig =
            serde_json::from_str(r#"{"method": "fedcome", "rounds": 3}"#).unwrap();
        assert_eq!(cfg.method, Method::Fedcome);
        assert_eq!(cfg.rounds, 3);
        assert_eq!(cfg.local_epochs, 1);
        assert_eq!(cfg.batch_size, 50);
        assert_eq!(cfg.eta, 0.05);
        assert_eq!(cfg.eta_g, 1.0);
        assert_eq!(cfg.lr_decay, 0.998);
        assert_eq!(cfg.weight_decay, 1e-3);
        assert_eq!(cfg.participation, Participation::Full);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.sampler, SamplerSettings::default());

        let partial: FederationConfig = serde_json::from_str(
            r#"{"method": "fedavg", "rounds": 1,
                "participation": {"mode": "partial", "m": 2, "sampler": "anneal"}}"#,
        )
        .unwrap();
        assert_eq!(
            partial.participation,
            Participation::Partial { m: 2, sampler: PartialSampler::Anneal }
        );
    }

    #[test]
    fn validation_names_the_failing_field() {
        let mut cfg = FederationConfig::new(Method::Fedcome, 1);
        cfg.eta = 0.0;
        let msg = cfg.validate(3).unwrap_err().to_string();
        assert!(msg.contains("federation.eta"), "{msg}");

        let mut cfg = FederationConfig::new(Method::Fedsgd, 1);
        cfg.participation = Participation::Partial { m: 1, sampler: PartialSampler::Random };
        let msg = cfg.validate(3).unwrap_err().to_string();
        assert!(msg.contains("federation.participation"), "{msg}");

        let mut cfg = FederationConfig::new(Method::Fedavg, 1);
        cfg.participation = Participation::Partial { m: 9, sampler: PartialSampler::Random };
        let msg = cfg.validate(3).unwrap_err().to_string();
        assert!(msg.contains("federation.participation.m"), "{msg}");

        let mut cfg = FederationConfig::new(Method::Fedcome, 1);
        cfg.sampler.mu = 1.5;
        let msg = cfg.validate(3).unwrap_err().to_string();
        assert!(msg.contains("federation.sampler.mu"), "{msg}");
    }

    #[test]
    fn federation_rejects_mismatched_clients() {
        let cfg = FederationConfig::new(Method::Fedcome, 1);
        let spec = tiny_spec();
        // wrong feature dimension
        let wide = synth_dataset(3, 4, 5, 2.0, 0).unwrap();
        let clients =
            vec![ClientDataset { client_id: 0, train: wide, test: None }];
        assert!(Federation::new(cfg.clone(), spec.clone(), clients).is_err());
        // ids must be 0..n in order
        let pool = synth_dataset(3, 4, 4, 2.0, 0).unwrap();
        let clients = vec![ClientDataset { client_id: 1, train: pool, test: None }];
        assert!(Federation::new(cfg, spec, clients).is_err());
    }

    #[test]
    fn learning_rate_decays_per_round() {
        let mut cfg = FederationConfig::new(Method::Fedsgd, 3);
        cfg.eta = 0.1;
        cfg.lr_decay = 0.5;
        cfg.weight_decay = 0.0;
        let mut fed = Federation::new(cfg, tiny_spec(), identical_clients(2, 0)).unwrap();
        fed.run().unwrap();
        assert!((fed.current_eta() - 0.1 * 0.125).abs() <= 1e-15);
    }

    #[test]
    fn fedavg_with_unit_server_rate_is_classical_fedavg() {
        // two clients, one full-batch epoch: theta' must equal
        // theta − sum_i w_i · eta · (grad_i + wd·theta)
        let spec = tiny_spec();
        let mut cfg = FederationConfig::new(Method::Fedavg, 1);
        cfg.local_epochs = 1;
        cfg.batch_size = 0;
        cfg.eta = 0.05;
        cfg.eta_g = 1.0;
        cfg.weight_decay = 1e-3;
        let clients = tiny_clients(3, 1, 4);
        let sizes: Vec<f64> = clients.iter().map(|c| c.train_len() as f64).collect();
        let total: f64 = sizes.iter().sum();

        let mut fed = Federation::new(cfg.clone(), spec.clone(), clients.clone()).unwrap();
        let theta0 = fed.params().clone();
        fed.run_round().unwrap();

        let mut expected = theta0.values().clone().into_vec();
        for (c, &sz) in clients.iter().zip(&sizes) {
            let mut g = model::grad(&spec, &theta0, &c.train).unwrap();
            numerics::axpy(cfg.weight_decay, theta0.as_slice(), g.as_mut_slice()).unwrap();
            numerics::axpy(-cfg.eta * sz / total, g.as_slice(), &mut expected).unwrap();
        }
        for (a, b) in fed.params().as_slice().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn fedsgd_takes_the_mean_gradient_step() {
        let spec = tiny_spec();
        let mut cfg = FederationConfig::new(Method::Fedsgd, 1);
        cfg.eta = 0.07;
        cfg.weight_decay = 0.0;
        let clients = tiny_clients(3, 1, 8);

        let mut fed = Federation::new(cfg.clone(), spec.clone(), clients.clone()).unwrap();
        let theta0 = fed.params().clone();
        fed.run_round().unwrap();

        let mut expected = theta0.values().clone().into_vec();
        for c in &clients {
            let g = model::grad(&spec, &theta0, &c.train).unwrap();
            numerics::axpy(-cfg.eta / 3.0, g.as_slice(), &mut expected).unwrap();
        }
        for (a, b) in fed.params().as_slice().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn fedcome_sgd_is_bitwise_fedsgd_when_clients_agree() {
        let spec = tiny_spec();
        let clients = identical_clients(4, 6);
        let mut a = FederationConfig::new(Method::FedcomeSgd, 3);
        let mut b = FederationConfig::new(Method::Fedsgd, 3);
        for cfg in [&mut a, &mut b] {
            cfg.eta = 0.05;
            cfg.weight_decay = 1e-3;
        }
        let mut fa = Federation::new(a, spec.clone(), clients.clone()).unwrap();
        let mut fb = Federation::new(b, spec, clients).unwrap();
        for _ in 0..3 {
            let ra = fa.run_round().unwrap();
            let rb = fb.run_round().unwrap();
            assert_eq!(fa.params(), fb.params());
            assert!(records_match(&ra, &rb));
            assert_eq!(ra.qp_fallbacks, 0);
            assert_eq!(ra.max_violation, 0.0);
        }
    }

    #[test]
    fn full_runs_are_bitwise_reproducible() {
        let mut cfg = FederationConfig::new(Method::Fedcome, 4);
        cfg.batch_size = 8;
        cfg.local_epochs = 2;
        cfg.participation = Participation::Partial { m: 2, sampler: PartialSampler::Anneal };
        let run1 =
            run_experiment(cfg.clone(), tiny_spec(), tiny_clients(3, 1, 11)).unwrap();
        let run2 = run_experiment(cfg, tiny_spec(), tiny_clients(3, 1, 11)).unwrap();
        assert_eq!(run1.len(), 4);
        for (a, b) in run1.iter().zip(&run2) {
            assert!(records_match(a, b));
        }
    }

    #[test]
    fn zero_round_run_is_empty_and_leaves_params_at_init() {
        let cfg = FederationConfig::new(Method::Fedcome, 0);
        let spec = tiny_spec();
        let mut fed = Federation::new(cfg, spec.clone(), tiny_clients(3, 1, 2)).unwrap();
        let init = model::init_params(&spec, 0).unwrap();
        assert_eq!(fed.params(), &init);
        assert!(fed.run().unwrap().is_empty());
        assert_eq!(fed.params(), &init);
    }

    #[test]
    fn round_records_have_the_right_shape() {
        let mut cfg = FederationConfig::new(Method::Fedavg, 2);
        cfg.participation = Participation::Partial { m: 2, sampler: PartialSampler::Random };
        let records = run_experiment(cfg, tiny_spec(), tiny_clients(4, 1, 3)).unwrap();
        for (t, r) in records.iter().enumerate() {
            assert_eq!(r.round, t);
            assert_eq!(r.selected.len(), 2);
            assert!(r.selected.windows(2).all(|w| w[0] < w[1]));
            assert!(r.selected.iter().all(|&i| i < 4));
            assert_eq!(r.train_loss.len(), 4);
            assert_eq!(r.test_acc.len(), 4);
            assert!(r.test_acc.iter().all(|&a| (0.0..=1.0).contains(&a)));
            assert!((0.0..=1.0).contains(&r.weighted_acc));
            assert!(r.max_violation <= 0.0);
        }
    }

    #[test]
    fn similarity_table_updates_only_for_consensus_methods() {
        let mut cfg = FederationConfig::new(Method::Fedavg, 2);
        cfg.participation = Participation::Partial { m: 2, sampler: PartialSampler::Anneal };
        let mut fed = Federation::new(cfg, tiny_spec(), tiny_clients(4, 1, 3)).unwrap();
        fed.run().unwrap();
        let t = fed.similarity_table();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(t.get(i, j), 0.0);
            }
        }

        let cfg = FederationConfig::new(Method::Fedcome, 2);
        let mut fed = Federation::new(cfg, tiny_spec(), tiny_clients(4, 1, 3)).unwrap();
        fed.run().unwrap();
        let t = fed.similarity_table();
        let touched = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j)
            .any(|(i, j)| t.get(i, j) != 0.0);
        assert!(touched);
    }

    #[test]
    fn unselected_clients_leave_no_trace_on_parameters() {
        // two federations identical except client 3's data; while 3 has
        // never been selected the parameter trajectories must agree bitwise.
        // scan a few seeds so at least one run starts without client 3
        let spec = tiny_spec();
        let base = tiny_clients(4, 1, 9);
        let mut tampered = base.clone();
        for v in tampered[3].train.features.as_mut_slice() {
            *v *= -2.5;
        }

        let mut checked_rounds = 0usize;
        for seed in 0..10u64 {
            let mut cfg = FederationConfig::new(Method::Fedcome, 6);
            cfg.participation =
                Participation::Partial { m: 1, sampler: PartialSampler::Random };
            cfg.batch_size = 0;
            cfg.seed = seed;
            let mut fa = Federation::new(cfg.clone(), spec.clone(), base.clone()).unwrap();
            let mut fb = Federation::new(cfg, spec.clone(), tampered.clone()).unwrap();
            for _ in 0..6 {
                let ra = fa.run_round().unwrap();
                let rb = fb.run_round().unwrap();
                assert_eq!(ra.selected, rb.selected);
                if ra.selected.contains(&3) {
                    break;
                }
                checked_rounds += 1;
                assert_eq!(fa.params(), fb.params(), "seed {seed} round {}", ra.round);
            }
        }
        assert!(checked_rounds >= 5, "only {checked_rounds} client-3-free rounds checked");
    }
}
