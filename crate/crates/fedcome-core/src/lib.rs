//! Deterministic federated-learning simulator built around a server-side
//! gradient consensus mechanism and a similarity-driven annealed client
//! sampler.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense vector/matrix kernels (dot, Gram, matvec) shared by
//!   every other module.
//! - [`model`]: a small multilayer perceptron over flat parameter vectors,
//!   with analytically derived gradients.
//! - [`data`]: synthetic blob generation, pathological label-sharded
//!   partitioning, and IDX/CSV loaders.
//! - [`qpsolver`]: a dual coordinate-ascent quadratic-program solver with
//!   KKT certification and a brute-force grid oracle.
//! - [`consensus`]: the per-client gradient correction step; each corrected
//!   gradient is guaranteed non-conflicting with every raw gradient.
//! - [`sampler`]: pairwise gradient-similarity bookkeeping and simulated
//!   annealing selection of mutually dissimilar client subsets.
//! - [`orchestrator`]: local training, round scheduling, and the federated
//!   methods (`fedcome`, `fedavg`, `fedsgd`, `fedcome_sgd`).
//! - [`metrics`]: deterministic CSV/JSON experiment logs, fairness
//!   histograms, and per-client loss monotonicity reports.
//! - [`verify`]: self-contained property suites (used by the CLI `verify`
//!   subcommand and the acceptance tests).
//!
//! Every run is reproducible: all randomness flows through [`rng::RngHub`],
//! which derives one named ChaCha stream per (purpose, round, unit).

pub mod consensus;
pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod orchestrator;
pub mod qpsolver;
pub mod rng;
pub mod sampler;
pub mod verify;

pub use consensus::{enforce_consensus, ConsensusResult, GradientMatrix};
pub use error::{Error, Result};
pub use metrics::{ExperimentLog, MonotonicityReport, Summary};
pub use model::{Activation, Batch, MlpSpec, ParamVector};
pub use numerics::{Matrix, Vector};
pub use orchestrator::{
    run_experiment, Federation, FederationConfig, Method, Participation,
    PartialSampler, RoundRecord, SamplerSettings,
};
pub use qpsolver::{QpProblem, QpSolution, QpStatus};
pub use sampler::{SamplerConfig, SimilarityTable};
pub use verify::{Check, SuiteReport};
