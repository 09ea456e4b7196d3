//! Weighted alignment dynamics with fat-tailed communication: particle
//! systems, mean-field characteristics, stochastic coupling and the
//! comparison lemmas behind their decay rates.

pub mod coupling;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod kernels;
pub mod lemma;
pub mod meanfield;
pub mod metrics;
pub mod model;
pub mod quad;
pub mod ode;
pub mod rng;
pub mod stochastic;
pub mod sum;

pub(crate) mod interact;

pub use ensemble::{diameters, diameters_in, AgentEnsemble, DiameterStats, InitialSampler};
pub use error::{Error, Result};
pub use kernels::{AlignmentSpec, KernelSpec, NoiseSpec};
pub use model::{Domain, ModelParams, RateTable, Regime};
