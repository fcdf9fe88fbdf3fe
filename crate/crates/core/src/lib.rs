//! A laboratory for finite N-player partially observed mean-field games.
//!
//! The crate is organized around six pieces:
//!
//! - [`game`]: the game model itself — global/local states, empirical
//!   measures, observation channels, sampled play, and the exact closed-loop
//!   chain kernel on the global state space.
//! - [`policy`]: stationary policies as observation-indexed action kernels,
//!   policy metrics, softness and symmetry predicates, and finite
//!   quantizations of the policy space.
//! - [`exact`]: closed-form oracles — induced MDPs, value/policy evaluation,
//!   invariant measures, the memory-0 belief-MDP construction of the
//!   subjective value functions, best-response tests, and tolerance reports.
//! - [`learners`]: naive tabular Q/value learning under fixed stationary
//!   play, and phase-based independent learning with satisficing tests and
//!   randomized policy revision.
//! - [`satisficing`]: policy-space dynamics at the oracle level — equilibrium
//!   enumeration over quantized sets, the revision Markov chain, and the
//!   cohort-based satisficing path constructor.
//! - [`harness`]: configuration-driven experiment runner backing the CLI.

pub mod error;
pub mod exact;
pub mod fixtures;
pub mod game;
pub mod harness;
pub mod learners;
pub mod policy;
pub mod satisficing;
pub mod seeds;

pub use error::{Error, Result};
pub use game::{GameSpec, GlobalState, MeanFieldState, Observation, ObservationChannel};
pub use harness::{run_experiment, ExperimentConfig, Mode, RunSummary};
pub use policy::{JointPolicy, QuantizedPolicySet, StationaryPolicy};
