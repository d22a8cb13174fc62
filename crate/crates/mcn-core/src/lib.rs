//! Simulation and analysis primitives for molecular communication
//! networks: colonies of engineered bacteria that sense, relay, and agree
//! on environmental signals through molecules diffusing between them.
//!
//! The crate is organized around the physical stack:
//!
//! * [`diffusion`] — closed-form point-source responses in an unbounded
//!   3-D medium and their superposition.
//! * [`agent`] — the single-bacterium receptor channel: binomial reading
//!   statistics, threshold activation, the arcsine input prior, mutual
//!   information, and channel capacity.
//! * [`node`] — collective sensing inside one colony and the level
//!   quantizer shared with relaying.
//! * [`relay`] — multihop forwarding with per-hop transition matrices and
//!   Monte Carlo cross-checks.
//! * [`consensus`] — distributed averaging through the diffusion coupling
//!   matrix, with variance trajectories and spectral diagnostics.
//! * [`rng`] — reproducible counter-derived random substreams.
//! * [`quadrature`] — a numerical-integration oracle the test suites hold
//!   against the closed forms.
//!
//! Analytic routines are pure; every stochastic routine takes an explicit
//! [`rng::Stream`], so concurrent use on distinct streams is safe and all
//! results are reproducible from `(master seed, stream index)`.

// Guards are written `!(x > 0.0)` rather than `x <= 0.0` so NaN is
// rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod consensus;
pub mod diffusion;
pub mod error;
pub mod node;
pub mod quadrature;
pub mod relay;
pub mod rng;

pub use agent::{AgentConfig, AgentReading, Capacity, PriorOnP};
pub use consensus::{ConsensusNetwork, Placement, VarianceTrajectory};
pub use diffusion::{Medium, PointSource};
pub use error::{Error, Result};
pub use node::{Belief, LevelQuantizer, NodeConfig, NodeState, SensingMode};
pub use relay::{BinarySource, HopChannel, MoleculeType, RelayChain, RelayMode, RelaySimulation};
pub use rng::Stream;
