//! Simulator for blind multihop rendezvous in cognitive radio networks.
//!
//! Secondary users hop over a pool of licensed channels whose primary-user
//! activity follows ON/OFF renewal processes. Channel-hopping protocols
//! (M-DMCA, MRCS, MMCA, M-EMCA) decide where each node listens every
//! half-slot; nodes that land on the same idle channel run a two- or
//! three-way handshake to exchange neighbor tables. The simulator reports
//! average time to rendezvous and packets per successful rendezvous.

pub mod activity;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod handshake;
pub mod metrics;
pub mod protocols;
pub mod seed;
pub mod spectrum;
pub mod topology;

pub use activity::{ActivityClass, ActivityRates, ChannelProcess, ChannelState};
pub use engine::{run, CompletionPolicy, RunRecord, Scenario, Simulation};
pub use error::{Error, Result};
pub use experiment::{run_sweep, SweepConfig};
pub use handshake::{HandshakeKind, NeighborTables};
pub use metrics::{compare, Comparison, ExperimentResult};
pub use protocols::{Half, ProtocolKind, Strategy};
pub use spectrum::{ChannelMode, SpectrumMap};
pub use topology::{Topology, TopologyParams};
