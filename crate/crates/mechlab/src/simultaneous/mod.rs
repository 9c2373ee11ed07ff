//! Simultaneous auctions: the harness, hard instance distributions,
//! frequent-message statistics, the reduction from dominant-strategy
//! mechanisms, and a three-bidder ex-post versus dominance separation.

pub mod hard;
pub mod harness;
pub mod reduction;
pub mod separation;
pub mod stats;

pub use hard::{gen_hard_general, gen_hard_matroid, GeneralParams, HardGeneral, HardMatroid, MatroidParams};
pub use harness::{run_simultaneous, PlayerView, SimAlgorithm, SimOutput, SimRun};
pub use reduction::{dsic_to_simultaneous, initial_vertex};
pub use separation::{index_reduction, separation_bits, separation_f, separation_protocol};
pub use stats::{frequent_message_stats, GroupDistribution, MessageStats};
