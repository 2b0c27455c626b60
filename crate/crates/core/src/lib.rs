//! Deterministic simulation of crash-tolerant binary consensus built from
//! fuzzy counting, expander gossip and a hidden-register weak global coin.
//!
//! Everything runs on the lockstep engine in [`sim`]; the adversary sees
//! all classical state through [`sim::AdversaryView`] but never the coin
//! registers, which only travel in the hidden part of a message.

pub mod adversary;
pub mod coin;
pub mod config;
pub mod consensus;
pub mod counting;
pub mod error;
pub mod exchange;
pub mod gossip;
pub mod graph;
pub mod ledger;
pub mod message;
pub mod rng;
pub mod sim;
pub mod stats;
pub mod toy;
pub mod transcript;

pub use error::SimError;
pub use message::ProcessId;
