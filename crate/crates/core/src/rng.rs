//! Counter-addressable randomness.
//!
//! Every stream is a ChaCha8 generator keyed by SHA-256 over
//! `(domain, seed, owner, round, tag)`. Owner 0 is never a process id, so
//! streams with owner 0 (adversary, public graphs) cannot collide with a
//! process substream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type SimRng = ChaCha8Rng;

/// Purpose tag separating otherwise identical stream coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tag(pub u32);

impl Tag {
    pub const COIN_REGISTER: Tag = Tag(1);
    pub const COIN_NEIGHBORS: Tag = Tag(2);
    pub const GOSSIP_GRAPH: Tag = Tag(3);
    pub const ADVERSARY: Tag = Tag(4);
    pub const INPUTS: Tag = Tag(5);
    pub const GRAPH_SAMPLE: Tag = Tag(6);
    pub const CERTIFY: Tag = Tag(7);
}

/// Owner coordinate reserved for streams that belong to no process.
pub const PUBLIC_OWNER: u32 = 0;

pub fn split_rng(seed: u64, owner: u32, round: u64, tag: Tag) -> SimRng {
    let mut h = Sha256::new();
    h.update(b"qsim.rng.v1");
    h.update(seed.to_le_bytes());
    h.update(owner.to_le_bytes());
    h.update(round.to_le_bytes());
    h.update(tag.0.to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(key)
}

/// Derives a child seed, used to hand independent seeds to sub-components.
pub fn derive_seed(seed: u64, owner: u32, round: u64, tag: Tag) -> u64 {
    use rand::RngCore;
    split_rng(seed, owner, round, tag).next_u64()
}
