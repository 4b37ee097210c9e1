//! Named random substreams derived from one root seed.
//!
//! Each stage draws from its own stream so that re-running one stage never
//! shifts the randomness seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stream {
    DataSplit,
    Init,
    Batch,
    Shots,
    AttackOracle,
}

impl Stream {
    pub fn name(self) -> &'static str {
        match self {
            Stream::DataSplit => "data-split",
            Stream::Init => "init",
            Stream::Batch => "batch",
            Stream::Shots => "shots",
            Stream::AttackOracle => "attack-oracle",
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `stream`, further split by `index` (epoch, trial, ...).
pub fn substream(root: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let seed = splitmix(splitmix(root ^ fnv1a(stream.name().as_bytes())) ^ splitmix(index));
    ChaCha8Rng::seed_from_u64(seed)
}
