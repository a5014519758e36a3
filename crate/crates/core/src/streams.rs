//! Counter-based random streams for replications.
//!
//! Replication `r` under master seed `s` reads disturbances from ChaCha8
//! stream `2r` and compression noise from stream `2r + 1`, both keyed by `s`.
//! Any replication can be regenerated on its own, in any order or thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct ReplicationStreams {
    pub disturbance: ChaCha8Rng,
    pub noise: ChaCha8Rng,
}

impl ReplicationStreams {
    pub fn new(master_seed: u64, replication: u64) -> Self {
        Self {
            disturbance: stream(master_seed, replication.wrapping_mul(2)),
            noise: stream(master_seed, replication.wrapping_mul(2).wrapping_add(1)),
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
