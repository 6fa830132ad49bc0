//! Reproducible random streams.
//!
//! Every episode is identified by `(master_seed, episode_seed)`. Both are
//! packed into a ChaCha8 key and each consumer gets its own ChaCha stream
//! id, so the environment's draws never depend on how much randomness a
//! policy consumes. ChaCha is counter based, which makes the streams
//! identical on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Environment = 0,
    Policy = 1,
}

/// Stream `purpose` for episode `episode_seed` under `master_seed`.
pub fn stream(master_seed: u64, episode_seed: u64, purpose: Stream) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&episode_seed.to_le_bytes());
    key[16..24].copy_from_slice(b"driftbwk");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose as u64);
    rng
}

/// Environment and policy streams for one episode.
pub fn episode_streams(master_seed: u64, episode_seed: u64) -> (SimRng, SimRng) {
    (
        stream(master_seed, episode_seed, Stream::Environment),
        stream(master_seed, episode_seed, Stream::Policy),
    )
}
