//! Deterministic per-purpose random streams derived from the scenario seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    CachePlacement = 2,
    Requests = 3,
    TerrestrialFading = 4,
    SatelliteFading = 5,
    Baseline = 6,
    Instance = 7,
}

/// Independent generator for `(seed, stream, t)`; `t` is the timeslot or any other sub-index.
pub fn stream_rng(seed: u64, stream: Stream, t: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 40) ^ t);
    rng
}
