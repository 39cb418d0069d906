//! Counter-based seed derivation.
//!
//! Every stochastic job gets its own generator seeded from
//! `derive_seed(master, stream, index)`, where `stream` names the kind of job
//! (trace synthesis, sweep draws, bootstrap resamples, ...) and `index` is its
//! position in a deterministic enumeration. Results therefore do not depend on
//! the order in which a thread pool happens to schedule jobs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers used across the crate.
pub mod stream {
    pub const WHITE_NOISE: u64 = 1;
    pub const GLOBAL_PHASE: u64 = 2;
    pub const AMPLITUDE_NOISE: u64 = 3;
    pub const MODE_PHASE: u64 = 4;
    pub const SEGMENTS: u64 = 5;
    pub const BOOTSTRAP: u64 = 6;
    pub const SOURCE_TRACE: u64 = 7;
    pub const SWEEP: u64 = 8;
    pub const PHOTON_STREAM: u64 = 9;
    pub const READOUT: u64 = 10;
    pub const POWER_CALIBRATION: u64 = 11;
    pub const ENSEMBLE: u64 = 12;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master ^ splitmix64(stream)) + index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(stream)).wrapping_add(index))
}

pub fn rng_for(master: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, stream, index))
}
