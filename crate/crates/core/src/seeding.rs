//! Stateless seed derivation for parallel tasks.
//!
//! Task `index` within `domain` under master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s + domain·φ)` on stream `index`, where `φ` is
//! the 64-bit golden-ratio constant. Domain 0 is therefore the plain
//! `seed_from_u64(s)` generator, stream `index`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const DOMAIN_BOOTSTRAP: u64 = 0;
pub const DOMAIN_CENTERING: u64 = 1;
pub const DOMAIN_FRESH_SAMPLES: u64 = 2;
pub const DOMAIN_TRIALS: u64 = 3;
pub const DOMAIN_REFERENCE: u64 = 4;
pub const DOMAIN_DIAGNOSTIC: u64 = 5;

pub fn task_rng(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master.wrapping_add(domain.wrapping_mul(GOLDEN)));
    rng.set_stream(index);
    rng
}

/// A seed for a nested pipeline, derived like [`task_rng`].
pub fn task_seed(master: u64, domain: u64, index: u64) -> u64 {
    use rand::Rng;
    task_rng(master, domain, index).random()
}
