//! Seeded random streams and the complex Gaussian sampler.
//!
//! Every trial of every experiment draws from its own ChaCha stream derived
//! from `(master_seed, domain, index)`, so results never depend on the order
//! in which parallel workers pick up trials.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream domains. Kept distinct so that, e.g., adding a scheme that consumes
/// randomness never shifts the channel draws.
pub mod domain {
    pub const CHANNEL: u64 = 0x6368_616e;
    pub const CODEBOOK: u64 = 0x636f_6465;
    pub const PICK: u64 = 0x7069_636b;
    pub const GLA: u64 = 0x676c_6121;
    pub const VALIDATION: u64 = 0x7661_6c69;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `(master, domain, index)`.
pub fn stream(master: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    let mut state = splitmix64(master) ^ splitmix64(domain.rotate_left(17)) ^ index;
    for chunk in seed.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// Circularly-symmetric complex Gaussian with `E|z|^2 = variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}
