//! Seed derivation. Every random choice in a run draws from a stream derived
//! from the master seed and a stable label, never from a global RNG.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed for (master, particle, iteration, label).
pub fn derive(master: u64, particle: usize, iteration: usize, label: &str) -> u64 {
    let mut h = splitmix(master);
    h = splitmix(h ^ particle as u64);
    h = splitmix(h ^ (iteration as u64).rotate_left(32));
    splitmix(h ^ fnv(label))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
