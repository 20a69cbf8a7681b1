//! Multiplicative measurement noise and deterministic seed derivation.
//!
//! Each scattering-data entry `z` is perturbed to `z * (1 + eps)` with
//! `eps` drawn independently per entry from a real Gaussian `N(0, sigma^2)`.
//! Noise is resampled on every call; reproducibility comes from deriving the
//! generator seed from `(base, epoch, sample)` so no two draws share a
//! stream but any draw can be replayed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use waveband_core::field::FarFieldCube;

/// SplitMix64 finalizer: a bijective mixer with full avalanche.
fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed for one (epoch, sample) pair.
pub fn derive_seed(base: u64, epoch: u64, sample: u64) -> u64 {
    let mut s = splitmix64(base);
    s = splitmix64(s ^ epoch.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    splitmix64(s ^ sample.wrapping_mul(0xBF58_476D_1CE4_E5B9))
}

/// Return a copy of `cube` with every entry scaled by `1 + eps`,
/// `eps ~ N(0, sigma^2)` real, drawn freshly from `rng`.
pub fn inject_noise(cube: &FarFieldCube, sigma: f64, rng: &mut impl Rng) -> FarFieldCube {
    let mut out = cube.clone();
    if sigma == 0.0 {
        return out;
    }
    for slice in &mut out.slices {
        for z in slice.iter_mut() {
            let eps: f64 = StandardNormal.sample(rng);
            *z *= 1.0 + sigma * eps;
        }
    }
    out
}

/// Convenience wrapper seeding its own generator from a derived seed.
pub fn inject_noise_seeded(cube: &FarFieldCube, sigma: f64, seed: u64) -> FarFieldCube {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    inject_noise(cube, sigma, &mut rng)
}
