//! Seeded randomness and counter-based seed derivation.
//!
//! All stochastic state flows from a single master seed. Sweep cells and
//! runs get independent streams by hashing `(seed, counter)` pairs through
//! the SplitMix64 finalizer, so any cell or run can be reproduced in
//! isolation and results do not depend on execution order or thread count.
//!
//! The derivation is:
//!
//! ```text
//! cell seed = derive(derive(master, policy id), fraction bits)
//! run seed  = derive(cell seed, run index)
//! ```
//!
//! where `derive(base, counter) = mix64(base XOR mix64(counter))` and
//! `mix64` is the SplitMix64 finalizer. Keying the cell on the policy id
//! and the fraction's bit pattern (rather than sweep positions) means a
//! single-cell rerun with the same master seed reproduces the sweep cell
//! exactly.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The simulator's random source. ChaCha8 is seedable, portable and fast;
/// identical seeds give identical streams on every platform.
pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `base` and a stream counter.
pub fn derive_seed(base: u64, counter: u64) -> u64 {
    mix64(base ^ mix64(counter))
}

/// Seed for one (policy, fraction) sweep cell.
pub fn cell_seed(master: u64, policy_id: u64, fraction: f64) -> u64 {
    derive_seed(derive_seed(master, policy_id), fraction.to_bits())
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::RngCore;

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(42, 0), derive_seed(42, 0));
        assert_ne!(derive_seed(42, 0), derive_seed(42, 1));
        assert_ne!(derive_seed(42, 0), derive_seed(43, 0));
    }

    #[test]
    fn cell_seed_keys_on_fraction_value_not_position() {
        let a = cell_seed(7, 2, 0.10);
        let b = cell_seed(7, 2, 0.10);
        assert_eq!(a, b);
        assert_ne!(a, cell_seed(7, 2, 0.20));
        assert_ne!(a, cell_seed(7, 3, 0.10));
    }

    #[test]
    fn same_seed_same_stream() {
        let mut a = rng_from_seed(123);
        let mut b = rng_from_seed(123);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
