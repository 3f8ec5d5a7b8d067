//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from user-supplied `u64` seeds. When one
//! seed has to drive several independent streams (an environment and the
//! policy that acts in it, a suite of environments, per-episode replays), we
//! derive sub-seeds with the splitmix64 finalizer. The mix is a bijection, so
//! distinct `(base, salt)` pairs with the same base map to distinct seeds.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Derive an independent sub-seed from `base` and a stream label `salt`.
pub(crate) fn derive(base: u64, salt: u64) -> u64 {
    mix(base ^ salt.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
