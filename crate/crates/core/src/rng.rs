//! Seed derivation. Every random draw in the crate comes from a ChaCha8 stream
//! seeded by mixing the run seed with a purpose tag and coordinates, so any
//! epoch's shuffle can be reproduced without replaying earlier ones.

pub(crate) mod stream {
    pub const INIT: u64 = 1;
    pub const VISUAL_SHUFFLE: u64 = 2;
    pub const SEMANTIC_SHUFFLE: u64 = 3;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    for v in [tag, a, b] {
        h = splitmix64(h ^ v);
    }
    h
}
