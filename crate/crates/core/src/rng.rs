//! Seeded substreams. Every random object in the crate is drawn from a
//! ChaCha8 stream addressed by `(seed, stream)`, so trials can run in any
//! order or on any thread and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags for [`derive_seed`].
pub mod tag {
    pub const TRIAL: u64 = 0x7472_6961_6c00_0001;
    pub const INPUT: u64 = 0x696e_7075_7400_0002;
    pub const NOISE: u64 = 0x6e6f_6973_6500_0003;
    pub const SPS: u64 = 0x7370_7300_0000_0004;
    pub const SIZE: u64 = 0x7369_7a65_0000_0005;
    pub const AUX: u64 = 0x6175_7800_0000_0006;
}

/// ChaCha8 generator on stream `stream` of key `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(tag)) ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93))
}
