//! Seed plumbing. Every random stream in the crate is a ChaCha8 stream keyed
//! by a user seed plus a stream number, so work split across threads draws
//! the same numbers as a sequential run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// splitmix64 finalizer applied to `seed ^ tag`, used to derive child seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Gumbel(0, 1) variate from an open-interval uniform.
pub fn gumbel<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>();
    // random::<f64>() is in [0, 1); map 0 away from the log singularity
    let u = if u <= 0.0 { f64::MIN_POSITIVE } else { u };
    -(-u.ln()).ln()
}
