//! Reproducible random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator keyed by a
//! master seed and a 64-bit stream id, so independent work items (disorder
//! instances, twirl variants, trajectories, random unitaries) never share
//! state and results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream-id namespaces. The low 32 bits carry the item index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Domain {
    Couplings = 1,
    Twirl = 2,
    Trajectory = 3,
    Shots = 4,
    Unitary = 5,
    Bootstrap = 6,
}

pub fn stream_id(domain: Domain, index: u64) -> u64 {
    ((domain as u64) << 48) ^ index
}

pub fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stream keyed by a path of labels, e.g. `[instance, time, variant, shot]`.
/// The path is folded into the seed with SplitMix64 so nearby labels give
/// unrelated streams.
pub fn substream(seed: u64, domain: Domain, path: &[u64]) -> StreamRng {
    let mut s = seed;
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    stream(s, stream_id(domain, 0))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn domain_stream(seed: u64, domain: Domain, index: u64) -> StreamRng {
    stream(seed, stream_id(domain, index))
}

/// Standard normal deviate by the Marsaglia polar method. One of the two
/// deviates produced per accepted pair is discarded so each call consumes a
/// self-contained block of the stream.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}
