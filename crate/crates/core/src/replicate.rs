//! Deterministic random streams and the replicate runner.
//!
//! Every replicate draws from its own ChaCha stream selected by
//! `(seed, replicate index)`, so results do not depend on how replicates are
//! scheduled across threads. Results come back in replicate order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type SimRng = ChaCha8Rng;

/// The random stream of replicate `index` under master seed `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Mixes a label into a master seed (FNV-1a followed by a SplitMix64 finaliser),
/// giving each named experiment its own family of streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `reps` replicates of `f` in parallel on the current rayon pool.
pub fn run_replicates<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, usize) -> T + Sync,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = replicate_rng(seed, i as u64);
            f(&mut rng, i)
        })
        .collect()
}
