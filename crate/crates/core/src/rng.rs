//! Counter-based random substreams.
//!
//! Every random draw in a campaign comes from a ChaCha8 stream whose key is
//! derived from the campaign seed and a path of labels (site, group, ...),
//! and whose stream id is the trial or sample index. Results therefore do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels for the independent consumers of randomness.
pub mod site {
    pub const TRIAL: u64 = 0x7472_6961_6c00_0001;
    pub const GRID: u64 = 0x6772_6964_0000_0002;
    pub const MCS: u64 = 0x6d63_7300_0000_0003;
    pub const PILOT: u64 = 0x7069_6c6f_7400_0004;
    pub const ID_RECURSION: u64 = 0x6964_7265_6300_0005;
    pub const TRIAL_PIPELINE: u64 = 0x7470_6970_6500_0006;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A derived 256-bit ChaCha key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamKey([u8; 32]);

impl StreamKey {
    pub fn new(seed: u64, path: &[u64]) -> StreamKey {
        let mut state = splitmix64(seed);
        for &label in path {
            state = splitmix64(state ^ splitmix64(label));
        }
        let mut key = [0u8; 32];
        for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
            state = splitmix64(state.wrapping_add(i as u64));
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        StreamKey(key)
    }

    /// Extends the path by one label.
    pub fn child(&self, label: u64) -> StreamKey {
        let mut words = [0u64; 4];
        for (w, chunk) in words.iter_mut().zip(self.0.chunks_exact(8)) {
            *w = u64::from_le_bytes(chunk.try_into().unwrap());
        }
        StreamKey::new(words[0] ^ words[1].rotate_left(17) ^ words[2].rotate_left(31) ^ words[3].rotate_left(47), &[label])
    }

    /// The `index`-th independent stream under this key.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.0);
        rng.set_stream(index);
        rng
    }
}
