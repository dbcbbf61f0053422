use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for cell `k` at frame `t`. Streams depend only on
/// `(seed, k, t)`, so results do not depend on scheduling.
pub fn stream(seed: u64, k: usize, t: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(k as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(t as u64).to_le_bytes());
    key[24..32].copy_from_slice(b"spfcells");
    ChaCha8Rng::from_seed(key)
}
