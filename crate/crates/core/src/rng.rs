//! Seeded uniform draws on `[−1, 1)`.
//!
//! Generator identity, for reproducing runs elsewhere: ChaCha with 8 rounds
//! (`rand_chacha::ChaCha8Rng`), 256-bit key = the 64-bit seed in
//! little-endian followed by 24 zero bytes, stream id selected with
//! `set_stream`, word position 0. Each draw consumes one `u64` `x` and
//! returns `2 · (x >> 11) · 2⁻⁵³ − 1`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct UniformPm1 {
    rng: ChaCha8Rng,
}

impl UniformPm1 {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng }
    }

    pub fn draw(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        2.0 * (bits as f64 * (1.0 / (1u64 << 53) as f64)) - 1.0
    }
}
