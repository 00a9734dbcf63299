//! Seeded, splittable byte streams.
//!
//! All randomness in a run is drawn from [`SeedStream`]s derived from the
//! scenario seed, so a run is reproducible bit-for-bit on any platform.
//! Streams are hash chains over SHA-256: deriving a child stream or pulling
//! the next block never touches global state.

use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"curio.stream.v1";

/// A deterministic stream of pseudo-random bytes.
#[derive(Debug, Clone)]
pub struct SeedStream {
    key: [u8; 32],
    counter: u64,
}

impl SeedStream {
    /// Root stream for a scenario seed and a purpose label.
    pub fn from_seed(seed: u64, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(seed.to_le_bytes());
        hasher.update([label.len() as u8]);
        hasher.update(label.as_bytes());
        Self {
            key: hasher.finalize().into(),
            counter: 0,
        }
    }

    /// Split off an independent child stream. The parent is unaffected.
    pub fn derive(&self, label: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(self.key);
        hasher.update([label.len() as u8]);
        hasher.update(label.as_bytes());
        Self {
            key: hasher.finalize().into(),
            counter: 0,
        }
    }

    /// Child stream keyed by an integer index (per-player streams and such).
    pub fn derive_indexed(&self, label: &str, index: u64) -> Self {
        let mut child = self.derive(label);
        child.key = {
            let mut hasher = Sha256::new();
            hasher.update(DOMAIN);
            hasher.update(child.key);
            hasher.update(index.to_le_bytes());
            hasher.finalize().into()
        };
        child
    }

    /// Next 32-byte block of the stream.
    pub fn next_block(&mut self) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(self.key);
        hasher.update(self.counter.to_le_bytes());
        self.counter += 1;
        hasher.finalize().into()
    }

    pub fn next_u64(&mut self) -> u64 {
        let block = self.next_block();
        u64::from_le_bytes(block[..8].try_into().expect("block is 32 bytes"))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Bernoulli draw with probability `p` (clamped to `[0, 1]`).
    pub fn chance(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            return true;
        }
        if p <= 0.0 {
            return false;
        }
        self.next_f64() < p
    }

    pub fn next_bytes(&mut self, len: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let block = self.next_block();
            let take = (len - out.len()).min(block.len());
            out.extend_from_slice(&block[..take]);
        }
        out
    }
}
