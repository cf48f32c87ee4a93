//! FNV-1a 64-bit hashing for seed derivation and file digests.
//!
//! Offset basis `0xcbf29ce484222325`, prime `0x100000001b3`. Chosen because it
//! is a published, trivially portable algorithm: any language can recompute
//! derived seeds and manifest digests bit-for-bit.

const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Debug, Clone, Copy)]
pub struct Fnv64(u64);

impl Default for Fnv64 {
    fn default() -> Self {
        Fnv64(OFFSET_BASIS)
    }
}

impl Fnv64 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = Fnv64::new();
    h.update(bytes);
    h.finish()
}

/// Per-query seed: FNV-1a over `master_seed` (little-endian), a 0xff
/// separator, the query id bytes, another 0xff, and the operation name.
pub fn derive_seed(master_seed: u64, query_id: &str, op_name: &str) -> u64 {
    let mut h = Fnv64::new();
    h.update(&master_seed.to_le_bytes());
    h.update(&[0xff]);
    h.update(query_id.as_bytes());
    h.update(&[0xff]);
    h.update(op_name.as_bytes());
    h.finish()
}
