use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Mixes a master seed and a label into an independent 64-bit seed.
pub fn derive_seed(master_seed: u64, label: &str) -> u64 {
    splitmix64(master_seed ^ splitmix64(fnv1a(label.as_bytes())))
}

/// A deterministic random stream identified by `(master_seed, label)`.
///
/// Two streams built from the same pair yield the same sequence; streams with
/// different labels are statistically independent.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    label: String,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, label: impl Into<String>) -> Self {
        let label = label.into();
        let inner = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, &label));
        Self {
            master_seed,
            label,
            inner,
        }
    }

    /// Stream for a sub-task; its label is `parent/child`.
    pub fn child(&self, label: &str) -> Self {
        Self::new(self.master_seed, format!("{}/{}", self.label, label))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
