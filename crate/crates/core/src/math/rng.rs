//! Seeded, splittable random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::Tensor;

/// ChaCha20 stream identified by a 64-bit seed and a stream id.
///
/// Sub-streams share the seed and differ in the ChaCha stream id, so draws in
/// one phase never perturb another phase's samples.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha20Rng,
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `label` (and by this stream's own id).
    pub fn substream(&self, label: &str) -> Self {
        let id = fnv1a(label) ^ self.stream.rotate_left(17);
        Self::with_stream(self.seed, id)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// `rows×cols` i.i.d. `N(0, scale²)` entries. `scale = 0` gives zeros.
    pub fn gaussian_tensor(&mut self, rows: usize, cols: usize, scale: f64) -> Tensor {
        let data = (0..rows * cols).map(|_| scale * self.standard_normal()).collect();
        Tensor::from_raw(rows, cols, data)
    }
}

/// `B×dim` batch of i.i.d. `N(0, scale²)` draws.
pub fn sample_gaussian(rng: &mut SeededRng, batch: usize, dim: usize, scale: f64) -> Tensor {
    assert!(scale >= 0.0 && scale.is_finite(), "scale must be a finite standard deviation");
    rng.gaussian_tensor(batch, dim, scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_scale_gives_zeros() {
        let mut rng = SeededRng::new(1);
        assert!(sample_gaussian(&mut rng, 4, 3, 0.0).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = sample_gaussian(&mut SeededRng::new(9), 10, 3, 1.0);
        let b = sample_gaussian(&mut SeededRng::new(9), 10, 3, 1.0);
        let c = sample_gaussian(&mut SeededRng::new(10), 10, 3, 1.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn substreams_are_distinct_and_reproducible() {
        let root = SeededRng::new(4);
        let mut p1 = root.substream("phase1");
        let mut p2 = root.substream("phase2");
        assert_ne!(p1.next_u64(), p2.next_u64());
        let mut again = SeededRng::new(4).substream("phase1");
        let mut p1b = root.substream("phase1");
        assert_eq!(again.next_u64(), p1b.next_u64());
        let nested = root.substream("phase1").substream("x").next_u64();
        assert_ne!(nested, root.substream("x").next_u64());
    }

    #[test]
    fn variance_concentrates() {
        let mut rng = SeededRng::new(2024);
        let z = sample_gaussian(&mut rng, 100_000, 1, 1.0);
        let n = z.len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let var = z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 1.0).abs() < 0.02, "var = {var}");
        assert!(mean.abs() < 0.02);
    }
}
