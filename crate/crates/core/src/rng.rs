//! Reproducible random streams.
//!
//! Every replica of every experiment draws from its own stream, identified
//! by `(base_seed, stream_id)`. The generator is ChaCha8, which is counter
//! based: selecting a stream is a constant-time key/nonce setup, so replicas
//! can be scheduled on any worker in any order and still see the same
//! variates.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

#[derive(Clone, Debug)]
pub struct RandomStream {
    base_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

/// Stream for replica `replica` of a run seeded with `base_seed`.
pub fn derive_stream(base_seed: u64, replica: u64) -> RandomStream {
    RandomStream::new(base_seed, replica)
}

/// Mixes a tag into a seed so that independent sub-runs of one experiment
/// (for example the three starting points of a linearity check) never share
/// streams.
pub fn derive_seed(base_seed: u64, tag: u64) -> u64 {
    // splitmix64 finaliser
    let mut z = base_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RandomStream {
    pub fn new(base_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
        rng.set_stream(stream_id);
        Self {
            base_seed,
            stream_id,
            rng,
        }
    }

    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Gamma variate with the given shape and scale; shape 0 is the point
    /// mass at zero.
    pub fn gamma(&mut self, shape: f64, scale: f64) -> f64 {
        if shape <= 0.0 {
            return 0.0;
        }
        Gamma::new(shape, scale)
            .expect("gamma parameters are positive and finite")
            .sample(&mut self.rng)
    }

    pub fn poisson(&mut self, mean: f64) -> u64 {
        if mean <= 0.0 {
            return 0;
        }
        let draw: f64 = Poisson::new(mean)
            .expect("poisson mean is positive and finite")
            .sample(&mut self.rng);
        draw as u64
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
