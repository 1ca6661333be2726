//! Seeded random streams.
//!
//! Every stochastic routine in the crate takes an explicit [`RngStream`]; there
//! is no global generator. Streams are ChaCha20 keyed by a 64-bit seed plus a
//! 64-bit stream id, which gives the same sequence on every platform.
//! [`RngStream::split`] derives child streams that never share state with the
//! parent or with each other.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::DenseVector;

/// Name of the generator, recorded in trace metadata.
pub const ALGORITHM: &str = "chacha20";

#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    draws: u64,
    inner: ChaCha20Rng,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha20Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            draws: 0,
            inner,
        }
    }

    /// Child stream `index` of this stream. Children of the same parent with
    /// different indices are independent; the parent's position is untouched.
    pub fn split(&self, index: u64) -> Self {
        let child = splitmix64(self.stream ^ splitmix64(index.wrapping_add(1)));
        Self::with_stream(self.seed, child)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Number of scalar draws taken so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.draws += 1;
        self.inner.sample(StandardNormal)
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.draws += 1;
        self.inner.random::<f64>()
    }

    pub fn gaussian_vector(&mut self, n: usize, sigma: f64) -> Result<DenseVector> {
        gaussian_vector(self, n, sigma)
    }
}

/// `n` independent draws from `N(0, sigma²)`.
pub fn gaussian_vector(rng: &mut RngStream, n: usize, sigma: f64) -> Result<DenseVector> {
    if n == 0 {
        return Err(Error::InvalidDimension("gaussian vector of length 0".into()));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param("sigma", format!("must be finite and >= 0, got {sigma}")));
    }
    Ok(DenseVector::from_fn(n, |_, _| sigma * rng.standard_normal()))
}
