use std::sync::Arc;

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::chain::ChainResponse;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T = f64> {
    pub sample_rate: T,
    pub samples: Vec<T>,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(sample_rate: T, samples: Vec<T>) -> Self {
        Self { sample_rate, samples }
    }

    /// Sample `f(t)` at `t = k / sample_rate`, `k < n`.
    pub fn from_fn(sample_rate: T, n: usize, f: impl Fn(T) -> T) -> Self {
        let dt = sample_rate.recip();
        Self::new(sample_rate, (0..n).map(|k| f(dt * T::from_count(k))).collect())
    }

    pub fn duration(&self) -> T {
        T::from_count(self.samples.len()) / self.sample_rate
    }

    pub fn dt(&self) -> T {
        self.sample_rate.recip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisConfig<T = f64> {
    pub sample_rate: T,
    pub duration: T,
    pub noise_seed: u64,
    /// White input noise density (V/√Hz); zero disables noise.
    pub input_noise_density: T,
}

impl<T: Scalar> SynthesisConfig<T> {
    /// Number of samples in the record.
    pub fn n_samples(&self) -> usize {
        (self.duration * self.sample_rate).round().to_usize().unwrap_or(0)
    }

    /// Standard deviation of white noise with the configured one-sided
    /// density over the full Nyquist band.
    pub fn noise_sigma(&self) -> T {
        self.input_noise_density * (self.sample_rate / T::lit(2.0)).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate > T::zero() && self.duration > T::zero()) {
            return Err(Error::Config("sample rate and duration must be > 0".into()));
        }
        if !(self.input_noise_density >= T::zero()) {
            return Err(Error::Config("noise density must be >= 0".into()));
        }
        Ok(())
    }
}

/// RNG for sweep point `index`: one ChaCha stream per point.
pub fn point_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub(crate) fn fill_noise<T: Scalar, R: Rng + ?Sized>(buf: &mut [T], sigma: T, rng: &mut R) {
    for v in buf {
        let z: f64 = rng.sample(StandardNormal);
        *v = sigma * T::lit(z);
    }
}

/// Circular filtering of a real block by the chain response.
pub(crate) struct BlockFilter<T: Scalar> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    response: Vec<Complex<T>>,
    buf: Vec<Complex<T>>,
}

impl<T: Scalar> BlockFilter<T> {
    pub(crate) fn new(chain: &ChainResponse<T>, n: usize, sample_rate: T) -> Self {
        let mut planner = FftPlanner::new();
        let bin = sample_rate / T::from_count(n);
        let response = (0..n)
            .map(|k| {
                if 2 * k <= n {
                    chain.response(bin * T::from_count(k))
                } else {
                    chain.response(bin * T::from_count(n - k)).conj()
                }
            })
            .collect();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            response,
            buf: vec![Complex::new(T::zero(), T::zero()); n],
        }
    }

    pub(crate) fn apply(&mut self, block: &mut [T]) {
        let n = self.buf.len();
        debug_assert_eq!(block.len(), n);
        for (c, &x) in self.buf.iter_mut().zip(block.iter()) {
            *c = Complex::new(x, T::zero());
        }
        self.forward.process(&mut self.buf);
        for (c, h) in self.buf.iter_mut().zip(&self.response) {
            *c = *c * h;
        }
        self.inverse.process(&mut self.buf);
        let scale = T::from_count(n).recip();
        for (x, c) in block.iter_mut().zip(&self.buf) {
            *x = c.re * scale;
        }
    }
}

/// Add input-referred white noise and pass the record through the chain.
///
/// The whole record is filtered with one FFT, so the result is the periodic
/// steady state of a record that repeats.
pub fn synthesize<T: Scalar>(source: &Waveform<T>, chain: &ChainResponse<T>, cfg: &SynthesisConfig<T>) -> Result<Waveform<T>> {
    cfg.validate()?;
    let n = source.samples.len();
    if source.sample_rate != cfg.sample_rate {
        return Err(Error::Config(format!(
            "source sampled at {} Hz, config says {} Hz",
            source.sample_rate, cfg.sample_rate
        )));
    }
    if n == 0 || n.abs_diff(cfg.n_samples()) > 1 {
        return Err(Error::Config(format!(
            "source has {n} samples, duration × sample rate = {}",
            cfg.n_samples()
        )));
    }
    let mut out = source.samples.clone();
    if cfg.input_noise_density > T::zero() {
        let mut rng = point_rng(cfg.noise_seed, 0);
        let mut noise = vec![T::zero(); n];
        fill_noise(&mut noise, cfg.noise_sigma(), &mut rng);
        for (x, e) in out.iter_mut().zip(&noise) {
            *x = *x + *e;
        }
    }
    BlockFilter::new(chain, n, cfg.sample_rate).apply(&mut out);
    Ok(Waveform::new(cfg.sample_rate, out))
}
