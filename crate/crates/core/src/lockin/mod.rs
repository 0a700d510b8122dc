//! Time-domain synthesis of the amplified cell signal and software lock-in
//! detection.

mod demod;
mod sweep;
mod synth;

pub use demod::{
    demodulate, LockIn, LockInResult, DEFAULT_FILTER_ORDER, DEFAULT_TIME_CONSTANT, MIN_SAMPLES_PER_PERIOD, MIN_SETTLING,
};
pub use sweep::{sweep_fm, sweep_vbc, SweepConfig, SweepPoint, WaveformDump, NOISE_BLOCK};
pub use synth::{point_rng, synthesize, SynthesisConfig, Waveform};
