use super::synth::Waveform;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_TIME_CONSTANT: f64 = 1e-3;
pub const DEFAULT_FILTER_ORDER: usize = 4;
/// Minimum samples per reference period.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 10.0;
/// Minimum record length in time constants.
pub const MIN_SETTLING: f64 = 20.0;

/// Lock-in reading with the RMS amplitude convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockInResult<T = f64> {
    pub amplitude_r: T,
    /// In (−π, π]; zero for a sine in phase with the reference.
    pub phase: T,
    pub f_ref: T,
    pub time_constant: T,
    /// In-phase output (V).
    pub x: T,
    /// Quadrature output (V).
    pub y: T,
}

/// Streaming quadrature demodulator with a cascaded single-pole low-pass.
#[derive(Debug, Clone)]
pub struct LockIn<T = f64> {
    f_ref: T,
    time_constant: T,
    alpha: T,
    cycles_per_sample: f64,
    stages_x: Vec<T>,
    stages_y: Vec<T>,
    /// `√2·(sin, cos)` over one period when it spans a whole number of samples.
    table: Option<Vec<(T, T)>>,
    n: u64,
}

impl<T: Scalar> LockIn<T> {
    pub fn new(f_ref: T, sample_rate: T, time_constant: T, filter_order: usize) -> Result<Self> {
        if !(f_ref > T::zero() && time_constant > T::zero()) || filter_order == 0 {
            return Err(Error::Config("reference, time constant and order must be positive".into()));
        }
        let per_period = (sample_rate / f_ref).to_f64_lossy();
        if per_period < MIN_SAMPLES_PER_PERIOD * (1.0 - 1e-12) {
            return Err(Error::Config(format!(
                "{per_period} samples per reference period, need at least {MIN_SAMPLES_PER_PERIOD}"
            )));
        }
        let dt = sample_rate.recip();
        let rounded = per_period.round();
        let table = ((per_period - rounded).abs() <= 1e-9 * per_period && rounded <= 1e7).then(|| {
            let m = rounded as usize;
            (0..m)
                .map(|k| {
                    let (s, c) = (std::f64::consts::TAU * k as f64 / m as f64).sin_cos();
                    (T::lit(s * std::f64::consts::SQRT_2), T::lit(c * std::f64::consts::SQRT_2))
                })
                .collect()
        });
        Ok(Self {
            f_ref,
            time_constant,
            alpha: T::one() - (-dt / time_constant).exp(),
            cycles_per_sample: (f_ref * dt).to_f64_lossy(),
            stages_x: vec![T::zero(); filter_order],
            stages_y: vec![T::zero(); filter_order],
            table,
            n: 0,
        })
    }

    fn reference(&self) -> (T, T) {
        match &self.table {
            Some(t) => t[(self.n % t.len() as u64) as usize],
            None => {
                let ph = (self.n as f64 * self.cycles_per_sample).fract() * std::f64::consts::TAU;
                let (s, c) = ph.sin_cos();
                (T::lit(s * std::f64::consts::SQRT_2), T::lit(c * std::f64::consts::SQRT_2))
            }
        }
    }

    pub fn push(&mut self, x: T) {
        let (s, c) = self.reference();
        let mut ix = x * s;
        let mut iy = x * c;
        for (sx, sy) in self.stages_x.iter_mut().zip(self.stages_y.iter_mut()) {
            *sx = *sx + self.alpha * (ix - *sx);
            *sy = *sy + self.alpha * (iy - *sy);
            ix = *sx;
            iy = *sy;
        }
        self.n += 1;
    }

    pub fn extend(&mut self, xs: &[T]) {
        for &x in xs {
            self.push(x);
        }
    }

    pub fn samples_seen(&self) -> u64 {
        self.n
    }

    /// Current filter output.
    pub fn result(&self) -> LockInResult<T> {
        let x = *self.stages_x.last().unwrap();
        let y = *self.stages_y.last().unwrap();
        let mut phase = y.atan2(x);
        if phase <= -T::PI() {
            phase = T::PI();
        }
        LockInResult {
            amplitude_r: x.hypot(y),
            phase,
            f_ref: self.f_ref,
            time_constant: self.time_constant,
            x,
            y,
        }
    }
}

/// Demodulate a whole record and read the filter output at its end.
pub fn demodulate<T: Scalar>(x: &Waveform<T>, f_ref: T, time_constant: T, filter_order: usize) -> Result<LockInResult<T>> {
    let mut li = LockIn::new(f_ref, x.sample_rate, time_constant, filter_order)?;
    if x.duration() < time_constant * T::lit(MIN_SETTLING) * T::lit(1.0 - 1e-9) {
        return Err(Error::Config(format!(
            "record of {} s shorter than {MIN_SETTLING} time constants",
            x.duration()
        )));
    }
    li.extend(&x.samples);
    Ok(li.result())
}
