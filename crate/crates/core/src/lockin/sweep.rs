use rayon::prelude::*;

use super::demod::{LockIn, LockInResult, DEFAULT_FILTER_ORDER, DEFAULT_TIME_CONSTANT, MIN_SETTLING};
use super::synth::{fill_noise, point_rng, BlockFilter};
use crate::chain::{ChainResponse, HBT_INPUT_NOISE_DENSITY};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::source::{image_charge_waveform, rydberg_population, stark_excitation_fraction};
use crate::source::{CellGeometry, DriveWaveform, EnsembleParams};

/// Noise is synthesized and filtered in blocks of this many samples.
pub const NOISE_BLOCK: usize = 1 << 17;

/// Per-point synthesis and demodulation settings shared by a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepConfig<T = f64> {
    /// Cable capacitance between cell and first stage (F).
    pub c_parasitic: T,
    pub samples_per_period: usize,
    pub time_constant: T,
    pub filter_order: usize,
    /// Lower bound on the record length in modulation periods.
    pub min_periods: usize,
    /// Input-referred white noise (V/√Hz); zero for noise-free runs.
    pub input_noise_density: T,
    pub seed: u64,
    /// Allowed modulation frequency range (Hz).
    pub fm_limits: (T, T),
    /// Keep one period of source and output per point.
    pub dump_waveforms: bool,
}

impl<T: Scalar> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            c_parasitic: T::lit(10e-12),
            samples_per_period: 16,
            time_constant: T::lit(DEFAULT_TIME_CONSTANT),
            filter_order: DEFAULT_FILTER_ORDER,
            min_periods: 200,
            input_noise_density: T::lit(HBT_INPUT_NOISE_DENSITY),
            seed: 0,
            fm_limits: (T::lit(100e3), T::lit(100e6)),
            dump_waveforms: false,
        }
    }
}

impl<T: Scalar> SweepConfig<T> {
    /// Record length in whole modulation periods:
    /// `max(20 time constants, min_periods)`.
    pub fn periods_for(&self, f_m: T) -> usize {
        let settle = (T::lit(MIN_SETTLING) * self.time_constant * f_m).ceil().to_usize().unwrap_or(usize::MAX);
        settle.max(self.min_periods)
    }
}

/// One period of the cell voltage and of the chain output (noise-free).
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformDump<T = f64> {
    pub dt: T,
    pub source: Vec<T>,
    pub output: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint<T = f64> {
    pub x_value: T,
    pub result: LockInResult<T>,
    pub waveform: Option<WaveformDump<T>>,
}

/// Everything needed to evaluate one point of either sweep.
struct Pipeline<'a, T> {
    ens: &'a EnsembleParams<T>,
    geom: &'a CellGeometry<T>,
    chain: &'a ChainResponse<T>,
    cfg: &'a SweepConfig<T>,
}

impl<T: Scalar> Pipeline<'_, T> {
    fn run(&self, index: usize, x_value: T, drive: &DriveWaveform<T>, scale: T) -> Result<SweepPoint<T>> {
        let cfg = self.cfg;
        let spp = cfg.samples_per_period;
        let pop = rydberg_population(drive, self.ens, scale, 1, spp)?;
        let (_, source) = image_charge_waveform(&pop.rho22, self.geom, self.ens.n_s, cfg.c_parasitic);
        let fs = drive.f_m * T::from_count(spp);
        let mut output = source.clone();
        // One period through the chain is the periodic steady state.
        BlockFilter::new(self.chain, spp, fs).apply(&mut output);

        let n = self.cfg.periods_for(drive.f_m) * spp;
        let mut li = LockIn::new(drive.f_m, fs, cfg.time_constant, cfg.filter_order)?;
        if cfg.input_noise_density > T::zero() {
            let block = NOISE_BLOCK.min(n);
            let sigma = cfg.input_noise_density * (fs / T::lit(2.0)).sqrt();
            let mut rng = point_rng(cfg.seed, index as u64);
            let mut filter = BlockFilter::new(self.chain, block, fs);
            let mut noise = vec![T::zero(); block];
            let mut k = 0usize;
            while k < n {
                fill_noise(&mut noise, sigma, &mut rng);
                filter.apply(&mut noise);
                for &e in noise.iter().take(n - k) {
                    li.push(output[k % spp] + e);
                    k += 1;
                }
            }
        } else {
            for k in 0..n {
                li.push(output[k % spp]);
            }
        }
        Ok(SweepPoint {
            x_value,
            result: li.result(),
            waveform: cfg.dump_waveforms.then(|| WaveformDump {
                dt: fs.recip(),
                source,
                output,
            }),
        })
    }
}

fn check_sorted<T: Scalar>(grid: &[T], what: &str) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Input(format!("{what} grid is empty")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input(format!("{what} grid must be strictly increasing")));
    }
    Ok(())
}

/// Lock-in amplitude against cell bias at fixed modulation.
pub fn sweep_vbc<T: Scalar>(
    v_bc_grid: &[T],
    drive: &DriveWaveform<T>,
    ens: &EnsembleParams<T>,
    geom: &CellGeometry<T>,
    chain: &ChainResponse<T>,
    cfg: &SweepConfig<T>,
) -> Result<Vec<SweepPoint<T>>> {
    check_sorted(v_bc_grid, "V_BC")?;
    ens.validate()?;
    geom.validate()?;
    drive.validate()?;
    let p = Pipeline { ens, geom, chain, cfg };
    v_bc_grid
        .par_iter()
        .enumerate()
        .map(|(i, &v)| p.run(i, v, drive, stark_excitation_fraction(v, ens)))
        .collect()
}

/// Lock-in amplitude against modulation frequency at fixed bias.
pub fn sweep_fm<T: Scalar>(
    f_m_grid: &[T],
    v_bc: T,
    drive: &DriveWaveform<T>,
    ens: &EnsembleParams<T>,
    geom: &CellGeometry<T>,
    chain: &ChainResponse<T>,
    cfg: &SweepConfig<T>,
) -> Result<Vec<SweepPoint<T>>> {
    check_sorted(f_m_grid, "f_m")?;
    let (lo, hi) = cfg.fm_limits;
    if f_m_grid[0] < lo || f_m_grid[f_m_grid.len() - 1] > hi {
        return Err(Error::Range(format!("f_m grid outside [{lo}, {hi}] Hz")));
    }
    ens.validate()?;
    geom.validate()?;
    let scale = stark_excitation_fraction(v_bc, ens);
    let p = Pipeline { ens, geom, chain, cfg };
    f_m_grid
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let d = DriveWaveform { f_m: f, ..*drive };
            d.validate()?;
            p.run(i, f, &d, scale)
        })
        .collect()
}
