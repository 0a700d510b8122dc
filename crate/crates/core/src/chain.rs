//! Frequency-domain model of the analog readout chain.
//!
//! A stage is a real-pole/real-zero minimum-phase response
//!
//! ```text
//! H(f) = K · Π (1 + jf/z_hi) / Π (1 + jf/p_hi)          high side
//!          · Π (jf + z_lo) / Π (jf + p_lo) · (jf)^(n_p_lo - n_z_lo) / ...  low side
//! ```
//!
//! where the low-side sections are written so that each one tends to unity
//! above its corner. `K` is therefore the mid-band gain whenever the corners
//! are well separated. Low-side poles without a paired zero are first-order
//! high-pass sections `jf / (jf + p)` (coupling capacitors).

use num_complex::Complex;

use crate::device::{BiasNetwork, SmallSignalParams, TransistorParams};
use crate::device::{small_signal, solve_operating_point, SolverOptions};
use crate::error::{Error, Result};
use crate::scalar::{db20, from_db20, Scalar, BOLTZMANN};

/// Noise temperature of the first (HBT) stage (K).
pub const HBT_NOISE_TEMPERATURE: f64 = 2.0;
/// Default second-stage parameters.
pub const SECOND_STAGE_GAIN_DB: f64 = 40.0;
pub const SECOND_STAGE_F_LOW: f64 = 40e3;
pub const SECOND_STAGE_F_HIGH: f64 = 1.5e9;
pub const SECOND_STAGE_NOISE_TEMPERATURE: f64 = 6.0;
/// Frequency at which cascade noise is evaluated unless told otherwise (Hz).
pub const DEFAULT_REFERENCE_FREQUENCY: f64 = 10e6;
/// Reference resistance used to convert a voltage noise density to a noise
/// temperature (Ω).
pub const NOISE_REFERENCE_RESISTANCE: f64 = 50.0;
/// Input voltage noise density of the first stage (V/√Hz).
pub const HBT_INPUT_NOISE_DENSITY: f64 = 35e-12;

/// Complex response and noise of one amplifier stage.
#[derive(Debug, Clone, PartialEq)]
pub struct StageResponse<T = f64> {
    /// Mid-band voltage gain, with sign.
    pub gain_factor: T,
    /// High-side (low-pass) poles (Hz).
    pub poles: Vec<T>,
    /// High-side zeros (Hz).
    pub zeros: Vec<T>,
    /// Low-side poles (Hz); high-pass corners.
    pub low_poles: Vec<T>,
    /// Low-side zeros (Hz), paired in order with `low_poles`.
    pub low_zeros: Vec<T>,
    /// Equivalent input noise temperature (K).
    pub noise_temperature: T,
    /// Input-referred noise voltage density (V/√Hz). Takes precedence over
    /// `noise_temperature` for the cascade when present.
    pub input_noise_density: Option<T>,
}

impl<T: Scalar> StageResponse<T> {
    /// Frequency-independent stage.
    pub fn flat(gain_factor: T, noise_temperature: T) -> Self {
        Self {
            gain_factor,
            poles: Vec::new(),
            zeros: Vec::new(),
            low_poles: Vec::new(),
            low_zeros: Vec::new(),
            noise_temperature,
            input_noise_density: None,
        }
    }

    pub fn with_noise_temperature(mut self, t: T) -> Self {
        self.noise_temperature = t;
        self
    }

    pub fn with_input_noise_density(mut self, density: T) -> Self {
        self.input_noise_density = Some(density);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let corners = self
            .poles
            .iter()
            .chain(&self.zeros)
            .chain(&self.low_poles)
            .chain(&self.low_zeros);
        for &c in corners {
            if !(c > T::zero()) || !c.is_finite() {
                return Err(Error::invalid("corner", format!("{c} Hz must be positive and finite")));
            }
        }
        if self.low_zeros.len() > self.low_poles.len() {
            return Err(Error::invalid(
                "low_zeros",
                "more low-side zeros than low-side poles",
            ));
        }
        if !self.gain_factor.is_finite() {
            return Err(Error::invalid("gain_factor", "must be finite"));
        }
        if !(self.noise_temperature >= T::zero()) {
            return Err(Error::invalid("noise_temperature", "must be >= 0"));
        }
        Ok(())
    }

    /// Complex response at `f` (Hz, `f >= 0`).
    pub fn response(&self, f: T) -> Complex<T> {
        let one = Complex::new(T::one(), T::zero());
        let jf = Complex::new(T::zero(), f);
        let mut h = Complex::new(self.gain_factor, T::zero());
        for &z in &self.zeros {
            h = h * (one + jf / z);
        }
        for &p in &self.poles {
            h = h / (one + jf / p);
        }
        for (k, &p) in self.low_poles.iter().enumerate() {
            let num = match self.low_zeros.get(k) {
                Some(&z) => jf + z,
                None => jf,
            };
            h = h * num / (jf + p);
        }
        h
    }

    pub fn magnitude(&self, f: T) -> T {
        self.response(f).norm()
    }

    /// Noise temperature used by the cascade.
    pub fn effective_noise_temperature(&self) -> T {
        match self.input_noise_density {
            Some(e) => e * e / (T::lit(4.0 * BOLTZMANN) * T::lit(NOISE_REFERENCE_RESISTANCE)),
            None => self.noise_temperature,
        }
    }
}

/// Cell and cable capacitances seen by the image charge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingNetwork<T = f64> {
    /// Cell capacitance C_0 (F).
    pub c_cell: T,
    /// Parasitic cable capacitance C_p (F).
    pub c_parasitic: T,
    /// Cable/load resistance for the corner frequency (Ω).
    pub r_input: T,
}

impl<T: Scalar> CouplingNetwork<T> {
    /// Short cable to the first stage: C_0 = 1 pF, C_p = 10 pF, R = 50 Ω.
    pub fn first_stage() -> Self {
        Self {
            c_cell: T::lit(1e-12),
            c_parasitic: T::lit(10e-12),
            r_input: T::lit(50.0),
        }
    }

    /// Room-temperature cable run: C_p = 300 pF.
    pub fn room_temperature() -> Self {
        Self {
            c_parasitic: T::lit(300e-12),
            ..Self::first_stage()
        }
    }
}

/// `f_c = 1 / (2π R C_p)`.
pub fn corner_frequency<T: Scalar>(net: &CouplingNetwork<T>) -> T {
    (T::TAU() * net.r_input * net.c_parasitic).recip()
}

/// `V_ac = Δq / (C_0 + C_p)`.
pub fn capacitive_division<T: Scalar>(delta_q: T, net: &CouplingNetwork<T>) -> T {
    delta_q / (net.c_cell + net.c_parasitic)
}

/// The cable corner as a passive unity-gain low-pass stage.
pub fn coupling_stage<T: Scalar>(net: &CouplingNetwork<T>) -> StageResponse<T> {
    StageResponse {
        poles: vec![corner_frequency(net)],
        ..StageResponse::flat(T::one(), T::zero())
    }
}

/// Common-emitter stage at the given small-signal point.
///
/// Mid-band gain is `-g_m·(R_3 ∥ r_o ∥ R_load)`. C_1 and C_2 add first-order
/// high-pass corners; the C_3 bypass of R_4 adds a zero at `1/(2π R_4 C_3)` and
/// a pole at `(1 + g_m R_4 (β+1)/β)/(2π R_4 C_3)`, which restores the
/// degenerated gain below the bypass corner. Infinite capacitors drop their
/// sections.
pub fn hbt_stage_response<T: Scalar>(
    ss: &SmallSignalParams<T>,
    net: &BiasNetwork<T>,
    load_resistance: T,
) -> Result<StageResponse<T>> {
    if !(load_resistance > T::zero()) {
        return Err(Error::Domain(format!("load resistance {load_resistance} must be > 0")));
    }
    if !(ss.g_m > T::zero() && ss.r_pi > T::zero() && ss.r_o > T::zero()) {
        return Err(Error::Domain("small-signal parameters must be positive".into()));
    }
    let one = T::one();
    let tau = T::TAU();
    let r_out = parallel(net.r_collector, ss.r_o);
    let r_load_eff = parallel(r_out, load_resistance);
    let beta = ss.g_m * ss.r_pi;

    let mut stage = StageResponse::flat(-ss.g_m * r_load_eff, T::lit(HBT_NOISE_TEMPERATURE));

    let r_in = parallel(parallel(net.r_upper, net.r_lower), ss.r_pi);
    if net.c_bypass.is_finite() {
        let f_z = (tau * net.r_emitter * net.c_bypass).recip();
        let degeneration = one + ss.g_m * net.r_emitter * (beta + one) / beta;
        stage.low_poles.push(f_z * degeneration);
        stage.low_zeros.push(f_z);
    }
    if net.c_in.is_finite() {
        stage.low_poles.push((tau * net.c_in * r_in).recip());
    }
    if net.c_out.is_finite() {
        stage.low_poles.push((tau * net.c_out * (r_out + load_resistance)).recip());
    }
    Ok(stage)
}

/// Mid-band gain magnitude with the emitter fully bypassed,
/// `g_m·(R_3 ∥ r_o ∥ R_load)`.
pub fn bypassed_gain<T: Scalar>(ss: &SmallSignalParams<T>, net: &BiasNetwork<T>, load: T) -> T {
    ss.g_m * parallel(parallel(net.r_collector, ss.r_o), load)
}

/// Load resistance at which the bypassed mid-band gain is exactly one.
pub fn unity_gain_load<T: Scalar>(ss: &SmallSignalParams<T>, net: &BiasNetwork<T>) -> Result<T> {
    let g_rem = ss.g_m - net.r_collector.recip() - ss.r_o.recip();
    if !(g_rem > T::zero()) {
        return Err(Error::Domain(format!(
            "g_m·(R_3 ∥ r_o) = {} < 1: unity gain unreachable",
            ss.g_m * parallel(net.r_collector, ss.r_o)
        )));
    }
    Ok(g_rem.recip())
}

/// Stage with a single high-pass pole at `f_low`, a single low-pass pole at
/// `f_high` and mid-band gain `10^(gain_db/20)`.
pub fn fixed_gain_stage<T: Scalar>(
    gain_db: T,
    f_low: T,
    f_high: T,
    noise_temperature: T,
) -> Result<StageResponse<T>> {
    if !(f_low > T::zero() && f_low < f_high) {
        return Err(Error::invalid("f_low", format!("need 0 < f_low ({f_low}) < f_high ({f_high})")));
    }
    let stage = StageResponse {
        poles: vec![f_high],
        low_poles: vec![f_low],
        ..StageResponse::flat(from_db20(gain_db), noise_temperature)
    };
    stage.validate()?;
    Ok(stage)
}

/// Ordered cascade of stages.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResponse<T = f64> {
    pub stages: Vec<StageResponse<T>>,
    /// Frequency at which `noise_temperature` was evaluated (Hz).
    pub reference_frequency: T,
    /// Input-referred cascade noise temperature (K).
    pub noise_temperature: T,
}

impl<T: Scalar> ChainResponse<T> {
    /// Product of all stage responses.
    pub fn response(&self, f: T) -> Complex<T> {
        self.stages
            .iter()
            .fold(Complex::new(T::one(), T::zero()), |acc, s| acc * s.response(f))
    }

    pub fn magnitude(&self, f: T) -> T {
        self.response(f).norm()
    }

    /// Friis noise temperature evaluated at `f`.
    pub fn noise_temperature_at(&self, f: T) -> Result<T> {
        friis(&self.stages, f)
    }

    /// A copy of this chain with stage `index` replaced.
    pub fn with_stage(&self, index: usize, stage: StageResponse<T>) -> Result<Self> {
        let mut stages = self.stages.clone();
        *stages
            .get_mut(index)
            .ok_or_else(|| Error::Range(format!("no stage {index}")))? = stage;
        cascade_at(stages, self.reference_frequency)
    }

    /// Noise-free, all-pass chain.
    pub fn unity() -> Self {
        Self {
            stages: vec![StageResponse::flat(T::one(), T::zero())],
            reference_frequency: T::lit(DEFAULT_REFERENCE_FREQUENCY),
            noise_temperature: T::zero(),
        }
    }
}

fn friis<T: Scalar>(stages: &[StageResponse<T>], f: T) -> Result<T> {
    let mut total = T::zero();
    let mut gain = T::one();
    for (k, s) in stages.iter().enumerate() {
        total = total + s.effective_noise_temperature() / gain;
        let g = s.magnitude(f);
        if k + 1 < stages.len() && g == T::zero() {
            return Err(Error::ZeroGainStage {
                stage: k,
                frequency: f.to_f64_lossy(),
            });
        }
        gain = gain * g * g;
    }
    Ok(total)
}

/// Cascade with noise referred to the input at the default reference
/// frequency.
pub fn cascade<T: Scalar>(stages: Vec<StageResponse<T>>) -> Result<ChainResponse<T>> {
    cascade_at(stages, T::lit(DEFAULT_REFERENCE_FREQUENCY))
}

pub fn cascade_at<T: Scalar>(stages: Vec<StageResponse<T>>, reference_frequency: T) -> Result<ChainResponse<T>> {
    if stages.is_empty() {
        return Err(Error::Input("cascade needs at least one stage".into()));
    }
    for s in &stages {
        s.validate()?;
    }
    let noise_temperature = friis(&stages, reference_frequency)?;
    Ok(ChainResponse {
        stages,
        reference_frequency,
        noise_temperature,
    })
}

/// `20·log10|H(f)|` at each frequency.
pub fn s21_db<T: Scalar>(chain: &ChainResponse<T>, frequencies: &[T]) -> Result<Vec<(T, T)>> {
    frequencies
        .iter()
        .map(|&f| {
            if f > T::zero() {
                Ok((f, db20(chain.magnitude(f))))
            } else {
                Err(Error::Domain(format!("frequency {f} must be > 0")))
            }
        })
        .collect()
}

/// `20·log10(signal / (density·√bandwidth))`.
pub fn snr_db<T: Scalar>(signal_rms: T, input_noise_density: T, bandwidth: T) -> T {
    db20(signal_rms / (input_noise_density * bandwidth.sqrt()))
}

/// Settings for the default two-stage amplifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplifierConfig<T = f64> {
    pub hbt_noise_temperature: T,
    /// Load seen by the HBT stage; `None` selects the unity-gain load.
    pub hbt_load: Option<T>,
    pub second_gain_db: T,
    pub second_f_low: T,
    pub second_f_high: T,
    pub second_noise_temperature: T,
    pub reference_frequency: T,
}

impl<T: Scalar> Default for AmplifierConfig<T> {
    fn default() -> Self {
        Self {
            hbt_noise_temperature: T::lit(HBT_NOISE_TEMPERATURE),
            hbt_load: None,
            second_gain_db: T::lit(SECOND_STAGE_GAIN_DB),
            second_f_low: T::lit(SECOND_STAGE_F_LOW),
            second_f_high: T::lit(SECOND_STAGE_F_HIGH),
            second_noise_temperature: T::lit(SECOND_STAGE_NOISE_TEMPERATURE),
            reference_frequency: T::lit(DEFAULT_REFERENCE_FREQUENCY),
        }
    }
}

/// First and second stage built from a biased device.
#[derive(Debug, Clone, PartialEq)]
pub struct Amplifier<T = f64> {
    pub small_signal: SmallSignalParams<T>,
    pub hbt_load: T,
    pub first: StageResponse<T>,
    pub second: StageResponse<T>,
    pub reference_frequency: T,
}

impl<T: Scalar> Amplifier<T> {
    pub fn build(
        network: &BiasNetwork<T>,
        params: &TransistorParams<T>,
        solver: &SolverOptions<T>,
        cfg: &AmplifierConfig<T>,
    ) -> Result<Self> {
        let op = solve_operating_point(network, params, solver.tol, solver.max_iter)?;
        let ss = small_signal(&op, params)?;
        let load = match cfg.hbt_load {
            Some(r) => r,
            None => unity_gain_load(&ss, network)?,
        };
        let first = hbt_stage_response(&ss, network, load)?.with_noise_temperature(cfg.hbt_noise_temperature);
        let second = fixed_gain_stage(
            cfg.second_gain_db,
            cfg.second_f_low,
            cfg.second_f_high,
            cfg.second_noise_temperature,
        )?;
        Ok(Self {
            small_signal: ss,
            hbt_load: load,
            first,
            second,
            reference_frequency: cfg.reference_frequency,
        })
    }

    /// HBT stage alone.
    pub fn first_stage_chain(&self) -> Result<ChainResponse<T>> {
        cascade_at(vec![self.first.clone()], self.reference_frequency)
    }

    /// HBT stage followed by the fixed-gain stage.
    pub fn two_stage_chain(&self) -> Result<ChainResponse<T>> {
        cascade_at(vec![self.first.clone(), self.second.clone()], self.reference_frequency)
    }

    /// Cable corner, HBT stage and fixed-gain stage, as seen by the cell
    /// voltage. The second stage sits at index 2.
    pub fn sweep_chain(&self, coupling: &CouplingNetwork<T>) -> Result<ChainResponse<T>> {
        cascade_at(
            vec![coupling_stage(coupling), self.first.clone(), self.second.clone()],
            self.reference_frequency,
        )
    }
}

fn parallel<T: Scalar>(a: T, b: T) -> T {
    if !a.is_finite() {
        return b;
    }
    if !b.is_finite() {
        return a;
    }
    a * b / (a + b)
}
