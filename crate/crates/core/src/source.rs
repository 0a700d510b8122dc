//! Electrons-on-helium signal source.
//!
//! A resonant microwave drive, Stark-tuned by the cell bias `V_BC`, pumps a
//! two-level population `ρ22` that relaxes with time constant `τ`. The
//! excited electrons sit further from the helium surface, which changes the
//! image charge on the cell electrodes.

use crate::error::{Error, Result};
use crate::scalar::{Scalar, ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY};

pub const DEFAULT_V_RESONANCE: f64 = 11.6;
pub const DEFAULT_LINEWIDTH: f64 = 0.1;

/// Cell electrode geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry<T = f64> {
    /// C_0 (F).
    pub c_cell: T,
    /// Electrode area over separation, S/D (m).
    pub s_over_d: T,
    /// Displacement of an excited electron, Δz (m).
    pub delta_z: T,
}

impl<T: Scalar> Default for CellGeometry<T> {
    fn default() -> Self {
        Self {
            c_cell: T::lit(1e-12),
            s_over_d: T::lit(5.65e-3),
            delta_z: T::lit(35e-9),
        }
    }
}

impl<T: Scalar> CellGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c_cell", self.c_cell), ("s_over_d", self.s_over_d), ("delta_z", self.delta_z)] {
            if !(v > T::zero()) {
                return Err(Error::invalid(name, format!("{v} must be > 0")));
            }
        }
        Ok(())
    }

    /// Parallel-plate capacitance `ε_0·S/D` implied by the geometry.
    pub fn plate_capacitance(&self) -> T {
        T::lit(VACUUM_PERMITTIVITY) * self.s_over_d
    }
}

/// Electron ensemble and resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams<T = f64> {
    /// Areal density (m⁻²).
    pub n_s: T,
    /// MW-on steady-state occupancy at resonance used to set the default
    /// pump rate.
    pub rho22_target: T,
    /// Relaxation time τ (s).
    pub tau_relax: T,
    /// Bias at resonance (V).
    pub v_resonance: T,
    /// Resonance FWHM in bias units (V).
    pub linewidth_v: T,
    /// Microwave frequency (Hz). Not used by the dynamics.
    pub f_mw: T,
}

impl<T: Scalar> Default for EnsembleParams<T> {
    fn default() -> Self {
        Self {
            n_s: T::lit(1e12),
            rho22_target: T::lit(0.1),
            tau_relax: T::lit(1e-6),
            v_resonance: T::lit(DEFAULT_V_RESONANCE),
            linewidth_v: T::lit(DEFAULT_LINEWIDTH),
            f_mw: T::lit(110e9),
        }
    }
}

impl<T: Scalar> EnsembleParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho22_target >= T::zero() && self.rho22_target <= T::lit(0.5)) {
            return Err(Error::invalid("rho22_target", "must lie in [0, 0.5]"));
        }
        if !(self.tau_relax > T::zero()) {
            return Err(Error::Domain(format!("tau_relax = {} must be > 0", self.tau_relax)));
        }
        if !(self.linewidth_v > T::zero()) {
            return Err(Error::invalid("linewidth_v", "must be > 0"));
        }
        if !(self.n_s >= T::zero()) {
            return Err(Error::invalid("n_s", "must be >= 0"));
        }
        Ok(())
    }

    /// Pump rate whose continuous steady state is `rho22_target`,
    /// `r = ρ / (τ(1 − 2ρ))`.
    pub fn cw_excitation_rate(&self) -> Result<T> {
        self.validate()?;
        let rho = self.rho22_target;
        let denom = self.tau_relax * (T::one() - rho - rho);
        if !(denom > T::zero()) {
            return Err(Error::invalid("rho22_target", "0.5 needs an infinite pump rate"));
        }
        Ok(rho / denom)
    }
}

/// Pulse-modulated microwave drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveWaveform<T = f64> {
    /// Modulation frequency (Hz).
    pub f_m: T,
    /// MW-on fraction of each period.
    pub duty: T,
    /// Pump rate while the MW is on (s⁻¹).
    pub excitation_rate: T,
}

impl<T: Scalar> DriveWaveform<T> {
    /// 50 % duty drive with the ensemble's default pump rate.
    pub fn new(f_m: T, ens: &EnsembleParams<T>) -> Result<Self> {
        let d = Self {
            f_m,
            duty: T::lit(0.5),
            excitation_rate: ens.cw_excitation_rate()?,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_m > T::zero() && self.f_m.is_finite()) {
            return Err(Error::invalid("f_m", format!("{} must be > 0", self.f_m)));
        }
        if !(self.duty > T::zero() && self.duty < T::one()) {
            return Err(Error::invalid("duty", "must lie in (0, 1)"));
        }
        if !(self.excitation_rate >= T::zero() && self.excitation_rate.is_finite()) {
            return Err(Error::invalid("excitation_rate", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn period(&self) -> T {
        self.f_m.recip()
    }
}

/// Lorentzian detuning factor with unit peak at `v_resonance`.
pub fn stark_excitation_fraction<T: Scalar>(v_bc: T, ens: &EnsembleParams<T>) -> T {
    let x = (v_bc - ens.v_resonance) * T::lit(2.0) / ens.linewidth_v;
    (T::one() + x * x).recip()
}

/// Effective relaxation time under pulsed pumping,
/// `τ / (1 + 2 r τ · duty)`.
pub fn effective_relaxation_time<T: Scalar>(drive: &DriveWaveform<T>, tau: T) -> T {
    tau / (T::one() + T::lit(2.0) * drive.excitation_rate * tau * drive.duty)
}

/// Periodic steady-state population, one value per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationWaveform<T = f64> {
    /// Sample spacing (s).
    pub dt: T,
    pub samples_per_period: usize,
    pub rho22: Vec<T>,
}

impl<T: Scalar> PopulationWaveform<T> {
    pub fn times(&self) -> Vec<T> {
        (0..self.rho22.len()).map(|k| self.dt * T::from_count(k)).collect()
    }

    pub fn peak_to_peak(&self) -> T {
        let (lo, hi) = self
            .rho22
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    pub fn mean(&self) -> T {
        self.rho22.iter().fold(T::zero(), |a, &v| a + v) / T::from_count(self.rho22.len())
    }
}

/// Closed-form periodic solution of `dρ/dt = r(t)(1 − 2ρ) − ρ/τ` for a
/// square pump.
#[derive(Debug, Clone, Copy)]
struct PeriodicSolution<T> {
    t_on: T,
    rho_inf: T,
    b_on: T,
    tau: T,
    rho_start: T,
    rho_end_on: T,
}

impl<T: Scalar> PeriodicSolution<T> {
    fn new(drive: &DriveWaveform<T>, tau: T, scale: T) -> Self {
        let r = drive.excitation_rate * scale;
        let period = drive.period();
        let t_on = period * drive.duty;
        let b_on = r + r + tau.recip();
        let rho_inf = r / b_on;
        let e_on = (-b_on * t_on).exp();
        let e_off = (-(period - t_on) / tau).exp();
        // Fixed point of one full period of the affine segment maps.
        let rho_start = rho_inf * (T::one() - e_on) * e_off / (T::one() - e_on * e_off);
        let rho_end_on = rho_inf + (rho_start - rho_inf) * e_on;
        Self {
            t_on,
            rho_inf,
            b_on,
            tau,
            rho_start,
            rho_end_on,
        }
    }

    fn at_phase(&self, phase: T) -> T {
        if phase < self.t_on {
            self.rho_inf + (self.rho_start - self.rho_inf) * (-self.b_on * phase).exp()
        } else {
            self.rho_end_on * (-(phase - self.t_on) / self.tau).exp()
        }
    }
}

/// Sampled periodic steady state of the pumped population.
///
/// The waveform starts at the MW-on edge. Each segment is integrated in
/// closed form and the start value is the exact periodic fixed point, so no
/// warm-up periods are needed.
pub fn rydberg_population<T: Scalar>(
    drive: &DriveWaveform<T>,
    ens: &EnsembleParams<T>,
    excitation_scale: T,
    n_periods: usize,
    samples_per_period: usize,
) -> Result<PopulationWaveform<T>> {
    if !(ens.tau_relax > T::zero()) {
        return Err(Error::Domain(format!("tau_relax = {} must be > 0", ens.tau_relax)));
    }
    drive.validate()?;
    if samples_per_period < 16 {
        return Err(Error::invalid("samples_per_period", "need at least 16"));
    }
    if n_periods < 1 {
        return Err(Error::invalid("n_periods", "need at least 1"));
    }
    if !(excitation_scale >= T::zero()) {
        return Err(Error::invalid("excitation_scale", "must be >= 0"));
    }
    let sol = PeriodicSolution::new(drive, ens.tau_relax, excitation_scale);
    let dt = drive.period() / T::from_count(samples_per_period);
    let one_period: Vec<T> = (0..samples_per_period)
        .map(|k| sol.at_phase(dt * T::from_count(k)))
        .collect();
    let rho22 = one_period
        .iter()
        .copied()
        .cycle()
        .take(n_periods * samples_per_period)
        .collect();
    Ok(PopulationWaveform {
        dt,
        samples_per_period,
        rho22,
    })
}

/// `Δq = Δz·e·n_s·ρ22·S/D`.
pub fn image_charge<T: Scalar>(rho22: T, geom: &CellGeometry<T>, n_s: T) -> T {
    geom.delta_z * T::lit(ELEMENTARY_CHARGE) * n_s * rho22 * geom.s_over_d
}

/// Image charge and cell voltage `Δq / (C_0 + C_p)` for every sample.
pub fn image_charge_waveform<T: Scalar>(
    rho22: &[T],
    geom: &CellGeometry<T>,
    n_s: T,
    c_parasitic: T,
) -> (Vec<T>, Vec<T>) {
    let c_total = geom.c_cell + c_parasitic;
    let dq: Vec<T> = rho22.iter().map(|&r| image_charge(r, geom, n_s)).collect();
    let v = dq.iter().map(|&q| q / c_total).collect();
    (dq, v)
}

/// `2π f_m e n_s C_0 Δz ρ22 / ε_0`.
pub fn rms_image_current<T: Scalar>(f_m: T, geom: &CellGeometry<T>, n_s: T, rho22: T) -> T {
    T::TAU() * f_m * T::lit(ELEMENTARY_CHARGE) * n_s * geom.c_cell * geom.delta_z * rho22
        / T::lit(VACUUM_PERMITTIVITY)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn lorentzian_shape() {
        let ens = EnsembleParams::<f64>::default();
        assert_eq!(stark_excitation_fraction(11.6, &ens), 1.0);
        assert_relative_eq!(stark_excitation_fraction(11.65, &ens), 0.5, max_relative = 1e-9);
        assert_relative_eq!(stark_excitation_fraction(11.55, &ens), 0.5, max_relative = 1e-9);
        let shifted = EnsembleParams { v_resonance: 10.45, ..ens };
        for k in 0..50 {
            let v = 9.0 + 0.07 * k as f64;
            assert_relative_eq!(
                stark_excitation_fraction(v, &shifted),
                stark_excitation_fraction(v + 1.15, &ens),
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn default_rate_hits_target() {
        let ens = EnsembleParams::<f64>::default();
        let r = ens.cw_excitation_rate().unwrap();
        assert_relative_eq!(r, 1.25e5, max_relative = 1e-12);
        let sat = EnsembleParams { rho22_target: 0.5, ..ens };
        assert!(sat.cw_excitation_rate().is_err());
    }

    #[test]
    fn no_drive_no_population() {
        let ens = EnsembleParams::<f64>::default();
        let d = DriveWaveform { excitation_rate: 0.0, ..DriveWaveform::new(1e5, &ens).unwrap() };
        let w = rydberg_population(&d, &ens, 1.0, 2, 64).unwrap();
        assert!(w.rho22.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn saturation_and_free_decay() {
        let ens = EnsembleParams::<f64>::default();
        let d = DriveWaveform { f_m: 1e3, duty: 0.5, excitation_rate: 1e9 };
        let w = rydberg_population(&d, &ens, 1.0, 1, 4096).unwrap();
        let plateau = w.rho22[2000];
        assert!((plateau - 0.5).abs() < 1e-3);
        let k0 = 2048;
        let k = k0 + 1;
        let ratio = w.rho22[k] / w.rho22[k0];
        assert_relative_eq!(ratio, (-w.dt / 1e-6).exp(), max_relative = 1e-9);
    }

    #[test]
    fn ripple_falls_above_relaxation_corner() {
        let ens = EnsembleParams::<f64>::default();
        let slow = rydberg_population(&DriveWaveform::new(250e3, &ens).unwrap(), &ens, 1.0, 1, 256).unwrap();
        let fast_drive = DriveWaveform::new(10e6, &ens).unwrap();
        let fast = rydberg_population(&fast_drive, &ens, 1.0, 1, 256).unwrap();
        assert!(fast.peak_to_peak() < 0.1 * slow.peak_to_peak());
        let tau_eff = effective_relaxation_time(&fast_drive, ens.tau_relax);
        let lp = |f: f64| 1.0 / (1.0 + (std::f64::consts::TAU * f * tau_eff).powi(2)).sqrt();
        assert!(lp(10e6) / lp(250e3) < 0.1);
    }

    #[test]
    fn invalid_inputs() {
        let ens = EnsembleParams::<f64>::default();
        let d = DriveWaveform::new(1e5, &ens).unwrap();
        let bad = EnsembleParams { tau_relax: 0.0, ..ens };
        assert!(matches!(rydberg_population(&d, &bad, 1.0, 1, 64), Err(Error::Domain(_))));
        assert!(rydberg_population(&d, &ens, 1.0, 1, 8).is_err());
        assert!(DriveWaveform::new(0.0, &ens).is_err());
        assert!(DriveWaveform { duty: 1.0, ..d }.validate().is_err());
    }

    #[test]
    fn image_charge_examples() {
        let g = CellGeometry::<f64>::default();
        let dq = image_charge(0.1, &g, 1e12);
        let oracle = 35e-9 * 1.602176634e-19 * 1e12 * 0.1 * 5.65e-3;
        assert_relative_eq!(dq, oracle, max_relative = 1e-12);
        assert!((dq - 3.16e-18).abs() < 0.02e-18);
        let (_, v) = image_charge_waveform(&[0.1], &g, 1e12, 300e-12);
        assert!((v[0] - 10.5e-9).abs() / 10.5e-9 < 0.01);
        let (_, v) = image_charge_waveform(&[0.1], &g, 1e12, 10e-12);
        assert!((v[0] - 290e-9).abs() / 290e-9 < 0.02);
    }

    #[test]
    fn rms_current_examples() {
        let g = CellGeometry::<f64>::default();
        let i = rms_image_current(100e3, &g, 1e12, 0.1);
        let oracle = 2.0 * std::f64::consts::PI * 100e3 * 1.602176634e-19 * 1e12 * 1e-12 * 35e-9 * 0.1 / 8.8541878128e-12;
        assert_relative_eq!(i, oracle, max_relative = 1e-12);
        assert!(i > 3.5e-11 && i < 4.5e-11);
        // Same order of magnitude as the ~100 pA estimate.
        assert!((i / 100e-12).log10().abs() < 1.0);
        assert_eq!(rms_image_current(200e3, &g, 1e12, 0.1), 2.0 * i);
        assert_eq!(rms_image_current(100e3, &g, 1e12, 0.0), 0.0);
        // With C_0 = ε_0·S/D the current equals 2π f_m Δq.
        let plate = CellGeometry { c_cell: g.plate_capacitance(), ..g };
        assert_relative_eq!(
            rms_image_current(100e3, &plate, 1e12, 0.1),
            std::f64::consts::TAU * 100e3 * image_charge(0.1, &g, 1e12),
            max_relative = 1e-12
        );
    }

    #[test]
    fn single_precision_population() {
        let ens = EnsembleParams::<f32>::default();
        let d = DriveWaveform::new(100e3f32, &ens).unwrap();
        let w = rydberg_population(&d, &ens, 1.0, 2, 64).unwrap();
        assert!(w.rho22.iter().all(|&r| (0.0..=0.5).contains(&r)));
    }

    proptest! {
        #[test]
        fn population_bounded_and_periodic(
            lf in 3.0f64..7.5, duty in 0.05f64..0.95, lr in 2.0f64..9.0, scale in 0.0f64..1.0, spp in 16usize..80
        ) {
            let ens = EnsembleParams::<f64>::default();
            let d = DriveWaveform { f_m: 10f64.powf(lf), duty, excitation_rate: 10f64.powf(lr) };
            let w = rydberg_population(&d, &ens, scale, 3, spp).unwrap();
            for &r in &w.rho22 {
                prop_assert!((0.0..=0.5).contains(&r));
            }
            for k in 0..spp {
                let a = w.rho22[k];
                let b = w.rho22[k + spp];
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
            }
        }

        #[test]
        fn image_charge_linear(rho in 0.0f64..0.5, k in 0.1f64..10.0, ns in 1e10f64..1e14) {
            let g = CellGeometry::<f64>::default();
            let base = image_charge_waveform(&[rho], &g, ns, 10e-12);
            let by_n = image_charge_waveform(&[rho], &g, ns * k, 10e-12);
            let by_rho = image_charge_waveform(&[rho * k], &g, ns, 10e-12);
            let tol = 1e-12 * base.1[0].abs().max(1e-300) * k;
            prop_assert!((by_n.1[0] - k * base.1[0]).abs() <= tol);
            prop_assert!((by_rho.1[0] - k * base.1[0]).abs() <= tol);
        }
    }
}
