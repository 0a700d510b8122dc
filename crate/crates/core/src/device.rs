//! Nonlinear HBT model, DC operating point of the common-emitter bias
//! network, hybrid-π linearization and power bookkeeping.
//!
//! The junction law is a single exponential with a linear Early factor on
//! the collector current only:
//!
//! ```text
//! i_c = i_sat · exp(v_be / v_teff) · (1 + v_ce / v_early)
//! i_b = i_sat · exp(v_be / v_teff) / beta_f
//! ```
//!
//! so that at a fixed base current the output curves `i_c(v_ce)` are straight
//! lines whose backward extrapolation meets the `v_ce` axis at `-v_early`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest accepted `v_be / v_teff` before the exponential is rejected.
pub const EXPONENT_CAP: f64 = 200.0;

/// Cooling power of the still plate at T_MC ≈ 100 mK (W).
pub const STILL_COOLING_POWER: f64 = 33e-3;
/// Cooling power of the mixing chamber at T_MC ≈ 100 mK (W).
pub const MIXING_CHAMBER_COOLING_POWER: f64 = 420e-6;
/// Default ratio of cooling power to dissipation regarded as a safe margin.
pub const DEFAULT_MARGIN_RATIO: f64 = 10.0;

/// Default effective thermal voltage: 1/40 V, so that `µ_f = 40·V_A`.
pub const DEFAULT_V_TEFF: f64 = 0.025;
pub const DEFAULT_V_EARLY: f64 = 124.0;
pub const DEFAULT_BETA_F: f64 = 160.0;
/// Collector current the default device is calibrated to in the default network.
pub const DEFAULT_BIAS_CURRENT: f64 = 1e-4;

/// Fitted large-signal parameters of the transistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransistorParams<T = f64> {
    /// Saturation current (A).
    pub i_sat: T,
    /// Effective thermal voltage of the junction law (V).
    pub v_teff: T,
    /// Early voltage (V).
    pub v_early: T,
    /// Forward current gain at `v_ce → 0`.
    pub beta_f: T,
}

impl<T: Scalar> TransistorParams<T> {
    pub fn new(i_sat: T, v_teff: T, v_early: T, beta_f: T) -> Result<Self> {
        let p = Self {
            i_sat,
            v_teff,
            v_early,
            beta_f,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        positive("i_sat", self.i_sat)?;
        positive("v_teff", self.v_teff)?;
        if !(self.v_early >= T::one()) || !self.v_early.is_finite() {
            return Err(Error::invalid("v_early", format!("{} < 1 V", self.v_early)));
        }
        if !(self.beta_f >= T::one()) || !self.beta_f.is_finite() {
            return Err(Error::invalid("beta_f", format!("{} < 1", self.beta_f)));
        }
        Ok(())
    }

    /// Back-solve `i_sat` so that `network` biases the device at collector
    /// current `target_ic`.
    pub fn calibrated(
        network: &BiasNetwork<T>,
        target_ic: T,
        v_teff: T,
        v_early: T,
        beta_f: T,
    ) -> Result<Self> {
        network.validate()?;
        positive("target_ic", target_ic)?;
        // i_c is fixed; the only coupling left is the emitter drop of i_b,
        // which is a contraction with factor R_4·i_c/(beta·V_A) << 1.
        let mut e = target_ic;
        let mut v_ce = T::zero();
        for _ in 0..64 {
            let i_b = e / beta_f;
            v_ce = network.v_supply
                - target_ic * network.r_collector
                - (target_ic + i_b) * network.r_emitter;
            e = target_ic / (T::one() + v_ce / v_early);
        }
        if v_ce < T::zero() {
            return Err(Error::Domain(format!(
                "target collector current {target_ic} saturates the network (v_ce = {v_ce})"
            )));
        }
        let i_b = e / beta_f;
        let i_e = target_ic + i_b;
        let g = network.r_lower.recip() + network.r_upper.recip();
        let v_b = (network.v_supply / network.r_upper - i_b) / g;
        let v_be = v_b - i_e * network.r_emitter;
        Self::new(e / (v_be / v_teff).exp(), v_teff, v_early, beta_f)
    }

    /// Ratio `i_c / i_b` at a given collector-emitter voltage.
    pub fn current_gain_at(&self, v_ce: T) -> T {
        self.beta_f * (T::one() + v_ce / self.v_early)
    }

    /// Junction exponential `i_sat·exp(v_be/v_teff)`, rejecting overflow.
    fn junction(&self, v_be: T) -> Result<T> {
        let ratio = v_be / self.v_teff;
        if ratio > T::lit(EXPONENT_CAP) {
            return Err(Error::ExponentOverflow {
                ratio: ratio.to_f64_lossy(),
                cap: EXPONENT_CAP,
            });
        }
        Ok(self.i_sat * ratio.exp())
    }
}

impl<T: Scalar> Default for TransistorParams<T> {
    fn default() -> Self {
        Self::calibrated(
            &BiasNetwork::default(),
            T::lit(DEFAULT_BIAS_CURRENT),
            T::lit(DEFAULT_V_TEFF),
            T::lit(DEFAULT_V_EARLY),
            T::lit(DEFAULT_BETA_F),
        )
        .expect("default network admits the default bias point")
    }
}

/// Common-emitter bias network. `r_upper` runs from the supply to the base,
/// `r_lower` from the base to ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasNetwork<T = f64> {
    pub v_supply: T,
    pub r_upper: T,
    pub r_lower: T,
    pub r_collector: T,
    pub r_emitter: T,
    pub c_in: T,
    pub c_out: T,
    pub c_bypass: T,
}

impl<T: Scalar> Default for BiasNetwork<T> {
    fn default() -> Self {
        Self {
            v_supply: T::lit(1.0),
            r_upper: T::lit(574e3),
            r_lower: T::lit(235e3),
            r_collector: T::lit(1e3),
            r_emitter: T::lit(24.0),
            c_in: T::lit(12e-9),
            c_out: T::lit(12e-9),
            c_bypass: T::lit(220e-9),
        }
    }
}

impl<T: Scalar> BiasNetwork<T> {
    /// All values must be positive. Infinite capacitances are accepted as
    /// the short-circuit limit; an infinite collector resistance is accepted
    /// here and rejected by the solver.
    pub fn validate(&self) -> Result<()> {
        positive("v_supply", self.v_supply)?;
        positive("r_upper", self.r_upper)?;
        positive("r_lower", self.r_lower)?;
        positive("r_collector", self.r_collector)?;
        positive("r_emitter", self.r_emitter)?;
        positive("c_in", self.c_in)?;
        positive("c_out", self.c_out)?;
        positive("c_bypass", self.c_bypass)?;
        Ok(())
    }

    /// Thevenin equivalent (voltage, resistance) of the base divider.
    pub fn thevenin(&self) -> (T, T) {
        let v = self.v_supply * self.r_lower / (self.r_lower + self.r_upper);
        let r = self.r_lower * self.r_upper / (self.r_lower + self.r_upper);
        (v, r)
    }
}

/// DC bias state of the transistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint<T = f64> {
    pub v_be: T,
    pub v_ce: T,
    pub i_b: T,
    pub i_c: T,
}

impl<T: Scalar> OperatingPoint<T> {
    pub fn new(v_be: T, v_ce: T, i_b: T, i_c: T) -> Self {
        Self { v_be, v_ce, i_b, i_c }
    }
}

/// Hybrid-π parameters at an operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallSignalParams<T = f64> {
    pub g_m: T,
    pub r_pi: T,
    pub r_o: T,
}

/// DC currents `(i_b, i_c)` at the given terminal voltages.
pub fn evaluate_dc<T: Scalar>(params: &TransistorParams<T>, v_be: T, v_ce: T) -> Result<(T, T)> {
    params.validate()?;
    if !(v_ce >= T::zero()) {
        return Err(Error::Domain(format!("v_ce = {v_ce} < 0")));
    }
    let e = params.junction(v_be)?;
    Ok((e / params.beta_f, e * (T::one() + v_ce / params.v_early)))
}

/// Kirchhoff current residuals `[base node, collector node]` (A) of the bias
/// network at trial junction voltages.
pub fn kirchhoff_residuals<T: Scalar>(
    network: &BiasNetwork<T>,
    params: &TransistorParams<T>,
    v_be: T,
    v_ce: T,
) -> Result<[T; 2]> {
    Ok(Residuals::at(network, params, v_be, v_ce)?.f)
}

struct Residuals<T> {
    f: [T; 2],
    jac: [[T; 2]; 2],
    i_b: T,
    i_c: T,
}

impl<T: Scalar> Residuals<T> {
    fn at(net: &BiasNetwork<T>, p: &TransistorParams<T>, v_be: T, v_ce: T) -> Result<Self> {
        let one = T::one();
        let e = p.junction(v_be)?;
        let early = one + v_ce / p.v_early;
        let i_c = e * early;
        let i_b = e / p.beta_f;
        let i_e = i_c + i_b;
        let v_e = i_e * net.r_emitter;
        let v_b = v_be + v_e;
        let v_c = v_ce + v_e;
        let g = net.r_lower.recip() + net.r_upper.recip();

        let f_base = (net.v_supply - v_b) / net.r_upper - v_b / net.r_lower - i_b;
        let f_coll = (net.v_supply - v_c) / net.r_collector - i_c;

        let dic = [i_c / p.v_teff, e / p.v_early];
        let dib = [i_b / p.v_teff, T::zero()];
        let die = [dic[0] + dib[0], dic[1] + dib[1]];
        let dvb = [one + net.r_emitter * die[0], net.r_emitter * die[1]];
        let dvc = [net.r_emitter * die[0], one + net.r_emitter * die[1]];
        let jac = [
            [-g * dvb[0] - dib[0], -g * dvb[1] - dib[1]],
            [
                -dvc[0] / net.r_collector - dic[0],
                -dvc[1] / net.r_collector - dic[1],
            ],
        ];
        Ok(Self {
            f: [f_base, f_coll],
            jac,
            i_b,
            i_c,
        })
    }

    fn merit(&self) -> T {
        self.f[0] * self.f[0] + self.f[1] * self.f[1]
    }
}

/// Newton solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<T = f64> {
    /// Residual tolerance relative to the collector current.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            max_iter: 100,
        }
    }
}

/// Solve the DC operating point with damped Newton iteration on
/// `(v_be, v_ce)`, starting from `(0.9 V, v_supply / 2)`.
pub fn solve_operating_point<T: Scalar>(
    network: &BiasNetwork<T>,
    params: &TransistorParams<T>,
    tol: T,
    max_iter: usize,
) -> Result<OperatingPoint<T>> {
    network.validate()?;
    params.validate()?;
    if !(tol > T::zero()) {
        return Err(Error::invalid("tol", "must be > 0"));
    }
    if !network.r_collector.is_finite() {
        return Err(Error::NoDcPath("collector is open".into()));
    }
    if !network.r_lower.is_finite() && !network.r_upper.is_finite() {
        return Err(Error::NoDcPath("base is open".into()));
    }

    let half = T::lit(0.5);
    // Stay clear of the exponent cap for very small v_teff.
    let v_be0 = T::lit(0.9).min(half * T::lit(EXPONENT_CAP) * params.v_teff);
    let mut x = [v_be0, network.v_supply * half];
    let mut res = Residuals::at(network, params, x[0], x[1])?;
    let mut last = T::infinity();

    for iteration in 0..=max_iter {
        let scale = res.i_c.abs();
        last = res.f[0].abs().max(res.f[1].abs());
        if res.f.iter().all(|r| r.abs() < tol * scale) {
            if x[1] < T::zero() {
                return Err(Error::Domain(format!(
                    "transistor saturated: v_ce = {} V",
                    x[1]
                )));
            }
            log::debug!("operating point converged in {iteration} iterations");
            return Ok(OperatingPoint::new(x[0], x[1], res.i_b, res.i_c));
        }
        if iteration == max_iter {
            break;
        }

        let [[a, b], [c, d]] = res.jac;
        let det = a * d - b * c;
        if det == T::zero() || !det.is_finite() {
            return Err(Error::NoConvergence {
                iterations: iteration,
                residual: last.to_f64_lossy(),
            });
        }
        let dx = [
            (-res.f[0] * d + res.f[1] * b) / det,
            (-res.f[1] * a + res.f[0] * c) / det,
        ];

        let merit = res.merit();
        let mut lambda = T::one();
        let mut accepted = None;
        for _ in 0..60 {
            let trial = [x[0] + lambda * dx[0], x[1] + lambda * dx[1]];
            if let Ok(r) = Residuals::at(network, params, trial[0], trial[1]) {
                if r.merit() < merit || r.f.iter().all(|f| f.abs() < tol * r.i_c.abs()) {
                    accepted = Some((trial, r));
                    break;
                }
            }
            lambda = lambda * half;
        }
        match accepted {
            Some((trial, r)) => {
                x = trial;
                res = r;
            }
            None => break,
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last.to_f64_lossy(),
    })
}

/// Hybrid-π linearization at `op`.
pub fn small_signal<T: Scalar>(
    op: &OperatingPoint<T>,
    params: &TransistorParams<T>,
) -> Result<SmallSignalParams<T>> {
    if !(op.i_c > T::zero()) {
        return Err(Error::Domain(format!("i_c = {} must be > 0", op.i_c)));
    }
    let g_m = op.i_c / params.v_teff;
    Ok(SmallSignalParams {
        g_m,
        r_pi: params.beta_f / g_m,
        r_o: (params.v_early + op.v_ce) / op.i_c,
    })
}

/// Total DC dissipation `i_c·v_ce + i_b·v_be` (W).
pub fn power_dissipation<T: Scalar>(op: &OperatingPoint<T>) -> T {
    op.i_c * op.v_ce + op.i_b * op.v_be
}

/// Outcome of comparing dissipated power with an available cooling power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalCheck<T = f64> {
    /// `p_dissipated < p_cooling`.
    pub within_budget: bool,
    /// `p_cooling - p_dissipated` (W).
    pub margin: T,
    /// `p_cooling / p_dissipated`; infinite for zero dissipation.
    pub ratio: T,
}

impl<T: Scalar> ThermalCheck<T> {
    /// Within budget and with cooling power at least `required_ratio` times
    /// the dissipation.
    pub fn meets_ratio(&self, required_ratio: T) -> bool {
        self.within_budget && self.ratio >= required_ratio
    }
}

pub fn thermal_budget_check<T: Scalar>(p_dissipated: T, p_cooling: T) -> ThermalCheck<T> {
    let ratio = if p_dissipated > T::zero() {
        p_cooling / p_dissipated
    } else if p_cooling > T::zero() {
        T::infinity()
    } else {
        T::zero()
    };
    ThermalCheck {
        within_budget: p_dissipated < p_cooling,
        margin: p_cooling - p_dissipated,
        ratio,
    }
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("{v} must be > 0")))
    }
}
