use log::warn;

use super::dataset::{IvDataset, IvKind, SweepDirection};
use crate::device::OperatingPoint;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower edge of the default Early-fit window (V).
pub const EARLY_WINDOW_MIN: f64 = 0.5;
/// Base-current labels admitted to the Early fit (A).
pub const EARLY_LABEL_RANGE: (f64, f64) = (200e-9, 800e-9);

/// Result of the backward extrapolation of the output family.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyFit<T = f64> {
    /// Magnitude of the slope-weighted mean `V_ce` intercept (V).
    pub v_early: T,
    /// `V_ce` intercept of every included curve (V, negative).
    pub per_curve_intercepts: Vec<T>,
    /// Labels of the included curves (A).
    pub labels: Vec<T>,
    pub fit_window: (T, T),
    /// Mean coefficient of determination of the included lines.
    pub r_squared: T,
    /// Warnings about excluded curves.
    pub warnings: Vec<String>,
}

/// Exponential fit of the input characteristic
/// `i_b = i_b0·exp(v_be / v_teff)` with `i_b0 = i_sat / β_F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeFit<T = f64> {
    pub i_b0: T,
    pub v_teff: T,
    /// RMS residual of `ln i_b`.
    pub residual: T,
    /// Points used after dropping non-positive currents.
    pub n_points: usize,
}

impl<T: Scalar> DiodeFit<T> {
    /// Transport saturation current for a given current gain.
    pub fn i_sat(&self, beta_f: T) -> T {
        self.i_b0 * beta_f
    }
}

struct Line<T> {
    slope: T,
    intercept: T,
    r_squared: T,
}

fn least_squares<T: Scalar>(pts: impl Iterator<Item = (T, T)> + Clone) -> Option<Line<T>> {
    let n = pts.clone().count();
    if n < 2 {
        return None;
    }
    let nf = T::from_count(n);
    let (sx, sy) = pts.clone().fold((T::zero(), T::zero()), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (x, y) in pts {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    if !(sxx > T::zero()) {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy > T::zero() {
        (sxy * sxy / (sxx * syy)).min(T::one()).max(T::zero())
    } else {
        T::one()
    };
    Some(Line {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Backward-extrapolated Early voltage with the default label range.
///
/// `window` defaults to `[0.5 V, largest V_ce]`.
pub fn fit_early_voltage<T: Scalar>(ds: &IvDataset<T>, window: Option<(T, T)>) -> Result<EarlyFit<T>> {
    let range = (T::lit(EARLY_LABEL_RANGE.0), T::lit(EARLY_LABEL_RANGE.1));
    fit_early_voltage_in(ds, window, range)
}

/// As [`fit_early_voltage`] with an explicit `I_b` label range.
pub fn fit_early_voltage_in<T: Scalar>(
    ds: &IvDataset<T>,
    window: Option<(T, T)>,
    label_range: (T, T),
) -> Result<EarlyFit<T>> {
    if ds.kind != IvKind::Output {
        return Err(Error::Input("Early fit needs output characteristics".into()));
    }
    let (v_min, v_max) = ds.voltage_span();
    let window = window.unwrap_or((T::lit(EARLY_WINDOW_MIN), v_max));
    if !(window.0 < window.1) || window.0 < v_min || window.1 > v_max {
        return Err(Error::Range(format!(
            "fit window [{}, {}] V outside data range [{v_min}, {v_max}] V",
            window.0, window.1
        )));
    }
    // Tolerate labels that only miss the range edge through rounding.
    let slack = T::lit(1e-9);
    let lo = label_range.0 * (T::one() - slack);
    let hi = label_range.1 * (T::one() + slack);

    let mut intercepts = Vec::new();
    let mut labels = Vec::new();
    let mut sum_b = T::zero();
    let mut sum_m = T::zero();
    let mut sum_r2 = T::zero();
    let mut warnings = Vec::new();
    for sweep in ds.sweeps_in(SweepDirection::Forward) {
        let Some(label) = sweep.label else { continue };
        if label < lo || label > hi {
            continue;
        }
        let pts = sweep.points.iter().copied().filter(|p| p.0 >= window.0 && p.0 <= window.1);
        let Some(line) = least_squares(pts) else {
            let w = format!("I_b = {label} A: fewer than 2 points in window");
            warn!("{w}");
            warnings.push(w);
            continue;
        };
        // A slope this small relative to the level puts the intercept beyond
        // any physical Early voltage.
        let flat = line.slope * (window.1 - window.0) <= line.intercept.abs() * T::lit(1e-9);
        if !(line.slope > T::zero()) || flat {
            let w = format!("I_b = {label} A: slope {} A/V not positive, curve excluded", line.slope);
            warn!("{w}");
            warnings.push(w);
            continue;
        }
        intercepts.push(-line.intercept / line.slope);
        labels.push(label);
        sum_b = sum_b + line.intercept;
        sum_m = sum_m + line.slope;
        sum_r2 = sum_r2 + line.r_squared;
    }
    if intercepts.is_empty() {
        return Err(Error::Fit("no curve with positive slope in the fit window".into()));
    }
    // Σ m_k·(b_k/m_k) / Σ m_k
    let v_early = (sum_b / sum_m).abs();
    let r_squared = sum_r2 / T::from_count(intercepts.len());
    Ok(EarlyFit {
        v_early,
        per_curve_intercepts: intercepts,
        labels,
        fit_window: window,
        r_squared,
        warnings,
    })
}

/// Forward current gain `ΔI_c/ΔI_b` between the two curves that bracket
/// `near.i_c` at `near.v_ce`.
pub fn fit_beta<T: Scalar>(ds: &IvDataset<T>, near: &OperatingPoint<T>) -> Result<T> {
    if ds.kind != IvKind::Output {
        return Err(Error::Input("current gain needs output characteristics".into()));
    }
    let curves: Vec<(T, T)> = ds
        .sweeps_in(SweepDirection::Forward)
        .filter_map(|s| Some((s.label?, s.interpolate(near.v_ce)?)))
        .collect();
    if curves.len() < 2 {
        return Err(Error::Range(format!("fewer than 2 curves cover V_ce = {} V", near.v_ce)));
    }
    for w in curves.windows(2) {
        let ((ib0, ic0), (ib1, ic1)) = (w[0], w[1]);
        let (lo, hi) = if ic0 <= ic1 { (ic0, ic1) } else { (ic1, ic0) };
        if near.i_c >= lo && near.i_c <= hi && ib1 != ib0 {
            return Ok((ic1 - ic0) / (ib1 - ib0));
        }
    }
    Err(Error::Range(format!(
        "I_c = {} A at V_ce = {} V outside the data hull",
        near.i_c, near.v_ce
    )))
}

/// `µ_f = V_A / v_teff`.
pub fn intrinsic_gain<T: Scalar>(v_early: T, v_teff: T) -> T {
    v_early / v_teff
}

/// Log-linear least squares on `ln i_b` against `v_be`.
pub fn fit_diode_params<T: Scalar>(ds: &IvDataset<T>) -> Result<DiodeFit<T>> {
    if ds.kind != IvKind::Input {
        return Err(Error::Input("diode fit needs input characteristics".into()));
    }
    let pts: Vec<(T, T)> = ds
        .sweeps_in(SweepDirection::Forward)
        .flat_map(|s| s.points.iter().copied())
        .filter(|p| p.1 > T::zero())
        .map(|(v, i)| (v, i.ln()))
        .collect();
    if pts.len() < 3 && !(pts.len() == 2 && ds.sweeps.iter().map(|s| s.points.len()).sum::<usize>() == 2) {
        return Err(Error::Fit(format!("{} positive-current points, need at least 3", pts.len())));
    }
    let line = least_squares(pts.iter().copied()).ok_or_else(|| Error::Fit("degenerate voltages".into()))?;
    // v_teff above 1 kV is no exponential at all.
    if !(line.slope > T::lit(1e-3)) {
        return Err(Error::Fit(format!("slope {} 1/V too small for an exponential", line.slope)));
    }
    let ss: T = pts
        .iter()
        .map(|&(v, y)| {
            let r = y - (line.intercept + line.slope * v);
            r * r
        })
        .fold(T::zero(), |a, b| a + b);
    Ok(DiodeFit {
        i_b0: line.intercept.exp(),
        v_teff: line.slope.recip(),
        residual: (ss / T::from_count(pts.len())).sqrt(),
        n_points: pts.len(),
    })
}
