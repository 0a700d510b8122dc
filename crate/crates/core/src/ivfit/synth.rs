//! Synthetic IV data from the transistor model.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::dataset::{IvDataset, IvKind, Sweep, SweepDirection};
use crate::device::{evaluate_dc, TransistorParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Base-current labels `start, start + step, ..., stop` (A).
pub fn label_grid<T: Scalar>(start: T, stop: T, step: T) -> Vec<T> {
    let n = ((stop - start) / step).round().to_usize().unwrap_or(0);
    (0..=n).map(|k| start + step * T::from_count(k)).collect()
}

/// `V_be` that draws base current `i_b`.
pub fn base_voltage_for<T: Scalar>(params: &TransistorParams<T>, i_b: T) -> T {
    params.v_teff * (params.beta_f * i_b / params.i_sat).ln()
}

/// Output family `I_c(V_ce)` for each base-current label.
///
/// With `knee = Some(v_k)` the model current is multiplied by
/// `1 − exp(−V_ce/v_k)` to mimic the saturation region.
pub fn output_family<T: Scalar>(
    params: &TransistorParams<T>,
    labels: &[T],
    v_ce: &[T],
    knee: Option<T>,
) -> Result<IvDataset<T>> {
    let mut sweeps = Vec::with_capacity(labels.len());
    for &ib in labels {
        let v_be = base_voltage_for(params, ib);
        let points = v_ce
            .iter()
            .map(|&v| {
                let (_, ic) = evaluate_dc(params, v_be, v)?;
                let shape = knee.map_or(T::one(), |k| T::one() - (-v / k).exp());
                Ok((v, ic * shape))
            })
            .collect::<Result<Vec<_>>>()?;
        sweeps.push(Sweep {
            label: Some(ib),
            direction: SweepDirection::Forward,
            points,
        });
    }
    IvDataset::new(IvKind::Output, sweeps)
}

/// Input characteristic `I_b(V_be)` at fixed `V_ce`.
pub fn input_characteristic<T: Scalar>(params: &TransistorParams<T>, v_ce: T, v_be: &[T]) -> Result<IvDataset<T>> {
    let points = v_be
        .iter()
        .map(|&v| Ok((v, evaluate_dc(params, v, v_ce)?.0)))
        .collect::<Result<Vec<_>>>()?;
    IvDataset::new(
        IvKind::Input,
        vec![Sweep {
            label: None,
            direction: SweepDirection::Forward,
            points,
        }],
    )
}

/// Multiply every current by `1 + σ·N(0, 1)`.
pub fn with_multiplicative_noise<T: Scalar, R: Rng + ?Sized>(ds: &IvDataset<T>, sigma: T, rng: &mut R) -> Result<IvDataset<T>> {
    let normal = Normal::new(0.0, sigma.to_f64_lossy()).map_err(|e| Error::invalid("sigma", e.to_string()))?;
    let mut out = ds.clone();
    for s in &mut out.sweeps {
        for p in &mut s.points {
            p.1 = p.1 * (T::one() + T::lit(normal.sample(rng)));
        }
    }
    Ok(out)
}
