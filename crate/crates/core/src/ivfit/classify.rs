use super::dataset::{IvDataset, IvKind, Sweep, SweepDirection};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NDR_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_HYSTERESIS_THRESHOLD: f64 = 0.02;
/// Points in the moving average of the local slope.
pub const SLOPE_SMOOTHING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Usable,
    Hysteretic,
    NegativeDifferentialResistance,
    BothDefects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Defect {
    NegativeDifferentialResistance,
    Hysteresis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence<T = f64> {
    pub defect: Defect,
    /// Index into the forward sweeps.
    pub sweep: usize,
    pub v_range: (T, T),
    /// Most negative smoothed slope (S) or largest relative gap.
    pub metric: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeviceClassification<T = f64> {
    pub verdict: Verdict,
    pub evidence: Vec<Evidence<T>>,
}

/// Flag negative differential resistance and hysteresis in an output
/// family.
pub fn classify_transistor<T: Scalar>(
    forward: &IvDataset<T>,
    backward: Option<&IvDataset<T>>,
    ndr_threshold: T,
    hysteresis_threshold: T,
) -> Result<DeviceClassification<T>> {
    if forward.kind != IvKind::Output || backward.is_some_and(|b| b.kind != IvKind::Output) {
        return Err(Error::Input("classification needs output characteristics".into()));
    }
    let fwd: Vec<&Sweep<T>> = forward.sweeps_in(SweepDirection::Forward).collect();
    let mut evidence = Vec::new();
    for (k, s) in fwd.iter().enumerate() {
        evidence.extend(ndr_evidence(k, s, ndr_threshold));
    }
    if let Some(bwd) = backward {
        let bwd: Vec<&Sweep<T>> = bwd.sweeps.iter().collect();
        let same = bwd.len() == fwd.len()
            && fwd.iter().zip(&bwd).all(|(a, b)| match (a.label, b.label) {
                (Some(x), Some(y)) => (x - y).abs() <= T::lit(1e-9) * x.abs().max(y.abs()),
                _ => false,
            });
        if !same {
            return Err(Error::Input("forward and backward sweep labels differ".into()));
        }
        for (k, (f, b)) in fwd.iter().zip(&bwd).enumerate() {
            evidence.extend(hysteresis_evidence(k, f, b, hysteresis_threshold));
        }
    }
    let ndr = evidence.iter().any(|e| e.defect == Defect::NegativeDifferentialResistance);
    let hyst = evidence.iter().any(|e| e.defect == Defect::Hysteresis);
    let verdict = match (ndr, hyst) {
        (false, false) => Verdict::Usable,
        (true, false) => Verdict::NegativeDifferentialResistance,
        (false, true) => Verdict::Hysteretic,
        (true, true) => Verdict::BothDefects,
    };
    Ok(DeviceClassification { verdict, evidence })
}

/// Centered moving average of the segment slopes. Entry `j` covers points
/// `lo_j ..= hi_j`.
fn smoothed_slopes<T: Scalar>(pts: &[(T, T)]) -> Vec<(usize, usize, T)> {
    let slopes: Vec<T> = pts.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    let n = slopes.len();
    let w = SLOPE_SMOOTHING.min(n);
    (0..=n - w)
        .map(|j| {
            let mean = slopes[j..j + w].iter().fold(T::zero(), |a, &b| a + b) / T::from_count(w);
            (j, j + w, mean)
        })
        .collect()
}

fn ndr_evidence<T: Scalar>(k: usize, s: &Sweep<T>, threshold: T) -> Vec<Evidence<T>> {
    let mut out: Vec<Evidence<T>> = Vec::new();
    let mut open: Option<(usize, usize, T)> = None;
    for (lo, hi, slope) in smoothed_slopes(&s.points) {
        if slope < -threshold {
            open = Some(match open {
                Some((a, _, m)) => (a, hi, m.min(slope)),
                None => (lo, hi, slope),
            });
        } else if let Some((a, b, m)) = open.take() {
            out.push(ndr_item(k, s, a, b, m));
        }
    }
    if let Some((a, b, m)) = open {
        out.push(ndr_item(k, s, a, b, m));
    }
    out
}

fn ndr_item<T: Scalar>(k: usize, s: &Sweep<T>, a: usize, b: usize, metric: T) -> Evidence<T> {
    Evidence {
        defect: Defect::NegativeDifferentialResistance,
        sweep: k,
        v_range: (s.points[a].0, s.points[b].0),
        metric,
    }
}

fn hysteresis_evidence<T: Scalar>(k: usize, fwd: &Sweep<T>, bwd: &Sweep<T>, threshold: T) -> Vec<Evidence<T>> {
    let scale = fwd
        .points
        .iter()
        .chain(&bwd.points)
        .fold(T::zero(), |m, p| m.max(p.1.abs()));
    if !(scale > T::zero()) {
        return Vec::new();
    }
    let mut out = Vec::new();
    // (first voltage, last voltage, points, worst gap)
    let mut run: Option<(T, T, usize, T)> = None;
    let flush = |run: Option<(T, T, usize, T)>, out: &mut Vec<Evidence<T>>| {
        if let Some((a, b, n, m)) = run {
            if n >= 2 {
                out.push(Evidence {
                    defect: Defect::Hysteresis,
                    sweep: k,
                    v_range: (a, b),
                    metric: m,
                });
            }
        }
    };
    for &(v, i_f) in &fwd.points {
        let gap = bwd.interpolate(v).map(|i_b| (i_f - i_b).abs() / scale);
        match gap {
            Some(g) if g > threshold => {
                run = Some(match run {
                    Some((a, _, n, m)) => (a, v, n + 1, m.max(g)),
                    None => (v, v, 1, g),
                });
            }
            _ => flush(run.take(), &mut out),
        }
    }
    flush(run, &mut out);
    out
}
