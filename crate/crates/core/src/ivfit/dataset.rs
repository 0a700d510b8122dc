use std::fmt::Write as _;
use std::io::Read;

use crate::error::{Error, Result};
use crate::scalar::{fmt_float, Scalar};

/// Which characteristic a dataset holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IvKind {
    /// `I_b(V_be)` at fixed `V_ce`.
    Input,
    /// Family of `I_c(V_ce)` sweeps labelled by `I_b`.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepDirection {
    Forward,
    Backward,
    Both,
}

/// One sweep, stored with ascending voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep<T = f64> {
    /// Base current label (A); `None` for input characteristics.
    pub label: Option<T>,
    /// Forward or Backward.
    pub direction: SweepDirection,
    /// `(voltage, current)` pairs.
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> Sweep<T> {
    pub fn voltages(&self) -> impl Iterator<Item = T> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// Linear interpolation of the current at `v`; `None` outside the sweep.
    pub fn interpolate(&self, v: T) -> Option<T> {
        let pts = &self.points;
        let (first, last) = (pts.first()?, pts.last()?);
        if v < first.0 || v > last.0 {
            return None;
        }
        let k = pts.partition_point(|p| p.0 < v);
        if k == 0 {
            return Some(first.1);
        }
        let (v0, i0) = pts[k - 1];
        let (v1, i1) = pts[k];
        Some(i0 + (i1 - i0) * (v - v0) / (v1 - v0))
    }
}

/// Validated IV data.
#[derive(Debug, Clone, PartialEq)]
pub struct IvDataset<T = f64> {
    pub kind: IvKind,
    pub direction: SweepDirection,
    /// Sorted by direction (forward first) then label.
    pub sweeps: Vec<Sweep<T>>,
}

/// How to read a CSV stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IvFormat {
    /// Expected kind; `None` detects it from the header.
    pub kind: Option<IvKind>,
    /// Declared direction. With `Both` and no direction column, each label
    /// must hold a descending run and an ascending run.
    pub direction: SweepDirection,
}

impl Default for IvFormat {
    fn default() -> Self {
        Self {
            kind: None,
            direction: SweepDirection::Forward,
        }
    }
}

pub const INPUT_HEADER: [&str; 2] = ["v_be_V", "i_b_A"];
pub const OUTPUT_HEADER: [&str; 3] = ["i_b_A", "v_ce_V", "i_c_A"];

impl<T: Scalar> IvDataset<T> {
    pub fn new(kind: IvKind, mut sweeps: Vec<Sweep<T>>) -> Result<Self> {
        sweeps.sort_by(|a, b| {
            let da = a.direction == SweepDirection::Backward;
            let db = b.direction == SweepDirection::Backward;
            da.cmp(&db).then(
                a.label
                    .unwrap_or_else(T::zero)
                    .partial_cmp(&b.label.unwrap_or_else(T::zero))
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
        });
        let has_fwd = sweeps.iter().any(|s| s.direction == SweepDirection::Forward);
        let has_bwd = sweeps.iter().any(|s| s.direction == SweepDirection::Backward);
        let direction = match (has_fwd, has_bwd) {
            (true, true) => SweepDirection::Both,
            (false, true) => SweepDirection::Backward,
            _ => SweepDirection::Forward,
        };
        let ds = Self {
            kind,
            direction,
            sweeps,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps.is_empty() {
            return Err(Error::Input("dataset has no sweeps".into()));
        }
        if self.kind == IvKind::Input && self.sweeps.iter().any(|s| s.label.is_some()) {
            return Err(Error::Input("input characteristics carry no labels".into()));
        }
        for (k, s) in self.sweeps.iter().enumerate() {
            if s.points.len() < 2 {
                return Err(Error::Input(format!("sweep {k} has fewer than 2 points")));
            }
            if s.points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::Input(format!("sweep {k} voltages not strictly increasing")));
            }
            if s.direction == SweepDirection::Both {
                return Err(Error::Input(format!("sweep {k} must be forward or backward")));
            }
        }
        if self.kind == IvKind::Output {
            for dir in [SweepDirection::Forward, SweepDirection::Backward] {
                let labels: Vec<T> = self
                    .sweeps
                    .iter()
                    .filter(|s| s.direction == dir)
                    .map(|s| s.label.ok_or_else(|| Error::Input("output sweep without label".into())))
                    .collect::<Result<_>>()?;
                if labels.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Input("sweep labels not strictly increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Sweeps of one direction.
    pub fn sweeps_in(&self, dir: SweepDirection) -> impl Iterator<Item = &Sweep<T>> {
        self.sweeps.iter().filter(move |s| s.direction == dir)
    }

    /// Forward part and, if present, backward part.
    pub fn split_directions(&self) -> Result<(Self, Option<Self>)> {
        let fwd: Vec<_> = self.sweeps_in(SweepDirection::Forward).cloned().collect();
        let bwd: Vec<_> = self.sweeps_in(SweepDirection::Backward).cloned().collect();
        let fwd = if fwd.is_empty() {
            return Err(Error::Input("no forward sweeps".into()));
        } else {
            Self::new(self.kind, fwd)?
        };
        let bwd = if bwd.is_empty() { None } else { Some(Self::new(self.kind, bwd)?) };
        Ok((fwd, bwd))
    }

    /// Smallest and largest voltage across all sweeps.
    pub fn voltage_span(&self) -> (T, T) {
        self.sweeps
            .iter()
            .flat_map(|s| s.voltages())
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

fn parse_field<T: Scalar>(field: &str, line: u64, what: &str) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        reason: format!("{what}: cannot parse {field:?} as a number"),
    })
}

/// Read a CSV stream into a validated dataset.
pub fn load_iv_dataset<T: Scalar, R: Read>(source: R, format: &IvFormat) -> Result<IvDataset<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, reason: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let kind = if header == INPUT_HEADER {
        IvKind::Input
    } else if header.len() >= 3 && header[..3] == OUTPUT_HEADER && (header.len() == 3 || (header.len() == 4 && header[3] == "direction")) {
        IvKind::Output
    } else {
        return Err(Error::Parse {
            line: 1,
            reason: format!("unrecognized header {header:?}"),
        });
    };
    if let Some(want) = format.kind {
        if want != kind {
            return Err(Error::Parse { line: 1, reason: format!("expected {want:?} data, found {kind:?}") });
        }
    }
    let has_dir = header.len() == 4;

    // (label, direction column, line, v, i)
    let mut rows: Vec<(Option<T>, Option<SweepDirection>, u64, T, T)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(Error::Parse { line, reason: format!("expected {} fields, found {}", header.len(), rec.len()) });
        }
        match kind {
            IvKind::Input => rows.push((None, None, line, parse_field(&rec[0], line, "v_be_V")?, parse_field(&rec[1], line, "i_b_A")?)),
            IvKind::Output => {
                let dir = if has_dir {
                    Some(match &rec[3] {
                        "fwd" => SweepDirection::Forward,
                        "bwd" => SweepDirection::Backward,
                        other => return Err(Error::Parse { line, reason: format!("direction {other:?} is not fwd or bwd") }),
                    })
                } else {
                    None
                };
                rows.push((
                    Some(parse_field(&rec[0], line, "i_b_A")?),
                    dir,
                    line,
                    parse_field(&rec[1], line, "v_ce_V")?,
                    parse_field(&rec[2], line, "i_c_A")?,
                ));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Parse { line: 1, reason: "no data rows".into() });
    }

    // Group consecutive rows with the same label and direction column.
    let mut groups: Vec<(Option<T>, Option<SweepDirection>, Vec<(u64, T, T)>)> = Vec::new();
    for (label, dir, line, v, i) in rows {
        match groups.last_mut() {
            Some(g) if g.0 == label && g.1 == dir => g.2.push((line, v, i)),
            _ => {
                if groups.iter().any(|g| g.0 == label && g.1 == dir) {
                    return Err(Error::Parse { line, reason: "duplicate sweep label".into() });
                }
                groups.push((label, dir, vec![(line, v, i)]));
            }
        }
    }

    let mut sweeps = Vec::new();
    for (label, dir, pts) in groups {
        let runs = split_monotone_runs(&pts)?;
        let declared = dir.unwrap_or(format.direction);
        match (declared, runs.len()) {
            (SweepDirection::Both, 2) => {
                for run in runs {
                    let d = if run_descending(&run) { SweepDirection::Backward } else { SweepDirection::Forward };
                    sweeps.push(make_sweep(label, d, run));
                }
            }
            (SweepDirection::Both, _) => {
                return Err(Error::Parse {
                    line: pts[0].0,
                    reason: "direction=both needs one descending and one ascending run per sweep".into(),
                })
            }
            (d, 1) => sweeps.push(make_sweep(label, d, runs.into_iter().next().unwrap())),
            (_, _) => {
                // First row that is not shared with the previous run.
                let shared = runs[1][0].0 == runs[0][runs[0].len() - 1].0;
                let line = runs[1][usize::from(shared)].0;
                return Err(Error::Parse { line, reason: "voltage not strictly monotone within sweep".into() });
            }
        }
    }
    if format.direction == SweepDirection::Both
        && !has_dir
        && !sweeps.iter().any(|s| s.direction == SweepDirection::Backward)
    {
        return Err(Error::Parse { line: 2, reason: "direction=both without backward runs".into() });
    }
    IvDataset::new(kind, sweeps).map_err(|e| Error::Parse { line: 0, reason: e.to_string() })
}

fn run_descending<T: Scalar>(run: &[(u64, T, T)]) -> bool {
    run.len() >= 2 && run[1].1 < run[0].1
}

/// Split into maximal strictly monotone runs. A repeated voltage or a change
/// of direction starts a new run.
fn split_monotone_runs<T: Scalar>(pts: &[(u64, T, T)]) -> Result<Vec<Vec<(u64, T, T)>>> {
    let short = |line| Error::Parse { line, reason: "voltage not strictly monotone within sweep".into() };
    let mut runs: Vec<Vec<(u64, T, T)>> = Vec::new();
    let mut cur: Vec<(u64, T, T)> = Vec::new();
    let mut rising: Option<bool> = None;
    for &p in pts {
        if p.1.is_nan() {
            return Err(Error::Parse { line: p.0, reason: "NaN voltage".into() });
        }
        let Some(&last) = cur.last() else {
            cur.push(p);
            continue;
        };
        if p.1 == last.1 {
            if cur.len() < 2 {
                return Err(short(p.0));
            }
            runs.push(std::mem::replace(&mut cur, vec![p]));
            rising = None;
            continue;
        }
        let up = p.1 > last.1;
        match rising {
            Some(r) if r != up => {
                // Turning point belongs to both runs.
                runs.push(std::mem::replace(&mut cur, vec![last, p]));
            }
            _ => cur.push(p),
        }
        rising = Some(up);
    }
    if cur.len() < 2 {
        return Err(short(pts.last().map_or(0, |p| p.0)));
    }
    runs.push(cur);
    Ok(runs)
}

fn make_sweep<T: Scalar>(label: Option<T>, direction: SweepDirection, run: Vec<(u64, T, T)>) -> Sweep<T> {
    let mut points: Vec<(T, T)> = run.into_iter().map(|(_, v, i)| (v, i)).collect();
    if points.len() >= 2 && points[1].0 < points[0].0 {
        points.reverse();
    }
    Sweep { label, direction, points }
}

/// CSV text for a dataset. Values print in shortest round-trip form, and a
/// direction column is written when backward sweeps are present.
pub fn to_csv<T: Scalar>(ds: &IvDataset<T>) -> String {
    let mut out = String::new();
    match ds.kind {
        IvKind::Input => {
            out.push_str(&INPUT_HEADER.join(","));
            out.push('\n');
            for s in &ds.sweeps {
                for &(v, i) in &s.points {
                    let _ = writeln!(out, "{},{}", fmt_float(v), fmt_float(i));
                }
            }
        }
        IvKind::Output => {
            let with_dir = ds.direction != SweepDirection::Forward;
            out.push_str(&OUTPUT_HEADER.join(","));
            out.push_str(if with_dir { ",direction\n" } else { "\n" });
            for s in &ds.sweeps {
                let label = fmt_float(s.label.unwrap_or_else(T::zero));
                let tag = if s.direction == SweepDirection::Backward { "bwd" } else { "fwd" };
                for &(v, i) in &s.points {
                    if with_dir {
                        let _ = writeln!(out, "{label},{},{},{tag}", fmt_float(v), fmt_float(i));
                    } else {
                        let _ = writeln!(out, "{label},{},{}", fmt_float(v), fmt_float(i));
                    }
                }
            }
        }
    }
    out
}
