use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use cryoamp::chain::{cascade_at, s21_db, Amplifier, ChainResponse};
use cryoamp::device::{power_dissipation, small_signal, solve_operating_point, thermal_budget_check, OperatingPoint};
use cryoamp::ivfit::{
    classify_transistor, fit_beta, fit_diode_params, fit_early_voltage, intrinsic_gain, load_iv_dataset, IvDataset,
    IvFormat, IvKind, SweepDirection, Verdict,
};
use cryoamp::lockin::{sweep_fm, sweep_vbc, SweepPoint};
use cryoamp::scalar::{fmt_float, linspace, logspace};

use crate::config::{Axis, RunConfig, Spacing, Stage};
use crate::error::{exit, CliError};

pub const BUNDLED_OUTPUT_FAMILY: &str = include_str!("../data/output_family.csv");
pub const BUNDLED_INPUT_CHARACTERISTIC: &str = include_str!("../data/input_characteristic.csv");

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

/// `quantity,value,unit` table.
#[derive(Default)]
struct Report {
    rows: Vec<(String, String, &'static str)>,
}

impl Report {
    fn num(&mut self, name: &str, value: f64, unit: &'static str) {
        self.rows.push((name.into(), fmt_float(value), unit));
    }

    fn text(&mut self, name: &str, value: impl ToString) {
        self.rows.push((name.into(), value.to_string(), ""));
    }

    fn csv(&self) -> String {
        let mut out = String::from("quantity,value,unit\n");
        for (n, v, u) in &self.rows {
            let _ = writeln!(out, "{n},{v},{u}");
        }
        out
    }

    fn print(&self) {
        let w = self.rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        for (n, v, u) in &self.rows {
            println!("{n:<w$}  {v} {u}");
        }
    }
}

fn read_dataset(path: Option<&Path>, bundled: &str, format: &IvFormat) -> Result<IvDataset, CliError> {
    match path {
        Some(p) => {
            let f = fs::File::open(p).map_err(|e| CliError::io(p, e))?;
            load_iv_dataset(f, format).map_err(|e| CliError::from(e).in_file(p))
        }
        None => Ok(load_iv_dataset(bundled.as_bytes(), format)?),
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitIvArgs {
    pub output_csv: Option<PathBuf>,
    pub input_csv: Option<PathBuf>,
    pub backward_csv: Option<PathBuf>,
    pub both: bool,
    pub window_min_v: Option<f64>,
    pub window_max_v: Option<f64>,
    pub ndr_threshold_s: f64,
    pub hysteresis_threshold: f64,
    pub near_ic_a: f64,
    pub near_vce_v: f64,
}

/// Fit the IV data and screen the device. Returns the exit status.
pub fn fit_iv(args: &FitIvArgs, out: &Path) -> Result<i32, CliError> {
    let out_format = IvFormat {
        kind: Some(IvKind::Output),
        direction: if args.both { SweepDirection::Both } else { SweepDirection::Forward },
    };
    let family = read_dataset(args.output_csv.as_deref(), BUNDLED_OUTPUT_FAMILY, &out_format)?;
    let (forward, mut backward) = family.split_directions()?;
    if let Some(p) = &args.backward_csv {
        let b = read_dataset(Some(p), "", &IvFormat { kind: Some(IvKind::Output), direction: SweepDirection::Backward })?;
        backward = Some(b);
    }
    let input = read_dataset(
        args.input_csv.as_deref(),
        BUNDLED_INPUT_CHARACTERISTIC,
        &IvFormat { kind: Some(IvKind::Input), direction: SweepDirection::Forward },
    )?;

    let window = match (args.window_min_v, args.window_max_v) {
        (None, None) => None,
        (lo, hi) => {
            let (_, v_max) = forward.voltage_span();
            Some((lo.unwrap_or(cryoamp::ivfit::EARLY_WINDOW_MIN), hi.unwrap_or(v_max)))
        }
    };
    let early = fit_early_voltage(&forward, window)?;
    for w in &early.warnings {
        eprintln!("warning: {w}");
    }
    let near = OperatingPoint::new(0.0, args.near_vce_v, 0.0, args.near_ic_a);
    let beta = fit_beta(&forward, &near)?;
    let diode = fit_diode_params(&input)?;
    let class = classify_transistor(&forward, backward.as_ref(), args.ndr_threshold_s, args.hysteresis_threshold)?;

    let mut r = Report::default();
    r.num("i_sat", diode.i_sat(beta), "A");
    r.num("v_teff", diode.v_teff, "V");
    r.num("i_b0", diode.i_b0, "A");
    r.num("diode_ln_residual_rms", diode.residual, "");
    r.num("v_early", early.v_early, "V");
    r.num("early_r_squared", early.r_squared, "");
    r.text("early_curves", early.per_curve_intercepts.len());
    r.num("early_window_min", early.fit_window.0, "V");
    r.num("early_window_max", early.fit_window.1, "V");
    r.num("beta_f", beta, "");
    r.num("beta_at_i_c", args.near_ic_a, "A");
    r.num("beta_at_v_ce", args.near_vce_v, "V");
    r.num("intrinsic_gain", intrinsic_gain(early.v_early, diode.v_teff), "");
    let verdict = match class.verdict {
        Verdict::Usable => "usable",
        Verdict::Hysteretic => "hysteretic",
        Verdict::NegativeDifferentialResistance => "negative_differential_resistance",
        Verdict::BothDefects => "both_defects",
    };
    r.text("verdict", verdict);
    r.text("hysteresis_checked", backward.is_some());
    write_file(&out.join("fit_iv_report.csv"), &r.csv())?;

    let mut ev = String::from("sweep,label_A,defect,v_from_V,v_to_V,metric\n");
    for e in &class.evidence {
        let label = forward.sweeps[e.sweep].label.unwrap_or(f64::NAN);
        let defect = match e.defect {
            cryoamp::ivfit::Defect::NegativeDifferentialResistance => "ndr",
            cryoamp::ivfit::Defect::Hysteresis => "hysteresis",
        };
        let _ = writeln!(
            ev,
            "{},{},{defect},{},{},{}",
            e.sweep,
            fmt_float(label),
            fmt_float(e.v_range.0),
            fmt_float(e.v_range.1),
            fmt_float(e.metric)
        );
    }
    write_file(&out.join("fit_iv_evidence.csv"), &ev)?;
    r.print();
    Ok(if class.verdict == Verdict::Usable { exit::OK } else { exit::NOT_USABLE })
}

/// DC operating point, dissipation and thermal margins.
pub fn opp(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let net = cfg.bias_network();
    let params = cfg.transistor()?;
    let op = solve_operating_point(&net, &params, cfg.solver.tol, cfg.solver.max_iter)?;
    let ss = small_signal(&op, &params)?;
    let p = power_dissipation(&op);
    let still = thermal_budget_check(p, cfg.thermal.still_cooling_W);
    let mc = thermal_budget_check(p, cfg.thermal.mixing_chamber_cooling_W);
    let ratio = cfg.thermal.margin_ratio;

    let mut r = Report::default();
    r.num("v_be", op.v_be, "V");
    r.num("v_ce", op.v_ce, "V");
    r.num("i_b", op.i_b, "A");
    r.num("i_c", op.i_c, "A");
    r.num("power", p, "W");
    r.num("collector_power", op.i_c * op.v_ce, "W");
    r.num("g_m", ss.g_m, "S");
    r.num("r_pi", ss.r_pi, "ohm");
    r.num("r_o", ss.r_o, "ohm");
    r.num("i_sat", params.i_sat, "A");
    r.num("still_cooling_ratio", still.ratio, "");
    r.num("still_margin", still.margin, "W");
    r.text("still_meets_margin_ratio", still.meets_ratio(ratio));
    r.num("mixing_chamber_cooling_ratio", mc.ratio, "");
    r.num("mixing_chamber_margin", mc.margin, "W");
    r.text("mixing_chamber_meets_margin_ratio", mc.meets_ratio(ratio));
    write_file(&out.join("opp.csv"), &r.csv())?;
    r.print();
    Ok(exit::OK)
}

#[derive(Debug, Clone, Default)]
pub struct S21Args {
    pub f_min_hz: Option<f64>,
    pub f_max_hz: Option<f64>,
    pub points: Option<usize>,
    pub stage: Option<Stage>,
}

fn amplifier(cfg: &RunConfig) -> Result<Amplifier, CliError> {
    Ok(Amplifier::build(&cfg.bias_network(), &cfg.transistor()?, &cfg.solver_options(), &cfg.amplifier_config())?)
}

/// `f_Hz,s21_dB` over a log grid.
pub fn s21(cfg: &RunConfig, args: &S21Args, out: &Path) -> Result<i32, CliError> {
    let s = &cfg.s21;
    let (lo, hi) = (args.f_min_hz.unwrap_or(s.f_min_Hz), args.f_max_hz.unwrap_or(s.f_max_Hz));
    let points = args.points.unwrap_or(s.points);
    let stage = args.stage.unwrap_or(s.stage);
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(CliError::Usage(format!("need 0 < f_min ({lo}) <= f_max ({hi}) and points > 0")));
    }
    let amp = amplifier(cfg)?;
    let chain = match stage {
        Stage::First => amp.first_stage_chain()?,
        Stage::Both => amp.two_stage_chain()?,
    };
    let rows = s21_db(&chain, &logspace(lo, hi, points))?;
    let mut text = String::from("f_Hz,s21_dB\n");
    for (f, db) in &rows {
        let _ = writeln!(text, "{},{}", fmt_float(*f), fmt_float(*db));
    }
    write_file(&out.join(format!("s21_{}.csv", stage.as_str())), &text)?;
    println!(
        "{} rows, {} stage, noise temperature {} K at {} Hz",
        rows.len(),
        stage.as_str(),
        fmt_float(chain.noise_temperature),
        fmt_float(chain.reference_frequency)
    );
    Ok(exit::OK)
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub axis: Option<Axis>,
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
    pub dump_waveforms: bool,
}

/// Apply command-line overrides to the sweep section.
pub fn apply_sweep_args(cfg: &mut RunConfig, args: &SweepArgs) {
    let s = &mut cfg.sweep;
    if let Some(a) = args.axis {
        s.axis = a;
    }
    let (start, stop, points, spacing) = match s.axis {
        Axis::Vbc => (&mut s.vbc_start_V, &mut s.vbc_stop_V, &mut s.vbc_points, &mut s.vbc_spacing),
        Axis::Fm => (&mut s.fm_start_Hz, &mut s.fm_stop_Hz, &mut s.fm_points, &mut s.fm_spacing),
    };
    if let Some(v) = args.start {
        *start = v;
    }
    if let Some(v) = args.stop {
        *stop = v;
    }
    if let Some(v) = args.points {
        *points = v;
    }
    if let Some(v) = args.spacing {
        *spacing = v;
    }
}

/// The chain a sweep drives, as configured.
pub fn sweep_chain(cfg: &RunConfig) -> Result<ChainResponse, CliError> {
    let amp = amplifier(cfg)?;
    Ok(if cfg.chain.include_coupling {
        amp.sweep_chain(&cfg.coupling())?
    } else {
        cascade_at(vec![amp.first.clone(), amp.second.clone()], amp.reference_frequency)?
    })
}

pub fn sweep_grid(cfg: &RunConfig) -> Result<Vec<f64>, CliError> {
    let s = &cfg.sweep;
    let (lo, hi, n, spacing) = match s.axis {
        Axis::Vbc => (s.vbc_start_V, s.vbc_stop_V, s.vbc_points, s.vbc_spacing),
        Axis::Fm => (s.fm_start_Hz, s.fm_stop_Hz, s.fm_points, s.fm_spacing),
    };
    if n == 0 || hi.is_nan() || lo.is_nan() || hi < lo || (spacing == Spacing::Log && lo <= 0.0) {
        return Err(CliError::Usage(format!("bad {} grid: {lo} to {hi}, {n} points", s.axis.as_str())));
    }
    Ok(match spacing {
        Spacing::Lin => linspace(lo, hi, n),
        Spacing::Log => logspace(lo, hi, n),
    })
}

/// Run the configured sweep; writes the CSV and its manifest.
pub fn sweep(cfg: &RunConfig, dump_waveforms: bool, out: &Path) -> Result<i32, CliError> {
    let resolved = cfg.resolved()?;
    let grid = sweep_grid(&resolved)?;
    let ens = resolved.ensemble_params();
    let drive = resolved.drive_waveform(&ens)?;
    let geom = resolved.cell_geometry();
    let chain = sweep_chain(&resolved)?;
    let scfg = resolved.sweep_config(dump_waveforms);
    let axis = resolved.sweep.axis;
    let points: Vec<SweepPoint> = match axis {
        Axis::Vbc => sweep_vbc(&grid, &drive, &ens, &geom, &chain, &scfg)?,
        Axis::Fm => sweep_fm(&grid, resolved.sweep.fm_v_bc_V, &drive, &ens, &geom, &chain, &scfg)?,
    };

    let mut text = String::from("x_value,R_V,phase_rad\n");
    for p in &points {
        let _ = writeln!(
            text,
            "{},{},{}",
            fmt_float(p.x_value),
            fmt_float(p.result.amplitude_r),
            fmt_float(p.result.phase)
        );
    }
    let stem = format!("sweep_{}", axis.as_str());
    write_file(&out.join(format!("{stem}.csv")), &text)?;
    let manifest = format!(
        "# cryoamp sweep manifest\n# rerun: cryoamp sweep --config {stem}.manifest.ini\n\n{}",
        resolved.to_ini()
    );
    write_file(&out.join(format!("{stem}.manifest.ini")), &manifest)?;

    if dump_waveforms {
        let dir = out.join(format!("waveforms_{}", axis.as_str()));
        for (i, p) in points.iter().enumerate() {
            let Some(w) = &p.waveform else { continue };
            for (name, data) in [("source", &w.source), ("output", &w.output)] {
                let mut t = String::from("t_s,value\n");
                for (k, v) in data.iter().enumerate() {
                    let _ = writeln!(t, "{},{}", fmt_float(w.dt * k as f64), fmt_float(*v));
                }
                write_file(&dir.join(format!("point_{i:04}_{name}.csv")), &t)?;
            }
        }
    }

    let best = points
        .iter()
        .max_by(|a, b| a.result.amplitude_r.total_cmp(&b.result.amplitude_r))
        .expect("grid is not empty");
    println!(
        "{} points on {}, max R = {} V at {}",
        points.len(),
        axis.as_str(),
        fmt_float(best.result.amplitude_r),
        fmt_float(best.x_value)
    );
    Ok(exit::OK)
}
