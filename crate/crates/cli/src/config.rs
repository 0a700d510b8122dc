//! Sectioned key/value run configuration.
//!
//! Every key carries its unit in the name and values are stored in that
//! unit, so a written manifest reads back to bit-identical numbers.
//! Unknown sections and keys are rejected.

#![allow(non_snake_case)]

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use cryoamp::chain::{AmplifierConfig, CouplingNetwork};
use cryoamp::device::{BiasNetwork, SolverOptions, TransistorParams};
use cryoamp::lockin::SweepConfig;
use cryoamp::scalar::fmt_float;
use cryoamp::source::{CellGeometry, DriveWaveform, EnsembleParams};

use crate::error::CliError;

/// A value that can be read from and written to config text.
pub trait Field {
    fn set(&mut self, text: &str) -> Result<(), String>;
    fn render(&self) -> String;
}

impl Field for f64 {
    fn set(&mut self, text: &str) -> Result<(), String> {
        *self = text.parse().map_err(|_| format!("{text:?} is not a number"))?;
        Ok(())
    }
    fn render(&self) -> String {
        fmt_float(*self)
    }
}

/// `None` is written as `auto`.
impl Field for Option<f64> {
    fn set(&mut self, text: &str) -> Result<(), String> {
        *self = if text == "auto" {
            None
        } else {
            Some(text.parse().map_err(|_| format!("{text:?} is neither a number nor auto"))?)
        };
        Ok(())
    }
    fn render(&self) -> String {
        self.map_or_else(|| "auto".into(), fmt_float)
    }
}

macro_rules! plain_field {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn set(&mut self, text: &str) -> Result<(), String> {
                *self = <$t>::from_str(text).map_err(|e| format!("{text:?}: {e}"))?;
                Ok(())
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
plain_field!(usize, u64, bool, String);

impl Field for PathBuf {
    fn set(&mut self, text: &str) -> Result<(), String> {
        *self = PathBuf::from(text);
        Ok(())
    }
    fn render(&self) -> String {
        self.display().to_string()
    }
}

macro_rules! choice {
    ($name:ident { $($variant:ident => $text:literal),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
        pub enum $name { $(#[value(name = $text)] $variant),* }

        impl $name {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $text),* }
            }
        }

        impl Field for $name {
            fn set(&mut self, text: &str) -> Result<(), String> {
                *self = match text {
                    $($text => Self::$variant,)*
                    _ => return Err(format!("{text:?} is not one of: {}", [$($text),*].join(", "))),
                };
                Ok(())
            }
            fn render(&self) -> String {
                self.as_str().into()
            }
        }
    };
}

choice!(Axis { Vbc => "vbc", Fm => "fm" });
choice!(Spacing { Lin => "lin", Log => "log" });
choice!(Stage { First => "first", Both => "both" });

type Visitor<'a> = dyn FnMut(&'static str, &mut dyn Field) + 'a;

macro_rules! section {
    ($name:ident, $title:literal { $($field:ident : $ty:ty = $default:expr;)* }) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name { $(pub $field: $ty,)* }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl $name {
            pub const NAME: &'static str = $title;

            fn visit(&mut self, f: &mut Visitor<'_>) {
                $(f(stringify!($field), &mut self.$field);)*
            }
        }
    };
}

section!(DeviceSection, "device" {
    i_sat_A: Option<f64> = None;
    v_teff_V: f64 = 0.025;
    v_early_V: f64 = 124.0;
    beta_f: f64 = 160.0;
    bias_current_A: f64 = 1e-4;
});

section!(NetworkSection, "network" {
    v_supply_V: f64 = 1.0;
    r_upper_ohm: f64 = 574e3;
    r_lower_ohm: f64 = 235e3;
    r_collector_ohm: f64 = 1e3;
    r_emitter_ohm: f64 = 24.0;
    c_in_nF: f64 = 12.0;
    c_out_nF: f64 = 12.0;
    c_bypass_nF: f64 = 220.0;
});

section!(SolverSection, "solver" {
    tol: f64 = 1e-9;
    max_iter: usize = 100;
});

section!(ThermalSection, "thermal" {
    still_cooling_W: f64 = 33e-3;
    mixing_chamber_cooling_W: f64 = 420e-6;
    margin_ratio: f64 = 10.0;
});

section!(GeometrySection, "geometry" {
    c_cell_pF: f64 = 1.0;
    s_over_d_m: f64 = 5.65e-3;
    delta_z_m: f64 = 35e-9;
    c_parasitic_pF: f64 = 10.0;
    r_input_ohm: f64 = 50.0;
});

section!(EnsembleSection, "ensemble" {
    n_s_per_m2: f64 = 1e12;
    rho22_target: f64 = 0.1;
    tau_relax_s: f64 = 1e-6;
    v_resonance_V: f64 = 11.6;
    linewidth_V: f64 = 0.1;
    f_mw_Hz: f64 = 110e9;
});

section!(DriveSection, "drive" {
    f_m_Hz: f64 = 250e3;
    duty: f64 = 0.5;
    excitation_rate_per_s: Option<f64> = None;
});

section!(ChainSection, "chain" {
    hbt_load_ohm: Option<f64> = None;
    hbt_noise_temperature_K: f64 = 2.0;
    second_gain_dB: f64 = 40.0;
    second_f_low_Hz: f64 = 40e3;
    second_f_high_Hz: f64 = 1.5e9;
    second_noise_temperature_K: f64 = 6.0;
    reference_frequency_Hz: f64 = 10e6;
    include_coupling: bool = true;
});

section!(SynthesisSection, "synthesis" {
    samples_per_period: usize = 16;
    time_constant_s: f64 = 1e-3;
    filter_order: usize = 4;
    min_periods: usize = 200;
    input_noise_density_V_per_rtHz: f64 = 35e-12;
});

section!(SweepSection, "sweep" {
    axis: Axis = Axis::Vbc;
    vbc_start_V: f64 = 10.0;
    vbc_stop_V: f64 = 13.0;
    vbc_points: usize = 61;
    vbc_spacing: Spacing = Spacing::Lin;
    fm_start_Hz: f64 = 100e3;
    fm_stop_Hz: f64 = 100e6;
    fm_points: usize = 31;
    fm_spacing: Spacing = Spacing::Log;
    fm_v_bc_V: f64 = 11.6;
    fm_min_Hz: f64 = 100e3;
    fm_max_Hz: f64 = 100e6;
});

section!(S21Section, "s21" {
    f_min_Hz: f64 = 100e3;
    f_max_Hz: f64 = 100e6;
    points: usize = 200;
    stage: Stage = Stage::Both;
});

section!(RunSection, "run" {
    seed: u64 = 0;
    version: String = env!("CARGO_PKG_VERSION").to_string();
    output_dir: PathBuf = PathBuf::from("out");
});

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub device: DeviceSection,
    pub network: NetworkSection,
    pub solver: SolverSection,
    pub thermal: ThermalSection,
    pub geometry: GeometrySection,
    pub ensemble: EnsembleSection,
    pub drive: DriveSection,
    pub chain: ChainSection,
    pub synthesis: SynthesisSection,
    pub sweep: SweepSection,
    pub s21: S21Section,
    pub run: RunSection,
}

impl RunConfig {
    fn visit(&mut self, f: &mut dyn FnMut(&'static str, &'static str, &mut dyn Field)) {
        macro_rules! each {
            ($($s:ident),*) => {$(
                self.$s.visit(&mut |k, v| f(stringify!($s), k, v));
            )*};
        }
        each!(device, network, solver, thermal, geometry, ensemble, drive, chain, synthesis, sweep, s21, run);
    }

    /// Parse config text on top of the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut known: HashSet<(&'static str, &'static str)> = HashSet::new();
        cfg.visit(&mut |s, k, _| {
            known.insert((s, k));
        });
        let sections: HashSet<&str> = known.iter().map(|(s, _)| *s).collect();

        let mut section: Option<String> = None;
        let mut seen: HashSet<(String, String)> = HashSet::new();
        let mut entries: Vec<(usize, String, String, String)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                let name = name.trim();
                if !sections.contains(name) {
                    return Err(CliError::config(line, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(CliError::config(line, format!("expected key = value, found {content:?}")));
            };
            let Some(sec) = section.clone() else {
                return Err(CliError::config(line, "key outside any [section]"));
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if !known.iter().any(|(s, k)| *s == sec && *k == key) {
                return Err(CliError::config(line, format!("unknown key {key:?} in [{sec}]")));
            }
            if !seen.insert((sec.clone(), key.clone())) {
                return Err(CliError::config(line, format!("duplicate key {key:?} in [{sec}]")));
            }
            entries.push((line, sec, key, value));
        }

        let mut err = None;
        cfg.visit(&mut |s, k, field| {
            if err.is_some() {
                return;
            }
            if let Some((line, _, _, v)) = entries.iter().find(|e| e.1 == s && e.2 == k) {
                if let Err(e) = field.set(v) {
                    err = Some(CliError::config(*line, format!("[{s}] {k}: {e}")));
                }
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(cfg),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    /// Full config text, every key present.
    pub fn to_ini(&self) -> String {
        let mut copy = self.clone();
        let mut out = String::new();
        let mut current = "";
        copy.visit(&mut |s, k, v| {
            if s != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{s}]");
                current = s;
            }
            let _ = writeln!(out, "{k} = {}", v.render());
        });
        out
    }

    /// Copy with every `auto` value replaced by what it resolves to.
    pub fn resolved(&self) -> Result<Self, CliError> {
        let mut cfg = self.clone();
        let params = self.transistor()?;
        cfg.device.i_sat_A = Some(params.i_sat);
        let ens = self.ensemble_params();
        cfg.drive.excitation_rate_per_s = Some(self.drive_waveform(&ens)?.excitation_rate);
        if cfg.chain.hbt_load_ohm.is_none() {
            let amp = cryoamp::chain::Amplifier::build(&self.bias_network(), &params, &self.solver_options(), &self.amplifier_config())?;
            cfg.chain.hbt_load_ohm = Some(amp.hbt_load);
        }
        Ok(cfg)
    }

    pub fn bias_network(&self) -> BiasNetwork {
        let n = &self.network;
        BiasNetwork {
            v_supply: n.v_supply_V,
            r_upper: n.r_upper_ohm,
            r_lower: n.r_lower_ohm,
            r_collector: n.r_collector_ohm,
            r_emitter: n.r_emitter_ohm,
            c_in: n.c_in_nF / 1e9,
            c_out: n.c_out_nF / 1e9,
            c_bypass: n.c_bypass_nF / 1e9,
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    pub fn transistor(&self) -> Result<TransistorParams, CliError> {
        let d = &self.device;
        Ok(match d.i_sat_A {
            Some(i_sat) => TransistorParams::new(i_sat, d.v_teff_V, d.v_early_V, d.beta_f)?,
            None => TransistorParams::calibrated(&self.bias_network(), d.bias_current_A, d.v_teff_V, d.v_early_V, d.beta_f)?,
        })
    }

    pub fn amplifier_config(&self) -> AmplifierConfig {
        let c = &self.chain;
        AmplifierConfig {
            hbt_noise_temperature: c.hbt_noise_temperature_K,
            hbt_load: c.hbt_load_ohm,
            second_gain_db: c.second_gain_dB,
            second_f_low: c.second_f_low_Hz,
            second_f_high: c.second_f_high_Hz,
            second_noise_temperature: c.second_noise_temperature_K,
            reference_frequency: c.reference_frequency_Hz,
        }
    }

    pub fn coupling(&self) -> CouplingNetwork {
        CouplingNetwork {
            c_cell: self.geometry.c_cell_pF / 1e12,
            c_parasitic: self.geometry.c_parasitic_pF / 1e12,
            r_input: self.geometry.r_input_ohm,
        }
    }

    pub fn cell_geometry(&self) -> CellGeometry {
        CellGeometry {
            c_cell: self.geometry.c_cell_pF / 1e12,
            s_over_d: self.geometry.s_over_d_m,
            delta_z: self.geometry.delta_z_m,
        }
    }

    pub fn ensemble_params(&self) -> EnsembleParams {
        let e = &self.ensemble;
        EnsembleParams {
            n_s: e.n_s_per_m2,
            rho22_target: e.rho22_target,
            tau_relax: e.tau_relax_s,
            v_resonance: e.v_resonance_V,
            linewidth_v: e.linewidth_V,
            f_mw: e.f_mw_Hz,
        }
    }

    pub fn drive_waveform(&self, ens: &EnsembleParams) -> Result<DriveWaveform, CliError> {
        let d = &self.drive;
        let rate = match d.excitation_rate_per_s {
            Some(r) => r,
            None => ens.cw_excitation_rate()?,
        };
        let drive = DriveWaveform {
            f_m: d.f_m_Hz,
            duty: d.duty,
            excitation_rate: rate,
        };
        drive.validate()?;
        Ok(drive)
    }

    pub fn sweep_config(&self, dump_waveforms: bool) -> SweepConfig {
        let s = &self.synthesis;
        SweepConfig {
            c_parasitic: self.geometry.c_parasitic_pF / 1e12,
            samples_per_period: s.samples_per_period,
            time_constant: s.time_constant_s,
            filter_order: s.filter_order,
            min_periods: s.min_periods,
            input_noise_density: s.input_noise_density_V_per_rtHz,
            seed: self.run.seed,
            fm_limits: (self.sweep.fm_min_Hz, self.sweep.fm_max_Hz),
            dump_waveforms,
        }
    }
}
