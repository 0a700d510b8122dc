//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Always exits 0 so the workspace test run reports the suite without
//! aborting; set `ACCEPTANCE_STRICT=1` to exit 1 on any FAIL.

#![allow(clippy::type_complexity)]

use std::f64::consts::{SQRT_2, TAU};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cryoamp::chain::{
    capacitive_division, cascade, Amplifier, AmplifierConfig, ChainResponse, CouplingNetwork, StageResponse,
};
use cryoamp::device::{
    power_dissipation, small_signal, solve_operating_point, BiasNetwork, OperatingPoint, SolverOptions,
    TransistorParams,
};
use cryoamp::ivfit::synth::{label_grid, output_family, with_multiplicative_noise};
use cryoamp::ivfit::{fit_beta, fit_early_voltage, intrinsic_gain};
use cryoamp::lockin::{demodulate, sweep_fm, sweep_vbc, SweepConfig, SweepPoint, Waveform};
use cryoamp::scalar::{db20, linspace, logspace, ELEMENTARY_CHARGE};
use cryoamp::source::{image_charge, rms_image_current, rydberg_population, CellGeometry, DriveWaveform, EnsembleParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn amplifier() -> Amplifier {
    Amplifier::build(
        &BiasNetwork::default(),
        &TransistorParams::default(),
        &SolverOptions::default(),
        &AmplifierConfig::default(),
    )
    .expect("default amplifier")
}

fn v_ac() -> Outcome {
    let geom = CellGeometry::default();
    let dq = image_charge(0.1, &geom, 1e12);
    let dq_hand = 35e-9 * ELEMENTARY_CHARGE * 1e12 * 0.1 * 5.65e-3;
    let warm = capacitive_division(dq, &CouplingNetwork::room_temperature());
    let cold = capacitive_division(dq, &CouplingNetwork::first_stage());
    let pass = rel(dq, dq_hand) < 1e-12 && rel(warm, 10.5e-9) <= 0.03 && rel(cold, 290e-9) <= 0.03;
    outcome(pass, format!("V_ac = {:.2} nV (300 pF), {:.1} nV (10 pF)", warm * 1e9, cold * 1e9))
}

fn gain() -> Outcome {
    let mu = intrinsic_gain(124.0, 0.025);
    outcome(rel(mu, 4960.0) < 1e-12 && rel(mu, 5e3) <= 0.02, format!("mu_f = {mu}"))
}

fn power() -> Outcome {
    let fixed = OperatingPoint::<f64>::new(0.0, 0.9, 0.0, 1e-4);
    let p_c = power_dissipation(&fixed);
    let op = solve_operating_point(&BiasNetwork::default(), &TransistorParams::default(), 1e-9, 100).unwrap();
    let p = power_dissipation(&op);
    let pass = (p_c - 90e-6).abs() <= 1e-18 && (70e-6..=110e-6).contains(&p);
    outcome(pass, format!("collector {:.3} uW, total {:.2} uW", p_c * 1e6, p * 1e6))
}

fn family_params() -> TransistorParams {
    TransistorParams::default()
}

fn early() -> Outcome {
    let labels = label_grid(200e-9, 1000e-9, 50e-9);
    let clean = output_family(&family_params(), &labels, &linspace(0.0, 2.0, 201), Some(0.03)).unwrap();
    let v0 = fit_early_voltage(&clean, None).unwrap().v_early;
    let dense = output_family(&family_params(), &labels, &linspace(0.0, 2.0, 8001), Some(0.03)).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy = with_multiplicative_noise(&dense, 0.01, &mut rng).unwrap();
        worst = worst.max(rel(fit_early_voltage(&noisy, None).unwrap().v_early, 124.0));
    }
    let pass = rel(v0, 124.0) <= 0.005 && worst <= 0.05;
    outcome(
        pass,
        format!("V_A = {v0:.3} V noise-free, worst error {:.2}% over 100 seeds", worst * 100.0),
    )
}

fn beta() -> Outcome {
    let labels = label_grid(200e-9, 1000e-9, 50e-9);
    let clean = output_family(&family_params(), &labels, &linspace(0.0, 2.0, 201), Some(0.03)).unwrap();
    let b = fit_beta(&clean, &OperatingPoint::<f64>::new(0.0, 0.9, 0.0, 1e-4)).unwrap();
    outcome(rel(b, 160.0) <= 0.01, format!("beta_F = {b:.3}"))
}

fn s21() -> Outcome {
    let amp = amplifier();
    let grid = logspace(0.1e6, 100e6, 200);
    let span = |c: &ChainResponse| {
        grid.iter().map(|&f| db20(c.magnitude(f))).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
            (lo.min(d), hi.max(d))
        })
    };
    let two = span(&amp.two_stage_chain().unwrap());
    let one = span(&amp.first_stage_chain().unwrap());
    let pass = two.0 >= 39.0 && two.1 <= 41.0 && one.0 >= -1.0 && one.1 <= 1.0;
    outcome(
        pass,
        format!(
            "two-stage [{:.2}, {:.2}] dB, first stage [{:.2}, {:.2}] dB",
            two.0, two.1, one.0, one.1
        ),
    )
}

fn friis() -> Outcome {
    let chain = cascade(vec![StageResponse::flat(1.0, 2.0), StageResponse::flat(100.0, 6.0)]).unwrap();
    outcome(chain.noise_temperature == 8.0, format!("T_total = {} K", chain.noise_temperature))
}

/// Brute-force DC solution. The collector loop is linear in `v_ce` once
/// `v_be` is fixed, so the search runs over `v_be` only, at 0.1 mV steps,
/// and keeps the point with the smallest base-node current error.
fn grid_search(net: &BiasNetwork, p: &TransistorParams) -> Option<(f64, f64)> {
    let node = |v_be: f64| {
        let e = p.i_sat * (v_be / p.v_teff).exp();
        let (r3, r4) = (net.r_collector, net.r_emitter);
        let k = e / p.v_early;
        let v_ce = (net.v_supply / r3 - e - r4 * e * (1.0 + 1.0 / p.beta_f) / r3) / (1.0 / r3 + r4 * k / r3 + k);
        let i_c = e * (1.0 + v_ce / p.v_early);
        let i_b = e / p.beta_f;
        let v_b = v_be + (i_c + i_b) * r4;
        let f = (net.v_supply - v_b) / net.r_upper - v_b / net.r_lower - i_b;
        (f, v_ce)
    };
    let mut best: Option<(f64, f64, f64)> = None;
    for k in 0..=12_000 {
        let v_be = -0.2 + k as f64 * 1e-4;
        let (f, v_ce) = node(v_be);
        if v_ce < 0.0 || !f.is_finite() {
            continue;
        }
        if best.is_none_or(|b| f.abs() < b.0) {
            best = Some((f.abs(), v_be, v_ce));
        }
    }
    best.map(|b| (b.1, b.2))
}

fn dc_solver() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut worst = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    while checked < 20 {
        let net = BiasNetwork {
            r_upper: 574e3 * rng.random_range(0.8..1.25),
            r_lower: 235e3 * rng.random_range(0.8..1.25),
            r_collector: rng.random_range(500.0..2000.0),
            r_emitter: rng.random_range(10.0..50.0),
            ..BiasNetwork::default()
        };
        let target = rng.random_range(30e-6..200e-6);
        let Ok(params) = TransistorParams::calibrated(
            &net,
            target,
            rng.random_range(0.02..0.04),
            rng.random_range(50.0..300.0),
            rng.random_range(80.0..300.0),
        ) else {
            continue;
        };
        if target * (net.r_collector + net.r_emitter) > 0.9 * net.v_supply {
            continue;
        }
        checked += 1;
        let newton = solve_operating_point(&net, &params, 1e-9, 100);
        let oracle = grid_search(&net, &params);
        match (newton, oracle) {
            (Ok(op), Some((v_be, v_ce))) => {
                let g_m = small_signal(&op, &params).unwrap().g_m;
                let tol_ce = (1.0 + g_m * (net.r_collector + net.r_emitter)) * 1e-4 + 1e-4;
                let (d_be, d_ce) = ((op.v_be - v_be).abs(), (op.v_ce - v_ce).abs());
                worst = (worst.0.max(d_be), worst.1.max(d_ce / tol_ce * 1e-4));
                if d_be > 1e-4 || d_ce > tol_ce {
                    failures.push(format!("set {checked}: dv_be {d_be:.2e}, dv_ce {d_ce:.2e}"));
                }
            }
            (n, o) => failures.push(format!("set {checked}: newton ok {}, oracle ok {}", n.is_ok(), o.is_some())),
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "20 sets, worst |dv_be| = {:.3} mV, worst scaled |dv_ce| = {:.3} mV",
            worst.0 * 1e3,
            worst.1 * 1e3
        )
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn dft_fundamental(x: &[f64], f: f64, fs: f64) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &v) in x.iter().enumerate() {
        let ph = TAU * f * k as f64 / fs;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    2.0 * re.hypot(im) / x.len() as f64 / SQRT_2
}

fn lock_in() -> Outcome {
    let (f, spp, tau) = (250e3, 32usize, 1e-3);
    let fs = f * spp as f64;
    let n = ((20.0 * tau * f).ceil() as usize + 1) * spp;
    let ens = EnsembleParams::default();
    let pop = rydberg_population(&DriveWaveform::new(f, &ens).unwrap(), &ens, 1.0, 1, spp).unwrap().rho22;
    let signals: [(&str, Box<dyn Fn(usize) -> f64>); 3] = [
        ("sine", Box::new(|k| (TAU * k as f64 / spp as f64 + 0.3).sin())),
        ("square", Box::new(|k| if k % spp < spp / 2 { 1.0 } else { -1.0 })),
        ("population", Box::new(move |k| pop[k % spp])),
    ];
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for (name, s) in &signals {
        let w = Waveform::new(fs, (0..n).map(s).collect());
        let oracle = dft_fundamental(&w.samples[..spp], f, fs);
        let r = demodulate(&w, f, tau, 4).unwrap().amplitude_r;
        let e = rel(r, oracle);
        worst = worst.max(e);
        parts.push(format!("{name} {:.1e}", e));
    }
    outcome(worst <= 1e-3, format!("relative error: {}", parts.join(", ")))
}

fn argmax(points: &[SweepPoint]) -> &SweepPoint {
    points.iter().max_by(|a, b| a.result.amplitude_r.total_cmp(&b.result.amplitude_r)).unwrap()
}

fn fm_shape() -> Outcome {
    let ens = EnsembleParams::default();
    let drive = DriveWaveform::new(250e3, &ens).unwrap();
    let geom = CellGeometry::default();
    let amp = amplifier();
    let chain = amp.sweep_chain(&CouplingNetwork::first_stage()).unwrap();
    let cfg = SweepConfig { seed: 1, ..SweepConfig::default() };
    let mut grid = logspace(100e3, 100e6, 31);
    grid[20] = 10e6;
    let pts = sweep_fm(&grid, ens.v_resonance, &drive, &ens, &geom, &chain, &cfg).unwrap();
    let peak = argmax(&pts);
    let at_peak = (150e3..=300e3).contains(&peak.x_value);
    let r10 = pts[20].result.amplitude_r / peak.result.amplitude_r;

    let no_corner = StageResponse { low_poles: vec![], low_zeros: vec![], ..amp.second.clone() };
    let flat = chain.with_stage(2, no_corner).unwrap();
    let low = &grid[..8];
    let before = sweep_fm(low, ens.v_resonance, &drive, &ens, &geom, &chain, &cfg).unwrap();
    let after = sweep_fm(low, ens.v_resonance, &drive, &ens, &geom, &flat, &cfg).unwrap();
    let suppressed = |p: &[SweepPoint]| argmax(p).x_value > low[0];
    let removed = suppressed(&before) && !suppressed(&after);

    let pass = at_peak && r10 < 0.2 && removed;
    outcome(
        pass,
        format!(
            "argmax {:.0} kHz (want 150-300), R(10 MHz)/R(max) = {r10:.3}, region-1 suppression {} -> {}",
            peak.x_value / 1e3,
            if suppressed(&before) { "present" } else { "absent" },
            if suppressed(&after) { "present" } else { "absent" },
        ),
    )
}

fn vbc_shape() -> Outcome {
    let ens = EnsembleParams::default();
    let drive = DriveWaveform::new(250e3, &ens).unwrap();
    let geom = CellGeometry::default();
    let chain = amplifier().sweep_chain(&CouplingNetwork::first_stage()).unwrap();
    let cfg = SweepConfig { seed: 1, ..SweepConfig::default() };
    let grid = linspace(10.0, 13.0, 61);
    let a = sweep_vbc(&grid, &drive, &ens, &geom, &chain, &cfg).unwrap();
    let moved = EnsembleParams { v_resonance: 10.45, ..ens };
    let b = sweep_vbc(&grid, &drive, &moved, &geom, &chain, &cfg).unwrap();
    let (pa, pb) = (argmax(&a).x_value, argmax(&b).x_value);
    outcome(
        (pa - 11.6).abs() < 1e-9 && (pb - 10.45).abs() < 1e-9,
        format!("peak {pa} V, shifted peak {pb} V"),
    )
}

fn image_current() -> Outcome {
    let geom = CellGeometry::default();
    let (f_m, n_s, rho) = (100e3, 1e12, 0.1);
    let verbatim = rms_image_current(f_m, &geom, n_s, rho);
    let direct = TAU * f_m * image_charge(rho, &geom, n_s);
    let plate = CellGeometry { c_cell: geom.plate_capacitance(), ..geom };
    let identity = rel(rms_image_current(f_m, &plate, n_s, rho), direct);
    let ratio = verbatim / 100e-12;
    let pass = identity < 1e-12 && (0.1..=10.0).contains(&ratio);
    outcome(
        pass,
        format!(
            "formula {:.1} pA, 2*pi*f_m*dq {:.2} pA, identity error {identity:.1e}, formula / 100 pA = {ratio:.2}",
            verbatim * 1e12,
            direct * 1e12
        ),
    )
}

fn run_bin(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_cryoamp"))
        .args(args)
        .stdout(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let mut parts = Vec::new();
    let mut pass = true;
    for (axis, points) in [("vbc", "21"), ("fm", "7")] {
        let a = root.join(format!("{axis}_a"));
        let b = root.join(format!("{axis}_b"));
        let p = |d: &Path| d.to_str().unwrap().to_owned();
        let first = run_bin(&["--seed", "42", "--out", &p(&a), "sweep", "--axis", axis, "--points", points]);
        let manifest = a.join(format!("sweep_{axis}.manifest.ini"));
        let second = run_bin(&["--config", &p(&manifest), "--out", &p(&b), "sweep"]);
        let csv = format!("sweep_{axis}.csv");
        let same = first
            && second
            && std::fs::read(a.join(&csv)).ok().is_some()
            && std::fs::read(a.join(&csv)).ok() == std::fs::read(b.join(&csv)).ok();
        pass &= same;
        parts.push(format!("{axis} {}", if same { "identical" } else { "differs" }));
    }
    outcome(pass, parts.join(", "))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 13] = [
        ("V_ac capacitive division", Duration::from_secs(1), v_ac),
        ("intrinsic gain", Duration::from_secs(1), gain),
        ("power dissipation", Duration::from_secs(1), power),
        ("Early-voltage recovery", Duration::from_secs(10), early),
        ("beta recovery", Duration::from_secs(1), beta),
        ("S21 flatness", Duration::from_secs(1), s21),
        ("Friis cascade", Duration::from_secs(1), friis),
        ("DC solver vs grid search", Duration::from_secs(30), dc_solver),
        ("lock-in vs DFT", Duration::from_secs(10), lock_in),
        ("f_m sweep shape", Duration::from_secs(120), fm_shape),
        ("V_BC sweep shape", Duration::from_secs(120), vbc_shape),
        ("RMS image current", Duration::from_secs(1), image_current),
        ("manifest rerun determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = check();
        let dt = t.elapsed();
        let pass = o.pass && dt <= *budget;
        failed += usize::from(!pass);
        println!(
            "{} {:>2} {name}: {} [{:.2} s, limit {} s]",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            dt.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
