use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cryoamp_cli::config::RunConfig;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn cryoamp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cryoamp")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data(name: &str) -> PathBuf {
    Path::new(DATA).join(name)
}

fn read_table(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}

fn report_value(p: &Path, name: &str) -> String {
    read_table(p).into_iter().find(|r| r[0] == name).unwrap()[1].clone()
}

#[test]
fn help_lists_units() {
    let o = cryoamp(&["sweep", "--help"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("V for vbc, Hz for fm"));
    assert!(text.contains("--seed"));
}

#[test]
fn fit_iv_bundled_data_is_usable() {
    let dir = tempfile::tempdir().unwrap();
    let o = cryoamp(&["--out", s(dir.path()), "fit-iv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = dir.path().join("fit_iv_report.csv");
    let v_a: f64 = report_value(&report, "v_early").parse().unwrap();
    assert!((v_a - 124.0).abs() < 0.005 * 124.0);
    let beta: f64 = report_value(&report, "beta_f").parse().unwrap();
    assert!((beta - 160.0).abs() < 1.6);
    assert_eq!(report_value(&report, "verdict"), "usable");
    assert_eq!(read_table(&dir.path().join("fit_iv_evidence.csv")).len(), 1);
}

#[test]
fn fit_iv_flags_ndr_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let ndr = data("output_family_ndr.csv");
    let o = cryoamp(&["--out", s(dir.path()), "fit-iv", "--output-csv", s(&ndr)]);
    assert_eq!(code(&o), 1);
    let ev = read_table(&dir.path().join("fit_iv_evidence.csv"));
    assert!(ev.len() > 1);
    assert!(ev[1..].iter().all(|r| r[2] == "ndr" && r[1] == "5e-7"));
}

#[test]
fn fit_iv_checks_hysteresis_with_both_directions() {
    let dir = tempfile::tempdir().unwrap();
    let both = data("output_family_bidirectional.csv");
    let o = cryoamp(&["--out", s(dir.path()), "fit-iv", "--both", "--output-csv", s(&both)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report_value(&dir.path().join("fit_iv_report.csv"), "hysteresis_checked"), "true");
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    assert_eq!(code(&cryoamp(&["--out", s(dir.path()), "fit-iv", "--output-csv", s(&empty)])), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "i_b_A,v_ce_V,i_c_A\n2e-7,0,0\n2e-7,0.1,x\n").unwrap();
    let o = cryoamp(&["--out", s(dir.path()), "fit-iv", "--output-csv", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let missing = dir.path().join("missing.ini");
    assert_eq!(code(&cryoamp(&["--config", s(&missing), "opp"])), 2);

    let cfg = dir.path().join("bad.ini");
    fs::write(&cfg, "[device]\nbeta_f = 160\nwhat = 1\n").unwrap();
    let o = cryoamp(&["--config", s(&cfg), "opp"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    assert_eq!(code(&cryoamp(&["--out", s(dir.path()), "s21", "--f-min-hz", "-1"])), 2);
    assert_eq!(code(&cryoamp(&["sweep", "--axis", "sideways"])), 2);
}

#[test]
fn fit_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.csv");
    let mut text = String::from("i_b_A,v_ce_V,i_c_A\n");
    for ib in [3e-7, 4e-7, 5e-7] {
        for k in 0..=20 {
            text += &format!("{ib},{},{}\n", k as f64 / 10.0, ib * 160.0);
        }
    }
    fs::write(&flat, text).unwrap();
    let o = cryoamp(&["--out", s(dir.path()), "fit-iv", "--output-csv", s(&flat)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn opp_reports_bias_point() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cryoamp(&["--out", s(dir.path()), "opp"])), 0);
    let report = dir.path().join("opp.csv");
    let i_c: f64 = report_value(&report, "i_c").parse().unwrap();
    assert!((i_c - 1e-4).abs() < 1e-10);
    let p: f64 = report_value(&report, "power").parse().unwrap();
    assert!((70e-6..=110e-6).contains(&p));
    assert_eq!(report_value(&report, "still_meets_margin_ratio"), "true");
}

#[test]
fn s21_single_frequency_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = cryoamp(&["--out", s(dir.path()), "s21", "--f-min-hz", "1e6", "--f-max-hz", "1e6", "--points", "5"]);
    assert_eq!(code(&o), 0);
    let rows = read_table(&dir.path().join("s21_both.csv"));
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0], ["f_Hz", "s21_dB"]);
    let db: f64 = rows[1][1].parse().unwrap();
    assert!((db - 40.0).abs() < 1.0);

    let o = cryoamp(&["--out", s(dir.path()), "s21", "--stage", "first", "--points", "200"]);
    assert_eq!(code(&o), 0);
    let rows = read_table(&dir.path().join("s21_first.csv"));
    assert_eq!(rows.len(), 201);
    assert!(rows[1..].iter().all(|r| r[1].parse::<f64>().unwrap().abs() < 1.0));
}

#[test]
fn sweep_manifest_replays_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = cryoamp(&["--seed", "9", "--out", s(&a), "sweep", "--start", "11", "--stop", "12", "--points", "11"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = a.join("sweep_vbc.manifest.ini");
    let cfg = RunConfig::load(&manifest).unwrap();
    assert_eq!(cfg.run.seed, 9);
    assert_eq!(cfg.sweep.vbc_points, 11);
    assert!(cfg.device.i_sat_A.is_some());

    let o = cryoamp(&["--config", s(&manifest), "--out", s(&b), "sweep"]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(a.join("sweep_vbc.csv")).unwrap(), fs::read(b.join("sweep_vbc.csv")).unwrap());

    let rows = read_table(&a.join("sweep_vbc.csv"));
    assert_eq!(rows[0], ["x_value", "R_V", "phase_rad"]);
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[7][0], "11.6");

    let o = cryoamp(&["--seed", "10", "--out", s(&b), "sweep", "--start", "11", "--stop", "12", "--points", "11"]);
    assert_eq!(code(&o), 0);
    assert_ne!(fs::read(a.join("sweep_vbc.csv")).unwrap(), fs::read(b.join("sweep_vbc.csv")).unwrap());
}

#[test]
fn sweep_dumps_waveforms() {
    let dir = tempfile::tempdir().unwrap();
    let o = cryoamp(&[
        "--out",
        s(dir.path()),
        "sweep",
        "--axis",
        "fm",
        "--start",
        "1e5",
        "--stop",
        "1e6",
        "--points",
        "2",
        "--dump-waveforms",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let w = dir.path().join("waveforms_fm");
    for name in ["point_0000_source.csv", "point_0000_output.csv", "point_0001_output.csv"] {
        let rows = read_table(&w.join(name));
        assert_eq!(rows[0], ["t_s", "value"]);
        assert_eq!(rows.len(), 17);
    }
}

#[test]
fn sweep_rejects_fm_outside_limits() {
    let dir = tempfile::tempdir().unwrap();
    let o = cryoamp(&["--out", s(dir.path()), "sweep", "--axis", "fm", "--start", "1e4", "--stop", "1e5"]);
    assert_eq!(code(&o), 2);
}
