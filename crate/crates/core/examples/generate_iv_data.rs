//! Writes the synthetic IV datasets bundled with the command-line tool.
//!
//! ```text
//! cargo run -p cryoamp-core --example generate_iv_data -- crates/cli/data
//! ```

use std::path::PathBuf;

use cryoamp::device::TransistorParams;
use cryoamp::ivfit::synth::{input_characteristic, output_family};
use cryoamp::ivfit::{to_csv, IvDataset, SweepDirection};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/cli/data".into()));
    std::fs::create_dir_all(&dir)?;
    let params = TransistorParams::<f64>::default();

    // Grids built from integers so the CSV holds short decimals.
    let labels: Vec<f64> = (0..17).map(|k| (200 + 50 * k) as f64 / 1e9).collect();
    let v_ce: Vec<f64> = (0..=200).map(|k| k as f64 / 100.0).collect();
    let family = output_family(&params, &labels, &v_ce, Some(0.03))?;
    std::fs::write(dir.join("output_family.csv"), to_csv(&family))?;

    let input = input_characteristic(&params, 0.9, &(0..=40).map(|k| (50 + 5 * k) as f64 / 1000.0).collect::<Vec<_>>())?;
    std::fs::write(dir.join("input_characteristic.csv"), to_csv(&input))?;

    // 10 % current dip on the 500 nA curve between 1.0 V and 1.2 V.
    let mut ndr = family.clone();
    for s in &mut ndr.sweeps {
        if (s.label.unwrap() - 500e-9).abs() < 1e-12 {
            for p in &mut s.points {
                if p.0 > 1.0 - 1e-9 && p.0 < 1.2 + 1e-9 {
                    p.1 *= 0.9;
                }
            }
        }
    }
    std::fs::write(dir.join("output_family_ndr.csv"), to_csv(&ndr))?;

    let mut sweeps = family.sweeps.clone();
    sweeps.extend(family.sweeps.iter().cloned().map(|mut s| {
        s.direction = SweepDirection::Backward;
        s
    }));
    let both = IvDataset::new(family.kind, sweeps)?;
    std::fs::write(dir.join("output_family_bidirectional.csv"), to_csv(&both))?;

    println!("wrote 4 datasets to {}", dir.display());
    Ok(())
}
