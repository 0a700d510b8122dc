//! IV characterization: CSV ingest, parameter extraction and usability
//! screening of the amplifier transistor.

mod classify;
mod dataset;
mod fit;
pub mod synth;

pub use classify::{
    classify_transistor, Defect, DeviceClassification, Evidence, Verdict, DEFAULT_HYSTERESIS_THRESHOLD,
    DEFAULT_NDR_THRESHOLD, SLOPE_SMOOTHING,
};
pub use dataset::{load_iv_dataset, to_csv, IvDataset, IvFormat, IvKind, Sweep, SweepDirection, INPUT_HEADER, OUTPUT_HEADER};
pub use fit::{
    fit_beta, fit_diode_params, fit_early_voltage, fit_early_voltage_in, intrinsic_gain, DiodeFit, EarlyFit,
    EARLY_LABEL_RANGE, EARLY_WINDOW_MIN,
};
