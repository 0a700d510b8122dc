//! Simulation and characterization toolkit for cryogenic two-stage
//! amplified image-charge readout of Rydberg-state electrons on helium.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod chain;
pub mod device;
pub mod error;
pub mod ivfit;
pub mod lockin;
pub mod scalar;
pub mod source;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TransistorParamsF64 = device::TransistorParams<f64>;
pub type TransistorParamsF32 = device::TransistorParams<f32>;
pub type BiasNetworkF64 = device::BiasNetwork<f64>;
pub type BiasNetworkF32 = device::BiasNetwork<f32>;
pub type OperatingPointF64 = device::OperatingPoint<f64>;
pub type StageResponseF64 = chain::StageResponse<f64>;
pub type StageResponseF32 = chain::StageResponse<f32>;
pub type ChainResponseF64 = chain::ChainResponse<f64>;
pub type ChainResponseF32 = chain::ChainResponse<f32>;
pub type AmplifierF64 = chain::Amplifier<f64>;
pub type IvDatasetF64 = ivfit::IvDataset<f64>;
pub type EarlyFitF64 = ivfit::EarlyFit<f64>;
pub type EnsembleParamsF64 = source::EnsembleParams<f64>;
pub type DriveWaveformF64 = source::DriveWaveform<f64>;
pub type CellGeometryF64 = source::CellGeometry<f64>;
pub type LockInResultF64 = lockin::LockInResult<f64>;
pub type LockInResultF32 = lockin::LockInResult<f32>;
pub type SweepConfigF64 = lockin::SweepConfig<f64>;
