//! Simulation and optimisation toolkit for three-level (qutrit) quantum
//! battery charging on a capacitively shunted flux qubit.
//!
//! The crate covers the rotating-frame drive model and ergotropy
//! ([`qutrit`]), STIRAP and norm-constrained counterdiabatic envelopes
//! ([`pulses`]), closed and open dynamics ([`evolution`]), charging figures of
//! merit ([`metrics`]), experiment orchestration ([`protocols`]), the circuit
//! level structure ([`circuit`]), and tomography plus calibration fits
//! ([`tomography`], [`calibration`]).

pub mod calibration;
pub mod circuit;
pub mod error;
pub mod evolution;
pub mod metrics;
pub mod protocols;
pub mod pulses;
pub mod qutrit;
pub mod tomography;
pub mod units;

pub use calibration::{CalibrationFit, DecayFit, PopulationSample, RabiFit};
pub use circuit::{CircuitParams, PerturbativeLevels, SpectrumResult};
pub use error::{Error, Result};
pub use evolution::{DecayRates, DetuningSchedule, Trajectory};
pub use metrics::{ChargeDetection, ChargingCurve, ChargingMetrics, ThermoReport};
pub use protocols::{Grid, ProtectionConfig, SweepConfig, SweepResult, SweepRow};
pub use pulses::{Constraint, ConstantDrive, Drive, EnvelopeKind, EnvelopeSpec};
pub use qutrit::{DensityMatrix3, DriveSample, LevelEnergies, Operator3, PureState3, C64};
pub use tomography::{MleResult, SettingRecord, TomographyRecord};
