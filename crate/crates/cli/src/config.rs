//! Experiment configs: a strict JSON envelope `{kind, params, seed}` whose
//! `params` object is parsed against the schema of that kind. Every field
//! carries its unit in its name; anything unrecognised is rejected.

use std::f64::consts::PI;
use std::fmt;

use qbattery_core::circuit::{CircuitParams, MIN_BASIS};
use qbattery_core::evolution::DecayRates;
use qbattery_core::protocols::{Grid, ProtectionConfig, SweepConfig};
use qbattery_core::pulses::{Constraint, EnvelopeKind, EnvelopeSpec};
use qbattery_core::qutrit::LevelEnergies;
use qbattery_core::{metrics, units};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Rejected before any computation; exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(msg: impl fmt::Display) -> ConfigError {
    ConfigError(msg.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    ChargeCurve,
    SweepEta,
    SweepPhase,
    Qsl,
    SpectrumSweep,
    TomoRoundtrip,
    DecayFit,
    Thermo,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::ChargeCurve => "charge-curve",
            Kind::SweepEta => "sweep-eta",
            Kind::SweepPhase => "sweep-phase",
            Kind::Qsl => "qsl",
            Kind::SpectrumSweep => "spectrum-sweep",
            Kind::TomoRoundtrip => "tomo-roundtrip",
            Kind::DecayFit => "decay-fit",
            Kind::Thermo => "thermo",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope {
    kind: Kind,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    SweetSpot,
    ChargingBias,
}

/// Transition frequencies as a named bias point or explicit values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelsConfig {
    Preset(Preset),
    Explicit(ExplicitLevels),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitLevels {
    pub omega_ge_ghz_over_2pi: f64,
    pub omega_gf_ghz_over_2pi: f64,
}

impl Default for LevelsConfig {
    fn default() -> Self {
        LevelsConfig::Preset(Preset::ChargingBias)
    }
}

impl LevelsConfig {
    fn build(&self) -> Result<LevelEnergies, ConfigError> {
        match self {
            LevelsConfig::Preset(Preset::SweetSpot) => Ok(LevelEnergies::sweet_spot()),
            LevelsConfig::Preset(Preset::ChargingBias) => Ok(LevelEnergies::charging_bias()),
            LevelsConfig::Explicit(l) => {
                LevelEnergies::from_transitions_ghz(l.omega_ge_ghz_over_2pi, l.omega_gf_ghz_over_2pi).map_err(invalid)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RatesConfig {
    Preset(Preset),
    Explicit(ExplicitRates),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitRates {
    pub gamma_eg_khz: f64,
    pub gamma_fe_khz: f64,
    pub gamma_fg_khz: f64,
}

impl RatesConfig {
    fn build(&self) -> Result<DecayRates, ConfigError> {
        match self {
            RatesConfig::Preset(Preset::SweetSpot) => Ok(DecayRates::sweet_spot()),
            RatesConfig::Preset(Preset::ChargingBias) => Ok(DecayRates::charging_bias()),
            RatesConfig::Explicit(r) => DecayRates::from_khz(r.gamma_eg_khz, r.gamma_fe_khz, r.gamma_fg_khz).map_err(invalid),
        }
    }
}

fn build_rates(rates: &Option<RatesConfig>) -> Result<Option<DecayRates>, ConfigError> {
    rates.as_ref().map(RatesConfig::build).transpose()
}

/// Inclusive grid, `stop − start` an integer number of steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridConfig {
    fn build(&self) -> Result<Grid, ConfigError> {
        let grid = Grid::new(self.start, self.stop, self.step);
        grid.points().map_err(invalid)?;
        Ok(grid)
    }
}

fn default_omega() -> f64 {
    10.0
}
fn default_tau_max() -> f64 {
    1000.0
}
fn default_dtau() -> f64 {
    4.0
}
fn default_theta() -> f64 {
    metrics::DEFAULT_THETA_MIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChargeCurveParams {
    #[serde(default = "default_protocol")]
    pub protocol: EnvelopeKind,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_omega")]
    pub omega_max_mhz_over_2pi: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max_ns: f64,
    #[serde(default = "default_dtau")]
    pub dtau_ns: f64,
    #[serde(default = "default_theta")]
    pub theta_min: f64,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
}

fn default_protocol() -> EnvelopeKind {
    EnvelopeKind::StirapTri
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEtaParams {
    #[serde(default = "default_constraint")]
    pub constraint: Constraint,
    #[serde(default = "default_eta_grid")]
    pub eta_grid: GridConfig,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_omega")]
    pub omega_max_mhz_over_2pi: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max_ns: f64,
    #[serde(default = "default_dtau")]
    pub dtau_ns: f64,
    #[serde(default = "default_theta")]
    pub theta_min: f64,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
}

fn default_constraint() -> Constraint {
    Constraint::SquareSum
}

fn default_eta_grid() -> GridConfig {
    GridConfig { start: 0.0, stop: 0.4, step: 0.02 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPhaseParams {
    #[serde(default = "default_constraint")]
    pub constraint: Constraint,
    /// Defaults to 0.12 (square sum) or 0.14 (linear sum).
    #[serde(default)]
    pub eta: Option<f64>,
    /// Grid over [−π, π] with step 2π/divisions.
    #[serde(default = "default_divisions")]
    pub phase_divisions: u32,
    #[serde(default = "default_omega")]
    pub omega_max_mhz_over_2pi: f64,
    #[serde(default = "default_tau_max")]
    pub tau_max_ns: f64,
    #[serde(default = "default_dtau")]
    pub dtau_ns: f64,
    #[serde(default = "default_theta")]
    pub theta_min: f64,
    #[serde(default)]
    pub levels: LevelsConfig,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
}

fn default_divisions() -> u32 {
    24
}

/// The optimal CD weights read off the η scans of the two constraints.
pub fn reference_eta(constraint: Constraint) -> f64 {
    match constraint {
        Constraint::SquareSum => 0.12,
        Constraint::LinearSum => 0.14,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QslParams {
    #[serde(default = "default_omega")]
    pub omega_max_mhz_over_2pi: f64,
    /// Defaults to π/(2Ω_max).
    #[serde(default)]
    pub tau_protect_ns: Option<f64>,
    #[serde(default = "default_detuning")]
    pub detuning_after_mhz_over_2pi: f64,
    #[serde(default = "default_total")]
    pub total_duration_ns: f64,
    #[serde(default = "default_qsl_theta")]
    pub theta_min: f64,
    #[serde(default)]
    pub levels: LevelsConfig,
    /// Emit the full trajectory instead of the one-row summary.
    #[serde(default)]
    pub trajectory: bool,
}

fn default_detuning() -> f64 {
    48.0
}
fn default_total() -> f64 {
    200.0
}
fn default_qsl_theta() -> f64 {
    0.999
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSweepParams {
    #[serde(default = "default_ic")]
    pub critical_current_na: f64,
    #[serde(default = "default_cj")]
    pub c_j_ff: f64,
    #[serde(default = "default_csh")]
    pub c_sh_ff: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_flux_grid")]
    pub flux_grid: GridConfig,
    #[serde(default = "default_basis")]
    pub basis_size: usize,
}

fn default_ic() -> f64 {
    88.0
}
fn default_cj() -> f64 {
    9.0
}
fn default_csh() -> f64 {
    45.0
}
fn default_alpha() -> f64 {
    0.471
}
fn default_flux_grid() -> GridConfig {
    GridConfig { start: 0.49, stop: 0.51, step: 0.001 }
}
fn default_basis() -> usize {
    qbattery_core::circuit::DEFAULT_BASIS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TomoState {
    Ground,
    Excited,
    SecondExcited,
    MaximallyMixed,
    /// Seeded Ginibre states, one per record.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomoRoundtripParams {
    #[serde(default = "default_tomo_state")]
    pub state: TomoState,
    #[serde(default = "default_records")]
    pub records: usize,
    /// Shots per setting; 0 uses exact probabilities.
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub levels: LevelsConfig,
}

fn default_tomo_state() -> TomoState {
    TomoState::SecondExcited
}
fn default_records() -> usize {
    10
}
fn default_shots() -> u64 {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecaySource {
    Analytic,
    Lindblad,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayFitParams {
    #[serde(default = "default_decay_rates")]
    pub rates: RatesConfig,
    #[serde(default = "default_decay_t_max")]
    pub t_max_us: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_source")]
    pub source: DecaySource,
    /// Gaussian population noise, drawn from the run seed.
    #[serde(default)]
    pub noise_std: f64,
}

fn default_decay_rates() -> RatesConfig {
    RatesConfig::Preset(Preset::ChargingBias)
}
fn default_decay_t_max() -> f64 {
    60.0
}
fn default_samples() -> usize {
    200
}
fn default_source() -> DecaySource {
    DecaySource::Analytic
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermoParams {
    #[serde(default = "default_thermo_protocols")]
    pub protocols: Vec<EnvelopeKind>,
    #[serde(default)]
    pub eta: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default = "default_thermo_tau")]
    pub tau_ns: f64,
    #[serde(default = "default_omega")]
    pub omega_max_mhz_over_2pi: f64,
    #[serde(default = "default_thermo_levels")]
    pub levels: LevelsConfig,
}

fn default_thermo_protocols() -> Vec<EnvelopeKind> {
    vec![EnvelopeKind::StirapTri, EnvelopeKind::StirapCyc, EnvelopeKind::CdSquareSum, EnvelopeKind::CdLinearSum]
}
fn default_thermo_tau() -> f64 {
    200.0
}
fn default_thermo_levels() -> LevelsConfig {
    LevelsConfig::Preset(Preset::SweetSpot)
}

/// Validated experiment, ready to run.
#[derive(Debug, Clone)]
pub enum Experiment {
    ChargeCurve { params: ChargeCurveParams, template: EnvelopeSpec, levels: LevelEnergies, rates: Option<DecayRates> },
    SweepEta { params: SweepEtaParams, sweep: SweepConfig },
    SweepPhase { params: SweepPhaseParams, sweep: SweepConfig, eta: f64 },
    Qsl { params: QslParams, omega_max: f64, protection: ProtectionConfig, levels: LevelEnergies },
    SpectrumSweep { params: SpectrumSweepParams, circuit: CircuitParams, fluxes: Vec<f64> },
    TomoRoundtrip { params: TomoRoundtripParams, levels: LevelEnergies },
    DecayFit { params: DecayFitParams, rates: DecayRates },
    Thermo { params: ThermoParams, specs: Vec<EnvelopeSpec>, levels: LevelEnergies },
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub seed: u64,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    /// Parse and validate; `seed_override` (the `--seed` flag) wins over the
    /// file.
    pub fn from_json(text: &str, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let envelope: Envelope = serde_json::from_str(text).map_err(invalid)?;
        let params = envelope.params.unwrap_or_else(|| Value::Object(Default::default()));
        let experiment = match envelope.kind {
            Kind::ChargeCurve => build_charge_curve(parse(params)?)?,
            Kind::SweepEta => build_sweep_eta(parse(params)?)?,
            Kind::SweepPhase => build_sweep_phase(parse(params)?)?,
            Kind::Qsl => build_qsl(parse(params)?)?,
            Kind::SpectrumSweep => build_spectrum(parse(params)?)?,
            Kind::TomoRoundtrip => build_tomo(parse(params)?)?,
            Kind::DecayFit => build_decay(parse(params)?)?,
            Kind::Thermo => build_thermo(parse(params)?)?,
        };
        Ok(Self { kind: envelope.kind, seed: seed_override.or(envelope.seed).unwrap_or(0), experiment })
    }

    /// The fully resolved config (defaults filled in), as echoed into output
    /// metadata.
    pub fn resolved(&self) -> Value {
        let params = match &self.experiment {
            Experiment::ChargeCurve { params, .. } => serde_json::to_value(params),
            Experiment::SweepEta { params, .. } => serde_json::to_value(params),
            Experiment::SweepPhase { params, .. } => serde_json::to_value(params),
            Experiment::Qsl { params, .. } => serde_json::to_value(params),
            Experiment::SpectrumSweep { params, .. } => serde_json::to_value(params),
            Experiment::TomoRoundtrip { params, .. } => serde_json::to_value(params),
            Experiment::DecayFit { params, .. } => serde_json::to_value(params),
            Experiment::Thermo { params, .. } => serde_json::to_value(params),
        }
        .expect("params serialise");
        serde_json::json!({ "kind": self.kind.name(), "seed": self.seed, "params": params })
    }
}

fn parse<T: DeserializeOwned>(params: Value) -> Result<T, ConfigError> {
    serde_json::from_value(params).map_err(|e| invalid(format!("params: {e}")))
}

fn positive(name: &str, value: f64) -> Result<f64, ConfigError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(invalid(format!("{name} must be positive, got {value}")))
    }
}

fn omega(mhz_over_2pi: f64) -> Result<f64, ConfigError> {
    Ok(units::mhz(positive("omega_max_mhz_over_2pi", mhz_over_2pi)?))
}

fn build_charge_curve(params: ChargeCurveParams) -> Result<Experiment, ConfigError> {
    let omega_max = omega(params.omega_max_mhz_over_2pi)?;
    let tau_max = units::ns(positive("tau_max_ns", params.tau_max_ns)?);
    let template = EnvelopeSpec::new(params.protocol, omega_max, tau_max, params.eta, params.phase_rad).map_err(invalid)?;
    let levels = params.levels.build()?;
    let rates = build_rates(&params.rates)?;
    // reuse the sweep validation for the τ grid and θ_min
    let mut check = SweepConfig::defaults(params.protocol.constraint());
    check.tau_max = tau_max;
    check.dtau = units::ns(params.dtau_ns);
    check.omega_max = omega_max;
    check.theta_min = params.theta_min;
    check.validate().map_err(invalid)?;
    Ok(Experiment::ChargeCurve { params, template, levels, rates })
}

fn sweep_config(
    constraint: Constraint,
    omega_mhz: f64,
    tau_max_ns: f64,
    dtau_ns: f64,
    theta_min: f64,
    levels: &LevelsConfig,
    rates: &Option<RatesConfig>,
) -> Result<SweepConfig, ConfigError> {
    let mut sweep = SweepConfig::defaults(constraint);
    sweep.omega_max = omega(omega_mhz)?;
    sweep.tau_max = units::ns(tau_max_ns);
    sweep.dtau = units::ns(dtau_ns);
    sweep.theta_min = theta_min;
    sweep.levels = levels.build()?;
    sweep.rates = build_rates(rates)?;
    Ok(sweep)
}

fn build_sweep_eta(params: SweepEtaParams) -> Result<Experiment, ConfigError> {
    let mut sweep = sweep_config(
        params.constraint,
        params.omega_max_mhz_over_2pi,
        params.tau_max_ns,
        params.dtau_ns,
        params.theta_min,
        &params.levels,
        &params.rates,
    )?;
    sweep.eta_grid = params.eta_grid.build()?;
    sweep.phase = params.phase_rad;
    let max_eta = params.constraint.max_eta();
    if params.eta_grid.start < 0.0 || params.eta_grid.stop > max_eta {
        return Err(invalid(format!("eta_grid must lie in [0, {max_eta}]")));
    }
    sweep.validate().map_err(invalid)?;
    Ok(Experiment::SweepEta { params, sweep })
}

fn build_sweep_phase(mut params: SweepPhaseParams) -> Result<Experiment, ConfigError> {
    let mut sweep = sweep_config(
        params.constraint,
        params.omega_max_mhz_over_2pi,
        params.tau_max_ns,
        params.dtau_ns,
        params.theta_min,
        &params.levels,
        &params.rates,
    )?;
    if params.phase_divisions < 2 {
        return Err(invalid("phase_divisions must be at least 2"));
    }
    sweep.phase_grid = Grid::new(-PI, PI, 2.0 * PI / params.phase_divisions as f64);
    let eta = *params.eta.get_or_insert(reference_eta(params.constraint));
    if !(0.0..=params.constraint.max_eta()).contains(&eta) {
        return Err(invalid(format!("eta = {eta} outside [0, {}]", params.constraint.max_eta())));
    }
    sweep.validate().map_err(invalid)?;
    Ok(Experiment::SweepPhase { params, sweep, eta })
}

fn build_qsl(mut params: QslParams) -> Result<Experiment, ConfigError> {
    let omega_max = omega(params.omega_max_mhz_over_2pi)?;
    let mut protection = ProtectionConfig::defaults(omega_max);
    match params.tau_protect_ns {
        Some(t) => protection.tau_protect = units::ns(t),
        None => params.tau_protect_ns = Some(units::to_ns(protection.tau_protect)),
    }
    protection.detuning_after = units::mhz(params.detuning_after_mhz_over_2pi);
    protection.total_duration = units::ns(params.total_duration_ns);
    protection.validate().map_err(invalid)?;
    if !(0.0..=1.0).contains(&params.theta_min) {
        return Err(invalid(format!("theta_min = {} outside [0, 1]", params.theta_min)));
    }
    let levels = params.levels.build()?;
    Ok(Experiment::Qsl { params, omega_max, protection, levels })
}

fn build_spectrum(params: SpectrumSweepParams) -> Result<Experiment, ConfigError> {
    let circuit = CircuitParams::from_critical_current(
        positive("critical_current_na", params.critical_current_na)? * 1e-9,
        positive("c_j_ff", params.c_j_ff)? * 1e-15,
        positive("c_sh_ff", params.c_sh_ff)? * 1e-15,
        params.alpha,
        0.5,
    )
    .map_err(invalid)?;
    let fluxes = params.flux_grid.build()?.points().map_err(invalid)?;
    if params.basis_size < MIN_BASIS || params.basis_size.is_multiple_of(2) {
        return Err(invalid(format!("basis_size must be odd and at least {MIN_BASIS}, got {}", params.basis_size)));
    }
    Ok(Experiment::SpectrumSweep { params, circuit, fluxes })
}

fn build_tomo(params: TomoRoundtripParams) -> Result<Experiment, ConfigError> {
    if params.records == 0 {
        return Err(invalid("records must be at least 1"));
    }
    let levels = params.levels.build()?;
    Ok(Experiment::TomoRoundtrip { params, levels })
}

fn build_decay(params: DecayFitParams) -> Result<Experiment, ConfigError> {
    let rates = params.rates.build()?;
    positive("t_max_us", params.t_max_us)?;
    if params.samples < 3 {
        return Err(invalid("samples must be at least 3"));
    }
    if !(params.noise_std.is_finite() && params.noise_std >= 0.0) {
        return Err(invalid(format!("noise_std must be non-negative, got {}", params.noise_std)));
    }
    Ok(Experiment::DecayFit { params, rates })
}

fn build_thermo(params: ThermoParams) -> Result<Experiment, ConfigError> {
    if params.protocols.is_empty() {
        return Err(invalid("protocols must not be empty"));
    }
    let omega_max = omega(params.omega_max_mhz_over_2pi)?;
    let tau = units::ns(positive("tau_ns", params.tau_ns)?);
    let specs = params
        .protocols
        .iter()
        .map(|&kind| {
            let eta = if kind.uses_eta() { params.eta } else { 0.0 };
            EnvelopeSpec::new(kind, omega_max, tau, eta, params.phase_rad).map_err(invalid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let levels = params.levels.build()?;
    Ok(Experiment::Thermo { params, specs, levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_params() {
        let cfg = ExperimentConfig::from_json(r#"{"kind": "sweep-eta"}"#, None).unwrap();
        let Experiment::SweepEta { sweep, .. } = &cfg.experiment else { panic!() };
        assert_eq!(sweep.eta_grid.points().unwrap().len(), 21);
        assert_eq!(cfg.seed, 0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"kind": "qsl", "extra": 1}"#, None).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "qsl", "params": {"omega_max": 10}}"#, None).is_err());
        assert!(ExperimentConfig::from_json(r#"{"kind": "teleport"}"#, None).is_err());
    }

    #[test]
    fn empty_tau_grid_is_rejected() {
        let text = r#"{"kind": "charge-curve", "params": {"tau_max_ns": 0}}"#;
        assert!(ExperimentConfig::from_json(text, None).is_err());
        let text = r#"{"kind": "charge-curve", "params": {"tau_max_ns": 1000, "dtau_ns": 3}}"#;
        assert!(ExperimentConfig::from_json(text, None).is_err());
    }

    #[test]
    fn seed_flag_overrides_file() {
        let cfg = ExperimentConfig::from_json(r#"{"kind": "tomo-roundtrip", "seed": 5}"#, Some(9)).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.resolved()["seed"], 9);
    }

    #[test]
    fn explicit_levels_and_rates() {
        let text = r#"{"kind": "charge-curve", "params": {
            "levels": {"omega_ge_ghz_over_2pi": 2.6, "omega_gf_ghz_over_2pi": 6.0},
            "rates": {"gamma_eg_khz": 100, "gamma_fe_khz": 50, "gamma_fg_khz": 10}}}"#;
        let cfg = ExperimentConfig::from_json(text, None).unwrap();
        let Experiment::ChargeCurve { rates, .. } = cfg.experiment else { panic!() };
        assert_eq!(rates.unwrap().gamma_fe, 5e4);
        let text = r#"{"kind": "decay-fit", "params": {"rates": {"gamma_eg_khz": 1, "gamma_fe_khz": 1}}}"#;
        assert!(ExperimentConfig::from_json(text, None).is_err());
    }
}
