//! Full charging experiments built from the lower layers: charging curves
//! over protocol duration, η and φ sweeps scored by S, the speed-limit
//! protocol with its detuning cutoff, and a checker for the speed-limit
//! bound along any closed-system trajectory.
//!
//! Grid points are independent and are evaluated in parallel; results are
//! always assembled in grid order so repeated runs are bit-identical.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::evolution::{self, DecayRates, DetuningSchedule, Trajectory};
use crate::metrics::{self, ChargingCurve, ChargingMetrics};
use crate::pulses::{Constraint, EnvelopeSpec};
use crate::qutrit::{ergotropy, LevelEnergies, PureState3, E, F};
use crate::units;

/// Inclusive uniform grid start, start + step, …, stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn new(start: f64, stop: f64, step: f64) -> Self {
        Self { start, stop, step }
    }

    pub fn single(value: f64) -> Self {
        Self { start: value, stop: value, step: 1.0 }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        ensure_finite("grid start", self.start)?;
        ensure_finite("grid stop", self.stop)?;
        ensure_finite("grid step", self.step)?;
        if self.step <= 0.0 || self.stop < self.start {
            return Err(Error::InvalidArgument(format!(
                "grid needs step > 0 and stop ≥ start, got {self:?}"
            )));
        }
        let span = (self.stop - self.start) / self.step;
        let count = span.round();
        if (span - count).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("grid span is not a whole number of steps: {self:?}")));
        }
        Ok((0..=count as usize).map(|i| self.start + i as f64 * self.step).collect())
    }
}

/// Everything needed to sweep η or φ for one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub constraint: Constraint,
    pub eta_grid: Grid,
    pub phase_grid: Grid,
    /// CD phase used by the η sweep.
    pub phase: f64,
    pub tau_max: f64,
    pub dtau: f64,
    pub omega_max: f64,
    pub theta_min: f64,
    pub levels: LevelEnergies,
    /// Decay channels; `None` runs closed-system dynamics.
    pub rates: Option<DecayRates>,
    /// Reserved for stochastic extensions; the default path draws nothing.
    pub seed: u64,
}

impl SweepConfig {
    /// Ω_max/2π = 10 MHz, τ_max = 1000 ns, Δτ = 4 ns, η ∈ [0, 0.4] step
    /// 0.02, φ ∈ [−π, π] step π/12, levels at the 0.496 Φ₀ bias.
    pub fn defaults(constraint: Constraint) -> Self {
        Self {
            constraint,
            eta_grid: Grid::new(0.0, 0.4, 0.02),
            phase_grid: Grid::new(-PI, PI, PI / 12.0),
            phase: 0.0,
            tau_max: 1000e-9,
            dtau: 4e-9,
            omega_max: units::default_omega_max(),
            theta_min: metrics::DEFAULT_THETA_MIN,
            levels: LevelEnergies::charging_bias(),
            rates: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.eta_grid.points()?;
        self.phase_grid.points()?;
        for (name, v) in [("τ_max", self.tau_max), ("Δτ", self.dtau), ("Ω_max", self.omega_max), ("θ_min", self.theta_min), ("φ", self.phase)] {
            ensure_finite(name, v)?;
        }
        if self.dtau <= 0.0 || self.omega_max <= 0.0 {
            return Err(Error::InvalidArgument("Δτ and Ω_max must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.theta_min) {
            return Err(Error::InvalidArgument(format!("θ_min = {} outside [0, 1]", self.theta_min)));
        }
        let min_tau_max = 20.0 / self.omega_max;
        if self.tau_max < min_tau_max {
            return Err(Error::InvalidArgument(format!(
                "τ_max = {:e} s is shorter than 20/Ω_max = {min_tau_max:e} s",
                self.tau_max
            )));
        }
        tau_count(self.dtau, self.tau_max)?;
        if let Some(rates) = &self.rates {
            rates.validate()?;
        }
        Ok(())
    }

    fn template(&self, eta: f64, phase: f64) -> Result<EnvelopeSpec> {
        EnvelopeSpec::cd(self.constraint, self.omega_max, self.tau_max, eta, phase)
    }
}

fn tau_count(dtau: f64, tau_max: f64) -> Result<usize> {
    ensure_finite("Δτ", dtau)?;
    ensure_finite("τ_max", tau_max)?;
    if dtau <= 0.0 || tau_max <= 0.0 {
        return Err(Error::InvalidArgument(format!("need Δτ > 0 and τ_max > 0, got {dtau}, {tau_max}")));
    }
    let steps = tau_max / dtau;
    let rounded = steps.round();
    if (steps - rounded).abs() > 1e-6 || rounded < 2.0 {
        return Err(Error::InvalidArgument(format!(
            "τ_max = {tau_max:e} s must be a multiple (≥ 2) of Δτ = {dtau:e} s"
        )));
    }
    Ok(rounded as usize + 1)
}

/// Final ergotropy of one protocol of duration τ started in |g⟩.
pub fn final_ergotropy(spec: &EnvelopeSpec, levels: &LevelEnergies, rates: Option<&DecayRates>) -> Result<f64> {
    let detuning = DetuningSchedule::none();
    let dt = evolution::default_dt(spec, &detuning, rates);
    match rates {
        None => {
            let psi = evolution::final_state_unitary(spec, &PureState3::ground(), dt, &detuning)?;
            Ok(ergotropy(&psi.to_density(), levels))
        }
        Some(rates) => {
            let rho = evolution::final_state_lindblad(spec, &PureState3::ground().to_density(), rates, dt, &detuning)?;
            Ok(ergotropy(&rho, levels))
        }
    }
}

/// ℰ(τᵢ) for τᵢ = i·Δτ up to τ_max, each τ a separate protocol built from
/// `template` with its duration replaced.
pub fn charging_curve(
    template: &EnvelopeSpec,
    dtau: f64,
    tau_max: f64,
    levels: &LevelEnergies,
    rates: Option<&DecayRates>,
) -> Result<ChargingCurve> {
    template.validate()?;
    let count = tau_count(dtau, tau_max)?;
    let values = (0..count)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return Ok(0.0);
            }
            final_ergotropy(&template.with_tau(i as f64 * dtau)?, levels, rates)
        })
        .collect::<Result<Vec<_>>>()?;
    ChargingCurve::new(dtau, values, levels.e_max())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub phase: f64,
    /// `None` when the curve never charged; such rows never win.
    pub metrics: Option<ChargingMetrics>,
}

impl SweepRow {
    pub fn s(&self) -> Option<f64> {
        self.metrics.map(|m| m.s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Index of the winning row.
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }
}

fn evaluate(config: &SweepConfig, eta: f64, phase: f64) -> Result<SweepRow> {
    let curve = charging_curve(&config.template(eta, phase)?, config.dtau, config.tau_max, &config.levels, config.rates.as_ref())?;
    let metrics = metrics::charging_metrics(&curve, config.theta_min, config.omega_max)?;
    Ok(SweepRow { eta, phase, metrics })
}

/// Relative tolerance under which two S values count as tied.
const S_TIE_TOL: f64 = 1e-9;

fn beats(candidate: f64, incumbent: f64) -> bool {
    if incumbent.is_infinite() {
        return false;
    }
    candidate > incumbent * (1.0 + S_TIE_TOL)
}

/// Score every η on the grid; the winner maximises S, ties going to the
/// smaller η.
pub fn sweep_eta(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let etas = config.eta_grid.points()?;
    let rows = etas
        .par_iter()
        .map(|&eta| evaluate(config, eta, config.phase))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let Some(s) = row.s() else { continue };
        if best.is_none_or(|b| beats(s, rows[b].s().unwrap_or(f64::NEG_INFINITY))) {
            best = Some(i);
        }
    }
    Ok(SweepResult { rows, best })
}

/// Score every carrier phase φ on the grid at fixed η. Ties go to the
/// smallest |φ|.
pub fn sweep_phase(config: &SweepConfig, eta: f64) -> Result<SweepResult> {
    config.validate()?;
    let phases = config.phase_grid.points()?;
    if phases[0] > -PI + 1e-9 || *phases.last().unwrap() < PI - 1e-9 {
        return Err(Error::InvalidArgument("phase grid must cover at least [−π, π]".into()));
    }
    let rows = phases
        .par_iter()
        .map(|&phase| evaluate(config, eta, phase))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<usize> = None;
    for (i, row) in rows.iter().enumerate() {
        let Some(s) = row.s() else { continue };
        let replace = match best {
            None => true,
            Some(b) => {
                let incumbent = rows[b].s().unwrap_or(f64::NEG_INFINITY);
                let tied = !beats(s, incumbent) && !beats(incumbent, s);
                beats(s, incumbent) || (tied && closer_to_zero(row.phase, rows[b].phase))
            }
        };
        if replace {
            best = Some(i);
        }
    }
    Ok(SweepResult { rows, best })
}

/// Smaller |φ| wins; for mirror pairs ±φ the non-negative one does.
fn closer_to_zero(candidate: f64, incumbent: f64) -> bool {
    let (a, b) = (candidate.abs(), incumbent.abs());
    if (a - b).abs() > 1e-12 * b.max(1.0) {
        a < b
    } else {
        candidate > incumbent
    }
}

/// Timing of the flux window that keeps the g–f drive resonant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtectionConfig {
    /// Resonant window length, s.
    pub tau_protect: f64,
    /// Detuning applied after the window, rad/s.
    pub detuning_after: f64,
    /// Total drive duration, s.
    pub total_duration: f64,
}

impl ProtectionConfig {
    /// Window π/(2Ω_max), Δ/2π = 48 MHz afterwards, 200 ns of drive.
    pub fn defaults(omega_max: f64) -> Self {
        Self {
            tau_protect: speed_limit_time(omega_max),
            detuning_after: units::mhz(48.0),
            total_duration: 200e-9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("τ_protect", self.tau_protect)?;
        ensure_finite("Δ", self.detuning_after)?;
        ensure_finite("duration", self.total_duration)?;
        if self.total_duration <= 0.0 || !(0.0..=self.total_duration).contains(&self.tau_protect) {
            return Err(Error::InvalidArgument(format!(
                "need 0 ≤ τ_protect ≤ duration and duration > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// π/(2Ω_max): the fastest possible g → f transfer under the budget.
pub fn speed_limit_time(omega_max: f64) -> f64 {
    FRAC_PI_2 / omega_max
}

/// Lowest ℰ/E_max reached after a detuned cutoff from |f⟩:
/// 1 − 4Ω²/(Δ² + 4Ω²).
pub fn detuned_rabi_floor(omega_max: f64, detuning: f64) -> f64 {
    let d2 = detuning * detuning;
    d2 / (d2 + 4.0 * omega_max * omega_max)
}

#[derive(Debug, Clone)]
pub struct QslRun {
    pub trajectory: Trajectory,
    /// ℰ(t)/E_max along the trajectory.
    pub ergotropy_norm: Vec<f64>,
    /// First local maximum of ℰ(t) above θ_min·E_max.
    pub tau_c: Option<f64>,
    /// ℰ(τ_c)/E_max.
    pub peak: Option<f64>,
    /// min ℰ(t)/E_max over t > τ_protect.
    pub min_after_cutoff: Option<f64>,
    /// max ℰ(t)/E_max over the whole run.
    pub max_overall: f64,
    /// Analytic two-level floor for the detuned cutoff.
    pub rabi_floor: f64,
}

/// Drive (0, 0, Ω_max) from |g⟩ with Δ = 0 until τ_protect and Δ_after
/// afterwards.
pub fn run_qsl_protocol(omega_max: f64, protection: &ProtectionConfig, levels: &LevelEnergies, theta_min: f64) -> Result<QslRun> {
    protection.validate()?;
    let spec = EnvelopeSpec::qsl_square(omega_max, protection.total_duration)?;
    let detuning = DetuningSchedule::step(protection.tau_protect, 0.0, protection.detuning_after)?;
    let dt = evolution::default_dt(&spec, &detuning, None);
    let trajectory = evolution::evolve_unitary(&spec, &PureState3::ground(), dt, &detuning)?;
    let e_max = levels.e_max();
    let ergotropy_norm: Vec<f64> = trajectory.ergotropies(levels).into_iter().map(|e| e / e_max).collect();
    let index = metrics::first_local_max(&ergotropy_norm, theta_min);
    let after = trajectory
        .times
        .iter()
        .zip(&ergotropy_norm)
        .filter(|(t, _)| **t > protection.tau_protect)
        .map(|(_, e)| *e)
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
    let max_overall = ergotropy_norm.iter().copied().fold(0.0, f64::max);
    Ok(QslRun {
        tau_c: index.map(|i| trajectory.times[i]),
        peak: index.map(|i| ergotropy_norm[i]),
        min_after_cutoff: after,
        max_overall,
        rabi_floor: detuned_rabi_floor(omega_max, protection.detuning_after),
        ergotropy_norm,
        trajectory,
    })
}

/// arccos|⟨ψ|φ⟩| / min{E, ΔE}.
pub fn qsl_time(psi: &PureState3, target: &PureState3, mean_energy: f64, energy_spread: f64) -> Result<f64> {
    ensure_finite("E", mean_energy)?;
    ensure_finite("ΔE", energy_spread)?;
    let denom = mean_energy.min(energy_spread);
    if denom <= 0.0 {
        return Err(Error::InvalidArgument(format!("min{{E, ΔE}} = {denom} must be positive")));
    }
    Ok(psi.overlap(target).norm().min(1.0).acos() / denom)
}

/// Findings from checking d|a|/dt ≤ Ω_max·cos θ (sin θ = |a|, a the |f⟩
/// amplitude) along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QslBoundReport {
    /// Samples where |d|a|/dt| exceeds Ω_max·cos θ by more than the
    /// finite-difference slack.
    pub violations: usize,
    /// max over samples of (|d|a|/dt| − Ω_max·cos θ)/Ω_max.
    pub max_excess: f64,
    /// max relative gap |d|a|/dt| / (Ω_max cos θ) − 1 over samples with
    /// cos θ > 0.1; ≈ 0 when the bound is saturated.
    pub max_saturation_gap: f64,
    /// First time P_f ≥ 1 − 1e−6, if reached.
    pub first_passage: Option<f64>,
    /// π/(2Ω_max).
    pub limit: f64,
    /// First passage (if any) is no earlier than π/(2Ω_max) − 2dt.
    pub passage_respects_limit: bool,
}

impl QslBoundReport {
    pub fn satisfied(&self) -> bool {
        self.violations == 0 && self.passage_respects_limit
    }
}

/// Full-charge threshold used for first-passage times.
pub const FULL_CHARGE_POPULATION: f64 = 1.0 - 1e-6;

/// Check the speed-limit bound at every interior sample of a closed-system
/// trajectory, using centred differences for d|a|/dt.
pub fn verify_qsl_bound(trajectory: &Trajectory, omega_max: f64) -> Result<QslBoundReport> {
    ensure_finite("Ω_max", omega_max)?;
    if omega_max <= 0.0 {
        return Err(Error::InvalidArgument("Ω_max must be positive".into()));
    }
    let amplitudes = trajectory
        .amplitudes
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("speed-limit check needs a closed-system trajectory".into()))?;
    let times = &trajectory.times;
    let sin_theta: Vec<f64> = amplitudes.iter().map(|psi| psi.f().norm()).collect();
    let cos_theta: Vec<f64> = amplitudes.iter().map(|psi| (psi.g().norm_sqr() + psi.e().norm_sqr()).sqrt()).collect();

    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_gap = 0.0f64;
    for i in 1..times.len().saturating_sub(1) {
        let h = times[i + 1] - times[i - 1];
        if h <= 0.0 {
            continue;
        }
        let rate = ((sin_theta[i + 1] - sin_theta[i - 1]) / h).abs();
        let bound = omega_max * cos_theta[i];
        // centred-difference truncation error ~ (Ω h)²·Ω/6, plus round-off
        let slack = omega_max * ((omega_max * h).powi(2) + 1e-9);
        let excess = rate - bound;
        max_excess = max_excess.max(excess / omega_max);
        if excess > slack {
            violations += 1;
        }
        if cos_theta[i] > 0.1 {
            max_gap = max_gap.max((rate / bound - 1.0).abs());
        }
    }
    let first_passage = amplitudes
        .iter()
        .position(|psi| psi.f().norm_sqr() >= FULL_CHARGE_POPULATION)
        .map(|i| times[i]);
    let limit = speed_limit_time(omega_max);
    let passage_respects_limit = first_passage.is_none_or(|t| t >= limit - 2.0 * trajectory.dt);
    Ok(QslBoundReport {
        violations,
        max_excess: if max_excess.is_finite() { max_excess } else { 0.0 },
        max_saturation_gap: max_gap,
        first_passage,
        limit,
        passage_respects_limit,
    })
}

/// For each τ on the grid, the largest |e⟩ population seen during the
/// protocol.
pub fn intermediate_population_peaks(template: &EnvelopeSpec, dtau: f64, tau_max: f64) -> Result<Vec<f64>> {
    template.validate()?;
    let count = tau_count(dtau, tau_max)?;
    (1..count)
        .into_par_iter()
        .map(|i| {
            let spec = template.with_tau(i as f64 * dtau)?;
            let detuning = DetuningSchedule::none();
            let traj = evolution::evolve_unitary(&spec, &PureState3::ground(), evolution::default_dt(&spec, &detuning, None), &detuning)?;
            Ok(traj.population(E).into_iter().fold(0.0, f64::max))
        })
        .collect()
}

/// First time on a closed-system trajectory at which P_f ≥ 1 − 1e−6.
pub fn full_charge_time(trajectory: &Trajectory) -> Option<f64> {
    trajectory
        .states
        .iter()
        .position(|rho| rho.populations()[F] >= FULL_CHARGE_POPULATION)
        .map(|i| trajectory.times[i])
}
