//! Figures of merit for a charging curve ℰ(τ): the charging time τ_c, the
//! post-charge spread ξ, the combined score S, and the thermodynamic cost of
//! a drive.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::pulses::Drive;
use crate::qutrit::{hs_norm, interaction_hamiltonian_unchecked, LevelEnergies};

/// Minimum number of tail samples for ξ.
pub const MIN_TAIL_SAMPLES: usize = 10;

/// Default charge threshold as a fraction of E_max.
pub const DEFAULT_THETA_MIN: f64 = 0.8;

/// Intervals used by the composite Simpson rule in [`thermo_cost`].
pub const THERMO_INTERVALS: usize = 2000;

/// Final ergotropy on a uniform grid of protocol durations τᵢ = i·Δτ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChargingCurve {
    dtau: f64,
    values: Vec<f64>,
    e_max: f64,
}

impl ChargingCurve {
    pub fn new(dtau: f64, values: Vec<f64>, e_max: f64) -> Result<Self> {
        ensure_finite("Δτ", dtau)?;
        ensure_finite("E_max", e_max)?;
        if dtau <= 0.0 || e_max <= 0.0 {
            return Err(Error::InvalidArgument(format!("need Δτ > 0 and E_max > 0, got {dtau}, {e_max}")));
        }
        let (lo, hi) = (-1e-6 * e_max, e_max * (1.0 + 1e-6));
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < lo || **v > hi) {
            return Err(Error::InvalidArgument(format!("ergotropy sample {i} = {v} outside [0, E_max]")));
        }
        Ok(Self { dtau, values, e_max })
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tau(&self, index: usize) -> f64 {
        index as f64 * self.dtau
    }

    pub fn taus(&self) -> Vec<f64> {
        (0..self.values.len()).map(|i| self.tau(i)).collect()
    }

    pub fn tau_max(&self) -> f64 {
        self.tau(self.values.len().saturating_sub(1))
    }

    /// ℰ/E_max.
    pub fn normalized(&self) -> Vec<f64> {
        self.values.iter().map(|v| v / self.e_max).collect()
    }
}

/// Outcome of the τ_c search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChargeDetection {
    Charged { index: usize, tau_c: f64 },
    /// No local maximum reaches θ_min·E_max.
    NotCharged,
}

impl ChargeDetection {
    pub fn tau_c(&self) -> Option<f64> {
        match self {
            ChargeDetection::Charged { tau_c, .. } => Some(*tau_c),
            ChargeDetection::NotCharged => None,
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            ChargeDetection::Charged { index, .. } => Some(*index),
            ChargeDetection::NotCharged => None,
        }
    }
}

/// Index of the first sample that is ≥ both neighbours and ≥ `floor`.
/// Plateaus report their first index; the two end samples never qualify.
pub fn first_local_max(values: &[f64], floor: f64) -> Option<usize> {
    (1..values.len().saturating_sub(1))
        .find(|&i| values[i] >= values[i - 1] && values[i] >= values[i + 1] && values[i] >= floor)
}

/// Smallest τᵢ at which ℰ has a local maximum of at least θ_min·E_max.
pub fn detect_tau_c(curve: &ChargingCurve, theta_min: f64) -> Result<ChargeDetection> {
    if curve.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 curve samples, got {}", curve.len())));
    }
    ensure_finite("θ_min", theta_min)?;
    if !(0.0..=1.0).contains(&theta_min) {
        return Err(Error::InvalidArgument(format!("θ_min = {theta_min} outside [0, 1]")));
    }
    Ok(match first_local_max(curve.values(), theta_min * curve.e_max()) {
        Some(index) => ChargeDetection::Charged { index, tau_c: curve.tau(index) },
        None => ChargeDetection::NotCharged,
    })
}

/// Spread of the curve after the charge point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailStats {
    /// Population standard deviation ξ.
    pub xi: f64,
    /// Tail mean Ē.
    pub mean: f64,
    /// Number of tail samples N.
    pub n: usize,
}

/// ξ and Ē over ℰ(τ_c + iΔτ), i = 1..N, with N = ⌊(τ_max − τ_c)/Δτ⌋.
pub fn compute_xi(curve: &ChargingCurve, tau_c_index: usize) -> Result<TailStats> {
    if tau_c_index >= curve.len() {
        return Err(Error::InvalidArgument(format!("τ_c index {tau_c_index} beyond curve of {} samples", curve.len())));
    }
    let tail = &curve.values()[tau_c_index + 1..];
    if tail.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientTail {
            available: tail.len(),
            required: MIN_TAIL_SAMPLES,
            required_tau_max: curve.tau(tau_c_index + MIN_TAIL_SAMPLES),
        });
    }
    let n = tail.len() as f64;
    // shifted by the first sample so a constant tail gives exactly zero
    let pivot = tail[0];
    let shift = tail.iter().map(|v| v - pivot).sum::<f64>() / n;
    let variance = tail.iter().map(|v| (v - pivot - shift).powi(2)).sum::<f64>() / n;
    Ok(TailStats { xi: variance.sqrt(), mean: pivot + shift, n: tail.len() })
}

/// S = 1/((τ_c/T_ref)(ξ/E_max)) with T_ref = 2π/Ω_max. ξ = 0 gives +∞.
pub fn s_metric(tau_c: f64, xi: f64, omega_max: f64, e_max: f64) -> Result<f64> {
    ensure_finite("τ_c", tau_c)?;
    ensure_finite("ξ", xi)?;
    ensure_finite("Ω_max", omega_max)?;
    ensure_finite("E_max", e_max)?;
    if tau_c <= 0.0 {
        return Err(Error::InvalidArgument(format!("τ_c must be positive, got {tau_c}")));
    }
    if xi < 0.0 || omega_max <= 0.0 || e_max <= 0.0 {
        return Err(Error::InvalidArgument(format!("need ξ ≥ 0, Ω_max > 0, E_max > 0, got {xi}, {omega_max}, {e_max}")));
    }
    if xi == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.0 / ((tau_c * omega_max / TAU) * (xi / e_max)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChargingMetrics {
    pub index: usize,
    pub tau_c: f64,
    pub xi: f64,
    pub s: f64,
    pub mean: f64,
    pub n: usize,
}

/// τ_c, ξ and S in one pass. `None` when the curve never charges.
pub fn charging_metrics(curve: &ChargingCurve, theta_min: f64, omega_max: f64) -> Result<Option<ChargingMetrics>> {
    let ChargeDetection::Charged { index, tau_c } = detect_tau_c(curve, theta_min)? else {
        return Ok(None);
    };
    let tail = compute_xi(curve, index)?;
    let s = s_metric(tau_c, tail.xi, omega_max, curve.e_max())?;
    Ok(Some(ChargingMetrics { index, tau_c, xi: tail.xi, s, mean: tail.mean, n: tail.n }))
}

/// Average drive cost Σ_τ and the resulting efficiency μ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoReport {
    /// Σ_τ = (1/τ)∫‖H_int‖ dt, rad/s.
    pub sigma_tau: f64,
    /// Σ_abs = ω_ge + ω_ef.
    pub sigma_abs: f64,
    /// Σ_total = Σ_abs + Σ_τ.
    pub sigma_total: f64,
    /// μ = Σ_abs/Σ_total.
    pub mu: f64,
}

/// Time-averaged Hilbert–Schmidt norm of the drive (composite Simpson,
/// 2001 nodes) and the efficiency at the given level structure.
pub fn thermo_cost<D: Drive + ?Sized>(drive: &D, levels: &LevelEnergies) -> Result<ThermoReport> {
    let tau = drive.duration();
    ensure_finite("τ", tau)?;
    if tau <= 0.0 {
        return Err(Error::InvalidArgument(format!("drive duration must be positive, got {tau}")));
    }
    let n = THERMO_INTERVALS;
    let h = tau / n as f64;
    let norm_at = |i: usize| {
        let t = if i == n { tau } else { i as f64 * h };
        hs_norm(&interaction_hamiltonian_unchecked(&drive.sample(t), 0.0))
    };
    let mut acc = norm_at(0) + norm_at(n);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * norm_at(i);
    }
    let sigma_tau = acc * h / 3.0 / tau;
    let sigma_abs = levels.omega_ge() + levels.omega_ef();
    let sigma_total = sigma_abs + sigma_tau;
    Ok(ThermoReport { sigma_tau, sigma_abs, sigma_total, mu: sigma_abs / sigma_total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{ConstantDrive, Constraint, EnvelopeSpec};
    use crate::units;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn curve(values: &[f64]) -> ChargingCurve {
        ChargingCurve::new(1e-9, values.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn qsl_curve_charges_at_quarter_period() {
        // ℰ(τ) = E_max sin²(Ω_max τ) on a 1 ns grid
        let omega = units::mhz(10.0);
        let values: Vec<f64> = (0..=400).map(|i| (omega * i as f64 * 1e-9).sin().powi(2)).collect();
        let c = ChargingCurve::new(1e-9, values, 1.0).unwrap();
        let detection = detect_tau_c(&c, DEFAULT_THETA_MIN).unwrap();
        assert_eq!(detection.index(), Some(25));
        assert_relative_eq!(detection.tau_c().unwrap(), 25e-9, max_relative = 1e-12);
    }

    #[test]
    fn increasing_curve_is_not_charged() {
        let c = curve(&[0.0, 0.2, 0.5, 0.8, 0.95]);
        assert_eq!(detect_tau_c(&c, 0.8).unwrap(), ChargeDetection::NotCharged);
        // final plateau edge qualifies
        let c = curve(&[0.0, 0.2, 0.5, 0.95, 0.95]);
        assert_eq!(detect_tau_c(&c, 0.8).unwrap().index(), Some(3));
    }

    #[test]
    fn threshold_skips_early_ripples() {
        let c = curve(&[0.0, 0.3, 0.2, 0.9, 0.7, 0.95, 0.9]);
        assert_eq!(detect_tau_c(&c, 0.8).unwrap().index(), Some(3));
        assert_eq!(detect_tau_c(&c, 0.0).unwrap().index(), Some(1));
    }

    #[test]
    fn plateau_reports_first_index() {
        let c = curve(&[0.0, 0.9, 0.9, 0.9, 0.5]);
        assert_eq!(detect_tau_c(&c, 0.5).unwrap().index(), Some(1));
    }

    #[test]
    fn detection_rejects_bad_input() {
        assert!(detect_tau_c(&curve(&[0.0, 1.0]), 0.5).is_err());
        assert!(detect_tau_c(&curve(&[0.0, 1.0, 0.5]), 1.5).is_err());
        assert!(ChargingCurve::new(1e-9, vec![0.0, 2.0], 1.0).is_err());
        assert!(ChargingCurve::new(0.0, vec![0.0], 1.0).is_err());
    }

    #[test]
    fn xi_examples() {
        let mut values = vec![0.0, 1.0];
        values.extend(std::iter::repeat_n(0.7, 12));
        let stats = compute_xi(&curve(&values), 1).unwrap();
        assert_eq!(stats.xi, 0.0);
        assert_eq!(stats.n, 12);
        assert_relative_eq!(stats.mean, 0.7, max_relative = 1e-15);

        let mut values = vec![0.0, 1.0];
        values.extend((0..20).map(|i| if i % 2 == 0 { 0.9 } else { 0.8 }));
        let stats = compute_xi(&curve(&values), 1).unwrap();
        assert_relative_eq!(stats.xi, 0.05, max_relative = 1e-12);
        assert_relative_eq!(stats.mean, 0.85, max_relative = 1e-12);
    }

    #[test]
    fn short_tail_reports_required_tau_max() {
        let c = curve(&[0.0, 1.0, 0.9, 0.9, 0.9]);
        match compute_xi(&c, 1).unwrap_err() {
            Error::InsufficientTail { available, required, required_tau_max } => {
                assert_eq!((available, required), (3, 10));
                assert_relative_eq!(required_tau_max, 11e-9, max_relative = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn s_metric_normalisation() {
        let omega = units::mhz(10.0);
        let t_ref = units::reference_period(omega);
        assert_relative_eq!(s_metric(t_ref, 2.0, omega, 2.0).unwrap(), 1.0, max_relative = 1e-12);
        let a = s_metric(40e-9, 0.01, omega, 1.0).unwrap();
        let b = s_metric(40e-9, 0.02, omega, 1.0).unwrap();
        assert_relative_eq!(a, 2.0 * b, max_relative = 1e-12);
        assert_eq!(s_metric(40e-9, 0.0, omega, 1.0).unwrap(), f64::INFINITY);
        assert!(s_metric(0.0, 0.1, omega, 1.0).is_err());
        assert!(s_metric(-1e-9, 0.1, omega, 1.0).is_err());
    }

    #[test]
    fn square_sum_cost_is_sqrt2_omega_max() {
        let omega = units::mhz(10.0);
        let levels = LevelEnergies::charging_bias();
        for (eta, tau) in [(0.0, 100e-9), (0.12, 333e-9), (0.7, 1e-6)] {
            let spec = EnvelopeSpec::cd(Constraint::SquareSum, omega, tau, eta, 0.3).unwrap();
            let report = thermo_cost(&spec, &levels).unwrap();
            assert_relative_eq!(report.sigma_tau, 2f64.sqrt() * omega, max_relative = 1e-10);
            assert_relative_eq!(report.mu, report.sigma_abs / report.sigma_total, max_relative = 1e-15);
        }
    }

    #[test]
    fn cycloid_cost_matches_closed_form() {
        // ‖H‖ = Ω_max·sec(x) with x uniform on [−π/4, π/4], whose mean is
        // (4/π)·ln(1 + √2).
        let omega = units::mhz(10.0);
        let spec = EnvelopeSpec::stirap_cyc(omega, 200e-9).unwrap();
        let report = thermo_cost(&spec, &LevelEnergies::charging_bias()).unwrap();
        let closed = omega * 4.0 / std::f64::consts::PI * (1.0 + 2f64.sqrt()).ln();
        assert_relative_eq!(report.sigma_tau, closed, max_relative = 1e-10);
    }

    #[test]
    fn zero_drive_costs_nothing() {
        let report = thermo_cost(&ConstantDrive::idle(1e-7).unwrap(), &LevelEnergies::charging_bias()).unwrap();
        assert_eq!(report.sigma_tau, 0.0);
        assert_eq!(report.mu, 1.0);
    }

    proptest! {
        #[test]
        fn xi_shift_and_scale(values in proptest::collection::vec(0.0..0.5f64, 15..40), shift in 0.0..0.4f64, k in 0.1..2.0f64) {
            let base = curve(&values);
            let shifted = curve(&values.iter().map(|v| v + shift).collect::<Vec<_>>());
            let scaled = curve(&values.iter().map(|v| v * k).collect::<Vec<_>>());
            let x0 = compute_xi(&base, 2).unwrap().xi;
            prop_assert!((compute_xi(&shifted, 2).unwrap().xi - x0).abs() < 1e-12);
            prop_assert!((compute_xi(&scaled, 2).unwrap().xi - k * x0).abs() < 1e-12);
        }

        #[test]
        fn detection_is_scale_invariant(values in proptest::collection::vec(0.0..1.0f64, 3..40), k in 0.01..1.0f64) {
            let a = ChargingCurve::new(1e-9, values.clone(), 1.0).unwrap();
            let b = ChargingCurve::new(1e-9, values.iter().map(|v| v * k).collect(), k).unwrap();
            prop_assert_eq!(detect_tau_c(&a, 0.5).unwrap().index(), detect_tau_c(&b, 0.5).unwrap().index());
        }

        #[test]
        fn efficiency_decreases_with_cost(a in 0.1..50.0f64, b in 0.1..50.0f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let levels = LevelEnergies::charging_bias();
            let mu = |mhz: f64| thermo_cost(&EnvelopeSpec::qsl_square(units::mhz(mhz), 1e-7).unwrap(), &levels).unwrap().mu;
            prop_assert_eq!(a < b, mu(a) > mu(b));
        }
    }
}
