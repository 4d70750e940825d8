//! Drive envelopes: adiabatic (tri and cycloid) STIRAP pairs, their
//! norm-constrained counterdiabatic variants, and the direct g–f pulse.
//!
//! All envelopes are evaluated on demand from closed forms; nothing is
//! tabulated.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::qutrit::DriveSample;

/// Anything that yields drive amplitudes over a finite window [0, duration].
pub trait Drive: Sync {
    /// Amplitudes at time `t`. Callers stay within [0, duration]; values
    /// just outside due to round-off are clamped.
    fn sample(&self, t: f64) -> DriveSample;

    fn duration(&self) -> f64;

    /// Upper bound on any single amplitude, used to size integration steps.
    fn peak_amplitude(&self) -> f64;
}

/// Which sum the amplitudes are held to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    /// Ω_ge² + Ω_ef² + Ω_gf² = Ω_max².
    SquareSum,
    /// Ω_ge + Ω_ef + Ω_gf = Ω_max.
    LinearSum,
}

impl Constraint {
    /// The counterdiabatic pulse family that lives under this constraint.
    pub fn cd_kind(self) -> EnvelopeKind {
        match self {
            Constraint::SquareSum => EnvelopeKind::CdSquareSum,
            Constraint::LinearSum => EnvelopeKind::CdLinearSum,
        }
    }

    /// The plain STIRAP envelope that the CD family reduces to at η = 0.
    pub fn stirap_kind(self) -> EnvelopeKind {
        match self {
            Constraint::SquareSum => EnvelopeKind::StirapTri,
            Constraint::LinearSum => EnvelopeKind::StirapCyc,
        }
    }

    pub fn max_eta(self) -> f64 {
        match self {
            Constraint::SquareSum => std::f64::consts::SQRT_2,
            Constraint::LinearSum => 2.0,
        }
    }

    /// How far `drive` is from saturating the budget, relative to Ω_max.
    pub fn relative_residual(self, drive: &DriveSample, omega_max: f64) -> f64 {
        match self {
            Constraint::SquareSum => (drive.sum_of_squares() - omega_max * omega_max).abs() / (omega_max * omega_max),
            Constraint::LinearSum => (drive.sum() - omega_max).abs() / omega_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeKind {
    StirapTri,
    StirapCyc,
    CdSquareSum,
    CdLinearSum,
    QslSquare,
}

impl EnvelopeKind {
    pub fn constraint(self) -> Constraint {
        match self {
            EnvelopeKind::StirapTri | EnvelopeKind::CdSquareSum | EnvelopeKind::QslSquare => Constraint::SquareSum,
            EnvelopeKind::StirapCyc | EnvelopeKind::CdLinearSum => Constraint::LinearSum,
        }
    }

    pub fn uses_eta(self) -> bool {
        matches!(self, EnvelopeKind::CdSquareSum | EnvelopeKind::CdLinearSum)
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvelopeKind::StirapTri => "stirap_tri",
            EnvelopeKind::StirapCyc => "stirap_cyc",
            EnvelopeKind::CdSquareSum => "cd_square_sum",
            EnvelopeKind::CdLinearSum => "cd_linear_sum",
            EnvelopeKind::QslSquare => "qsl_square",
        }
    }
}

/// Offset between the carrier phase of the g–f tone and the phase of the
/// g–f entry of the rotating-frame Hamiltonian.
///
/// With sine carriers every resonant tone picks up a factor −i under the
/// rotating-wave approximation. Gauging the g–e and e–f entries back to
/// real values with diag(1, i, −1) leaves the g–f entry as Ω_gf·e^{i(φ+π/2)}.
pub const CARRIER_PHASE_OFFSET: f64 = FRAC_PI_2;

/// Rotating-frame phase of the g–f matrix element for carrier phase φ.
pub fn matrix_phase(carrier_phase: f64) -> f64 {
    carrier_phase + CARRIER_PHASE_OFFSET
}

/// A complete protocol: envelope family, budget Ω_max (rad/s), duration τ
/// (s), CD weight η and the carrier phase φ (rad) of the g–f tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub kind: EnvelopeKind,
    pub omega_max: f64,
    pub tau: f64,
    pub eta: f64,
    pub phase: f64,
}

impl EnvelopeSpec {
    pub fn new(kind: EnvelopeKind, omega_max: f64, tau: f64, eta: f64, phase: f64) -> Result<Self> {
        let spec = Self { kind, omega_max, tau, eta, phase };
        spec.validate()?;
        Ok(spec)
    }

    pub fn stirap_tri(omega_max: f64, tau: f64) -> Result<Self> {
        Self::new(EnvelopeKind::StirapTri, omega_max, tau, 0.0, 0.0)
    }

    pub fn stirap_cyc(omega_max: f64, tau: f64) -> Result<Self> {
        Self::new(EnvelopeKind::StirapCyc, omega_max, tau, 0.0, 0.0)
    }

    pub fn cd(constraint: Constraint, omega_max: f64, tau: f64, eta: f64, phase: f64) -> Result<Self> {
        Self::new(constraint.cd_kind(), omega_max, tau, eta, phase)
    }

    pub fn qsl_square(omega_max: f64, tau: f64) -> Result<Self> {
        Self::new(EnvelopeKind::QslSquare, omega_max, tau, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("Ω_max", self.omega_max)?;
        ensure_finite("τ", self.tau)?;
        ensure_finite("η", self.eta)?;
        ensure_finite("φ", self.phase)?;
        if self.omega_max <= 0.0 {
            return Err(Error::InvalidArgument(format!("Ω_max must be positive, got {}", self.omega_max)));
        }
        if self.tau <= 0.0 {
            return Err(Error::InvalidArgument(format!("τ must be positive, got {}", self.tau)));
        }
        if self.kind.uses_eta() {
            let max = self.kind.constraint().max_eta();
            if !(0.0..=max).contains(&self.eta) {
                return Err(Error::InvalidArgument(format!(
                    "η = {} outside [0, {max}] for {}",
                    self.eta,
                    self.kind.name()
                )));
            }
        }
        Ok(())
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.kind, self.omega_max, tau, self.eta, self.phase)
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        Self::new(self.kind, self.omega_max, self.tau, eta, self.phase)
    }

    pub fn with_phase(&self, phase: f64) -> Result<Self> {
        Self::new(self.kind, self.omega_max, self.tau, self.eta, phase)
    }

    /// Amplitudes at `t`; `t` must lie in [0, τ].
    pub fn sample_at(&self, t: f64) -> Result<DriveSample> {
        sample_envelopes(self, t)
    }
}

impl Drive for EnvelopeSpec {
    fn sample(&self, t: f64) -> DriveSample {
        sample_unchecked(self, t.clamp(0.0, self.tau))
    }

    fn duration(&self) -> f64 {
        self.tau
    }

    fn peak_amplitude(&self) -> f64 {
        self.omega_max
    }
}

/// A drive held at fixed amplitudes for a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDrive {
    pub sample: DriveSample,
    pub duration: f64,
}

impl ConstantDrive {
    pub fn new(sample: DriveSample, duration: f64) -> Result<Self> {
        sample.validate()?;
        ensure_finite("duration", duration)?;
        if duration <= 0.0 {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {duration}")));
        }
        Ok(Self { sample, duration })
    }

    /// No drive at all for `duration`; free evolution or pure decay.
    pub fn idle(duration: f64) -> Result<Self> {
        Self::new(DriveSample::zero(), duration)
    }
}

impl Drive for ConstantDrive {
    fn sample(&self, _t: f64) -> DriveSample {
        self.sample
    }

    fn duration(&self) -> f64 {
        self.duration
    }

    fn peak_amplitude(&self) -> f64 {
        self.sample.omega_ge.max(self.sample.omega_ef).max(self.sample.omega_gf)
    }
}

fn check_window(t: f64, tau: f64, omega_max: f64) -> Result<()> {
    ensure_finite("t", t)?;
    ensure_finite("τ", tau)?;
    ensure_finite("Ω_max", omega_max)?;
    if tau <= 0.0 || omega_max <= 0.0 {
        return Err(Error::InvalidArgument(format!("need τ > 0 and Ω_max > 0, got τ = {tau}, Ω_max = {omega_max}")));
    }
    if !(0.0..=tau).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} outside [0, τ = {tau}]")));
    }
    Ok(())
}

/// sin(πt/2τ) and cos(πt/2τ), the latter evaluated as sin(π(τ−t)/2τ) so
/// both vanish exactly at their respective endpoints.
#[inline]
fn quarter_wave(t: f64, tau: f64) -> (f64, f64) {
    ((FRAC_PI_2 * t / tau).sin(), (FRAC_PI_2 * (tau - t) / tau).sin())
}

#[inline]
fn tri_unchecked(t: f64, tau: f64, omega_max: f64) -> (f64, f64) {
    let (s, c) = quarter_wave(t, tau);
    (omega_max * s, omega_max * c)
}

#[inline]
fn cyc_unchecked(t: f64, tau: f64, omega_max: f64) -> (f64, f64) {
    // (1 − tan(π/4 − u))/2 = sin u / (sin u + cos u) with u = πt/2τ.
    let (s, c) = quarter_wave(t, tau);
    let ge = omega_max * s / (s + c);
    (ge, omega_max - ge)
}

/// Sine/cosine pair with Ω_ge(0) = Ω_ef(τ) = 0 and Ω_ge² + Ω_ef² = Ω_max².
pub fn envelope_tri(t: f64, tau: f64, omega_max: f64) -> Result<(f64, f64)> {
    check_window(t, tau, omega_max)?;
    Ok(tri_unchecked(t, tau, omega_max))
}

/// Cycloid-arc pair with Ω_ge + Ω_ef = Ω_max.
pub fn envelope_cyc(t: f64, tau: f64, omega_max: f64) -> Result<(f64, f64)> {
    check_window(t, tau, omega_max)?;
    Ok(cyc_unchecked(t, tau, omega_max))
}

/// All three amplitudes of `spec` at time `t`.
pub fn sample_envelopes(spec: &EnvelopeSpec, t: f64) -> Result<DriveSample> {
    spec.validate()?;
    check_window(t, spec.tau, spec.omega_max)?;
    Ok(sample_unchecked(spec, t))
}

#[inline]
fn sample_unchecked(spec: &EnvelopeSpec, t: f64) -> DriveSample {
    let (tau, omega_max) = (spec.tau, spec.omega_max);
    let (omega_ge, omega_ef, omega_gf) = match spec.kind {
        EnvelopeKind::StirapTri => {
            let (ge, ef) = tri_unchecked(t, tau, omega_max);
            (ge, ef, 0.0)
        }
        EnvelopeKind::StirapCyc => {
            let (ge, ef) = cyc_unchecked(t, tau, omega_max);
            (ge, ef, 0.0)
        }
        EnvelopeKind::CdSquareSum => {
            let scale = (1.0 - 0.5 * spec.eta * spec.eta).sqrt();
            let (ge, ef) = tri_unchecked(t, tau, omega_max);
            (scale * ge, scale * ef, std::f64::consts::FRAC_1_SQRT_2 * spec.eta * omega_max)
        }
        EnvelopeKind::CdLinearSum => {
            let scale = 1.0 - 0.5 * spec.eta;
            let (ge, ef) = cyc_unchecked(t, tau, omega_max);
            (scale * ge, scale * ef, 0.5 * spec.eta * omega_max)
        }
        EnvelopeKind::QslSquare => (0.0, 0.0, omega_max),
    };
    DriveSample { omega_ge, omega_ef, omega_gf, phase: matrix_phase(spec.phase) }
}
