//! Three-level states, the rotating-frame drive Hamiltonian and ergotropy.
//!
//! Basis order is fixed as (|g⟩, |e⟩, |f⟩) = indices (0, 1, 2). The ground
//! energy is pinned at zero so [`LevelEnergies`] only stores E_e and E_f.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::units;

pub type C64 = Complex64;

/// A 3×3 complex operator in the (g, e, f) basis.
pub type Operator3 = Matrix3<C64>;

pub const G: usize = 0;
pub const E: usize = 1;
pub const F: usize = 2;

const NORM_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-8;

/// Bare level energies in rad/s with E_g = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelEnergies {
    e_e: f64,
    e_f: f64,
}

impl LevelEnergies {
    pub fn new(e_e: f64, e_f: f64) -> Result<Self> {
        ensure_finite("E_e", e_e)?;
        ensure_finite("E_f", e_f)?;
        if !(0.0 < e_e && e_e < e_f) {
            return Err(Error::InvalidArgument(format!(
                "level energies must satisfy 0 = E_g < E_e < E_f, got E_e = {e_e}, E_f = {e_f}"
            )));
        }
        Ok(Self { e_e, e_f })
    }

    /// Build from linear transition frequencies ω_ge/2π and ω_gf/2π in GHz.
    pub fn from_transitions_ghz(ge: f64, gf: f64) -> Result<Self> {
        Self::new(units::ghz(ge), units::ghz(gf))
    }

    /// Levels at the flux sweet spot Φ_ext = 0.5 Φ₀.
    pub fn sweet_spot() -> Self {
        Self::from_transitions_ghz(units::SWEET_SPOT_GE_GHZ, units::SWEET_SPOT_GF_GHZ)
            .expect("tabulated levels are ordered")
    }

    /// Levels at the charging bias Φ_ext = 0.496 Φ₀.
    pub fn charging_bias() -> Self {
        Self::from_transitions_ghz(units::CHARGING_BIAS_GE_GHZ, units::CHARGING_BIAS_GF_GHZ)
            .expect("tabulated levels are ordered")
    }

    pub fn e_g(&self) -> f64 {
        0.0
    }

    pub fn e_e(&self) -> f64 {
        self.e_e
    }

    pub fn e_f(&self) -> f64 {
        self.e_f
    }

    pub fn omega_ge(&self) -> f64 {
        self.e_e
    }

    pub fn omega_ef(&self) -> f64 {
        self.e_f - self.e_e
    }

    pub fn omega_gf(&self) -> f64 {
        self.e_f
    }

    /// (E_f − E_e) − (E_e − E_g).
    pub fn anharmonicity(&self) -> f64 {
        self.omega_ef() - self.omega_ge()
    }

    /// Largest storable ergotropy, E_f − E_g.
    pub fn e_max(&self) -> f64 {
        self.e_f
    }

    /// H₀ = diag(E_g, E_e, E_f).
    pub fn hamiltonian(&self) -> Operator3 {
        Operator3::from_diagonal(&Vector3::new(
            C64::new(0.0, 0.0),
            C64::new(self.e_e, 0.0),
            C64::new(self.e_f, 0.0),
        ))
    }
}

/// Normalised pure state with amplitudes on |g⟩, |e⟩, |f⟩.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState3(Vector3<C64>);

impl PureState3 {
    pub fn new(g: C64, e: C64, f: C64) -> Result<Self> {
        Self::from_vector(Vector3::new(g, e, f))
    }

    pub fn from_vector(v: Vector3<C64>) -> Result<Self> {
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("state amplitude".into()));
        }
        let norm = v.norm();
        if (norm * norm - 1.0).abs() > NORM_TOL {
            return Err(Error::InvalidState(format!(
                "amplitudes are not normalised: |ψ|² = {}",
                norm * norm
            )));
        }
        Ok(Self(v))
    }

    /// Normalise an arbitrary nonzero vector.
    pub fn normalized(v: Vector3<C64>) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidState("cannot normalise a zero vector".into()));
        }
        Ok(Self(v / C64::new(norm, 0.0)))
    }

    pub(crate) fn from_vector_unchecked(v: Vector3<C64>) -> Self {
        Self(v)
    }

    pub fn basis(level: usize) -> Self {
        let mut v = Vector3::zeros();
        v[level] = C64::new(1.0, 0.0);
        Self(v)
    }

    pub fn ground() -> Self {
        Self::basis(G)
    }

    pub fn excited() -> Self {
        Self::basis(E)
    }

    pub fn second_excited() -> Self {
        Self::basis(F)
    }

    pub fn vector(&self) -> &Vector3<C64> {
        &self.0
    }

    /// Amplitude c on |g⟩.
    pub fn g(&self) -> C64 {
        self.0[G]
    }

    /// Amplitude b on |e⟩.
    pub fn e(&self) -> C64 {
        self.0[E]
    }

    /// Amplitude a on |f⟩.
    pub fn f(&self) -> C64 {
        self.0[F]
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.norm_squared()
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[G].norm_sqr(), self.0[E].norm_sqr(), self.0[F].norm_sqr()]
    }

    /// ⟨self|other⟩.
    pub fn overlap(&self, other: &PureState3) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn to_density(&self) -> DensityMatrix3 {
        DensityMatrix3(self.0 * self.0.adjoint())
    }
}

/// A 3×3 density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(Operator3);

impl DensityMatrix3 {
    pub fn new(m: Operator3) -> Result<Self> {
        Self::validated(m, POSITIVITY_TOL)
    }

    /// Validate with a caller-supplied positivity tolerance.
    pub fn validated(m: Operator3, positivity_tol: f64) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("density matrix entry".into()));
        }
        let skew = (m - m.adjoint()).iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        if skew > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("density matrix not Hermitian (|ρ − ρ†| = {skew:e})")));
        }
        let trace = m.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!("density matrix trace {trace} ≠ 1")));
        }
        let rho = Self(m);
        let min_eig = rho.min_eigenvalue();
        if min_eig < -positivity_tol {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min_eig:e} < 0")));
        }
        Ok(rho)
    }

    pub fn from_populations(p: [f64; 3]) -> Result<Self> {
        Self::new(Operator3::from_diagonal(&Vector3::new(
            C64::new(p[0], 0.0),
            C64::new(p[1], 0.0),
            C64::new(p[2], 0.0),
        )))
    }

    pub fn maximally_mixed() -> Self {
        Self(Operator3::identity() / C64::new(3.0, 0.0))
    }

    pub fn matrix(&self) -> &Operator3 {
        &self.0
    }

    pub fn populations(&self) -> [f64; 3] {
        [self.0[(G, G)].re, self.0[(E, E)].re, self.0[(F, F)].re]
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let eig = SymmetricEigen::new(hermitian_part(&self.0));
        let mut values = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        values.sort_by(f64::total_cmp);
        values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// λ ρ λ†.
    pub fn conjugated(&self, u: &Operator3) -> DensityMatrix3 {
        DensityMatrix3(u * self.0 * u.adjoint())
    }
}

fn hermitian_part(m: &Operator3) -> Operator3 {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Instantaneous drive amplitudes (rad/s) and the g–f drive phase (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveSample {
    pub omega_ge: f64,
    pub omega_ef: f64,
    pub omega_gf: f64,
    pub phase: f64,
}

impl DriveSample {
    pub fn new(omega_ge: f64, omega_ef: f64, omega_gf: f64, phase: f64) -> Result<Self> {
        let sample = Self { omega_ge, omega_ef, omega_gf, phase };
        sample.validate()?;
        Ok(sample)
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_finite("Ω_ge", self.omega_ge)?;
        ensure_finite("Ω_ef", self.omega_ef)?;
        ensure_finite("Ω_gf", self.omega_gf)?;
        ensure_finite("φ", self.phase)?;
        if self.omega_ge < 0.0 || self.omega_ef < 0.0 || self.omega_gf < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "drive amplitudes must be nonnegative, got ({}, {}, {})",
                self.omega_ge, self.omega_ef, self.omega_gf
            )));
        }
        Ok(())
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.omega_ge * self.omega_ge + self.omega_ef * self.omega_ef + self.omega_gf * self.omega_gf
    }

    pub fn sum(&self) -> f64 {
        self.omega_ge + self.omega_ef + self.omega_gf
    }
}

/// Rotating-frame interaction Hamiltonian with an optional detuning Δ on |f⟩⟨f|.
pub fn interaction_hamiltonian(drive: &DriveSample, detuning: f64) -> Result<Operator3> {
    drive.validate()?;
    ensure_finite("Δ", detuning)?;
    Ok(interaction_hamiltonian_unchecked(drive, detuning))
}

#[inline]
pub(crate) fn interaction_hamiltonian_unchecked(drive: &DriveSample, detuning: f64) -> Operator3 {
    let zero = C64::new(0.0, 0.0);
    let ge = C64::new(drive.omega_ge, 0.0);
    let ef = C64::new(drive.omega_ef, 0.0);
    let gf = C64::from_polar(drive.omega_gf, drive.phase);
    Operator3::new(
        zero, ge, gf,
        ge, zero, ef,
        gf.conj(), ef, C64::new(detuning, 0.0),
    )
}

/// Work stored relative to the ground state, Tr{H₀ρ} − E_g.
pub fn ergotropy(rho: &DensityMatrix3, levels: &LevelEnergies) -> f64 {
    let [_, p_e, p_f] = rho.populations();
    p_e * levels.e_e() + p_f * levels.e_f()
}

/// The zero-energy eigenstate ∝ Ω_ef|g⟩ − Ω_ge|f⟩ of the two-tone Hamiltonian.
///
/// It coincides with |g⟩ while only the e–f tone is on and with −|f⟩ once
/// only the g–e tone remains, which is what carries STIRAP from g to f.
pub fn dark_state(omega_ge: f64, omega_ef: f64) -> Result<PureState3> {
    ensure_finite("Ω_ge", omega_ge)?;
    ensure_finite("Ω_ef", omega_ef)?;
    let norm = omega_ge.hypot(omega_ef);
    if norm == 0.0 {
        return Err(Error::Degenerate("dark state undefined when Ω_ge = Ω_ef = 0".into()));
    }
    Ok(PureState3(Vector3::new(
        C64::new(omega_ef / norm, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-omega_ge / norm, 0.0),
    )))
}

/// Hilbert–Schmidt norm √tr(H†H); equals √tr(H²) for Hermitian input.
pub fn hs_norm(h: &Operator3) -> f64 {
    (h.adjoint() * h).trace().re.max(0.0).sqrt()
}

/// Uhlmann fidelity (tr√(√ρ σ √ρ))².
pub fn fidelity(rho: &DensityMatrix3, sigma: &DensityMatrix3) -> f64 {
    let sqrt_rho = psd_sqrt(rho.matrix());
    let inner = sqrt_rho * sigma.matrix() * sqrt_rho;
    let eig = SymmetricEigen::new(hermitian_part(&inner));
    let root_sum: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    (root_sum * root_sum).min(1.0)
}

/// Square root of a Hermitian positive semidefinite matrix; negative
/// eigenvalues from round-off are clipped to zero.
pub fn psd_sqrt(m: &Operator3) -> Operator3 {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let roots = eig.eigenvalues.map(|l| C64::new(l.max(0.0).sqrt(), 0.0));
    let v = eig.eigenvectors;
    v * Operator3::from_diagonal(&roots) * v.adjoint()
}
