//! Level structure of the capacitively shunted flux qubit in its 1D
//! reduction H_m = P²/2M_m + E_J(−2 cos φ + α cos(2πf_b + 2φ)),
//! diagonalised in the 2π-periodic plane-wave basis e^{inφ}, n = −K..K.
//!
//! Everything is expressed in rad/s (ħ = 1). In this basis the kinetic
//! term is k·n² with k = ħ/(2M_m), cos φ couples n ↔ n ± 1 and the α term
//! couples n ↔ n ± 2 with the flux-dependent phase e^{±i2πf_b}.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::qutrit::C64;
use crate::units::{FLUX_QUANTUM, HBAR};

/// Default plane-wave basis size.
pub const DEFAULT_BASIS: usize = 401;
/// Smallest basis accepted by the builder.
pub const MIN_BASIS: usize = 201;
/// Relative change of ω_ge under M → 2M + 1 that counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Josephson energy, rad/s.
    pub e_j: f64,
    /// Junction capacitance, F.
    pub c_j: f64,
    /// Shunt capacitance, F.
    pub c_sh: f64,
    /// Small-to-large junction ratio.
    pub alpha: f64,
    /// External flux in units of Φ₀.
    pub flux: f64,
}

impl CircuitParams {
    pub fn new(e_j: f64, c_j: f64, c_sh: f64, alpha: f64, flux: f64) -> Result<Self> {
        let params = Self { e_j, c_j, c_sh, alpha, flux };
        params.validate()?;
        Ok(params)
    }

    /// E_J = Φ₀I_c/2π converted to rad/s.
    pub fn from_critical_current(i_c: f64, c_j: f64, c_sh: f64, alpha: f64, flux: f64) -> Result<Self> {
        ensure_finite("I_c", i_c)?;
        if i_c <= 0.0 {
            return Err(Error::InvalidArgument(format!("critical current must be positive, got {i_c}")));
        }
        Self::new(FLUX_QUANTUM * i_c / TAU / HBAR, c_j, c_sh, alpha, flux)
    }

    /// C_J = 9 fF, C_sh = 45 fF, α = 0.471, I_c = 88 nA.
    pub fn reference_device(flux: f64) -> Result<Self> {
        Self::from_critical_current(88e-9, 9e-15, 45e-15, 0.471, flux)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("E_J", self.e_j), ("C_J", self.c_j), ("C_sh", self.c_sh), ("α", self.alpha), ("f", self.flux)] {
            ensure_finite(name, v)?;
        }
        if self.e_j <= 0.0 || self.c_j <= 0.0 || self.c_sh <= 0.0 {
            return Err(Error::InvalidArgument(format!("E_J, C_J and C_sh must be positive, got {self:?}")));
        }
        if self.alpha < 0.0 {
            return Err(Error::InvalidArgument(format!("α must be non-negative, got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn with_flux(&self, flux: f64) -> Self {
        Self { flux, ..*self }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..*self }
    }

    /// 0 < α < 0.5, where the sweet-spot potential has a single well.
    pub fn in_single_well_region(&self) -> bool {
        self.alpha > 0.0 && self.alpha < 0.5
    }

    pub fn beta(&self) -> f64 {
        self.c_sh / self.c_j
    }

    /// f_b = f − 1/2.
    pub fn flux_bias(&self) -> f64 {
        self.flux - 0.5
    }

    /// M_m = 2(Φ₀/2π)²C_J(1 + 2α + 2β), kg·m² equivalent.
    pub fn mass_minus(&self) -> f64 {
        2.0 * (FLUX_QUANTUM / TAU).powi(2) * self.c_j * (1.0 + 2.0 * self.alpha + 2.0 * self.beta())
    }

    /// M_p = 2(Φ₀/2π)²C_J.
    pub fn mass_plus(&self) -> f64 {
        2.0 * (FLUX_QUANTUM / TAU).powi(2) * self.c_j
    }

    /// Kinetic prefactor k = ħ/(2M_m) in rad/s.
    pub fn kinetic(&self) -> f64 {
        HBAR / (2.0 * self.mass_minus())
    }

    /// U_m(φ) in rad/s.
    pub fn potential(&self, phi: f64) -> f64 {
        self.potential_derivatives(phi)[0]
    }

    /// [U, U′, U″, U‴, U⁗] at φ.
    pub fn potential_derivatives(&self, phi: f64) -> [f64; 5] {
        let th = TAU * self.flux_bias() + 2.0 * phi;
        let (s1, c1) = phi.sin_cos();
        let (s2, c2) = th.sin_cos();
        let (ej, a) = (self.e_j, self.alpha);
        [
            ej * (-2.0 * c1 + a * c2),
            ej * (2.0 * s1 - 2.0 * a * s2),
            ej * (2.0 * c1 - 4.0 * a * c2),
            ej * (-2.0 * s1 + 8.0 * a * s2),
            ej * (-2.0 * c1 + 16.0 * a * c2),
        ]
    }
}

fn check_basis(m: usize) -> Result<usize> {
    if m.is_multiple_of(2) || m < MIN_BASIS {
        return Err(Error::InvalidArgument(format!("basis size must be odd and ≥ {MIN_BASIS}, got {m}")));
    }
    Ok(m / 2)
}

/// Momentum label of basis index i.
fn momentum(i: usize, cutoff: usize) -> f64 {
    i as f64 - cutoff as f64
}

/// H_m in the plane-wave basis of size `m` (odd, ≥ 201).
pub fn build_reduced_hamiltonian(params: &CircuitParams, m: usize) -> Result<DMatrix<C64>> {
    params.validate()?;
    let cutoff = check_basis(m)?;
    let k = params.kinetic();
    let hop = C64::new(-params.e_j, 0.0);
    let pair = C64::from_polar(0.5 * params.alpha * params.e_j, TAU * params.flux_bias());
    let mut h = DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        h[(i, i)] = C64::new(k * momentum(i, cutoff).powi(2), 0.0);
        if i + 1 < m {
            h[(i + 1, i)] = hop;
            h[(i, i + 1)] = hop;
        }
        if i + 2 < m {
            // e^{2iφ} raises n by two
            h[(i + 2, i)] = pair;
            h[(i, i + 2)] = pair.conj();
        }
    }
    Ok(h)
}

/// D = ∂U_m/∂f_b = −2παE_J sin(2πf_b + 2φ) in the same basis.
pub fn drive_operator(params: &CircuitParams, m: usize) -> Result<DMatrix<C64>> {
    params.validate()?;
    check_basis(m)?;
    // −2παE_J·(e^{iθ} − e^{−iθ})/(2i) = iπαE_J(e^{iθ} − e^{−iθ})
    let up = C64::new(0.0, PI * params.alpha * params.e_j) * C64::from_polar(1.0, TAU * params.flux_bias());
    let mut d = DMatrix::<C64>::zeros(m, m);
    for i in 0..m.saturating_sub(2) {
        d[(i + 2, i)] = up;
        d[(i, i + 2)] = up.conj();
    }
    Ok(d)
}

/// Charge operator n = −i∂/∂φ (diagonal).
pub fn charge_operator(m: usize) -> Result<DMatrix<C64>> {
    let cutoff = check_basis(m)?;
    Ok(DMatrix::from_diagonal(&DVector::from_fn(m, |i, _| C64::new(momentum(i, cutoff), 0.0))))
}

/// Three lowest eigenpairs of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct LowestLevels {
    pub energies: [f64; 3],
    /// Columns are the eigenvectors of `energies`.
    pub vectors: DMatrix<C64>,
}

impl LowestLevels {
    /// |⟨i|op|j⟩| for level indices i, j ∈ {0, 1, 2}.
    pub fn matrix_element(&self, op: &DMatrix<C64>, i: usize, j: usize) -> f64 {
        let bra = self.vectors.column(i);
        let ket = op * self.vectors.column(j);
        bra.dotc(&ket).norm()
    }
}

pub fn solve_levels(h: &DMatrix<C64>) -> Result<LowestLevels> {
    let n = h.nrows();
    if n < 3 || h.ncols() != n {
        return Err(Error::InvalidArgument(format!("need a square matrix of size ≥ 3, got {}×{}", n, h.ncols())));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("Hamiltonian entries".into()));
    }
    let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if (h - h.adjoint()).iter().any(|z| z.norm() > 1e-12 * scale) {
        return Err(Error::InvalidArgument("matrix is not Hermitian".into()));
    }
    let eig = nalgebra::SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]];
    if energies.iter().any(|e| !e.is_finite()) {
        return Err(Error::Numerical("eigen-solver returned non-finite energies".into()));
    }
    let vectors = DMatrix::from_fn(n, 3, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(LowestLevels { energies, vectors })
}

/// Pentadiagonal Hermitian matrix: `diag[i]`, `sub1[i] = H[i+1, i]`,
/// `sub2[i] = H[i+2, i]`.
#[derive(Debug, Clone)]
struct Band {
    diag: Vec<f64>,
    sub1: Vec<C64>,
    sub2: Vec<C64>,
}

impl Band {
    fn hamiltonian(params: &CircuitParams, m: usize) -> Result<Self> {
        let h = build_reduced_hamiltonian(params, m)?;
        Ok(Self {
            diag: (0..m).map(|i| h[(i, i)].re).collect(),
            sub1: (0..m - 1).map(|i| h[(i + 1, i)]).collect(),
            sub2: (0..m - 2).map(|i| h[(i + 2, i)]).collect(),
        })
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let m = self.len();
        let mut y: Vec<C64> = (0..m).map(|i| x[i] * self.diag[i]).collect();
        for i in 0..m - 1 {
            y[i + 1] += self.sub1[i] * x[i];
            y[i] += self.sub1[i].conj() * x[i + 1];
        }
        for i in 0..m - 2 {
            y[i + 2] += self.sub2[i] * x[i];
            y[i] += self.sub2[i].conj() * x[i + 2];
        }
        y
    }

    /// Cholesky factor of H − σI, which must be positive definite.
    fn cholesky(&self, sigma: f64) -> Result<Band> {
        let m = self.len();
        let mut l = Band { diag: vec![0.0; m], sub1: vec![C64::new(0.0, 0.0); m - 1], sub2: vec![C64::new(0.0, 0.0); m - 2] };
        for i in 0..m {
            let mut pivot = self.diag[i] - sigma;
            if i >= 2 {
                l.sub2[i - 2] = self.sub2[i - 2] / l.diag[i - 2];
                pivot -= l.sub2[i - 2].norm_sqr();
            }
            if i >= 1 {
                let mut a = self.sub1[i - 1];
                if i >= 2 {
                    a -= l.sub2[i - 2] * l.sub1[i - 2].conj();
                }
                l.sub1[i - 1] = a / l.diag[i - 1];
                pivot -= l.sub1[i - 1].norm_sqr();
            }
            if pivot <= 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical(format!("shifted Hamiltonian is not positive definite at row {i}")));
            }
            l.diag[i] = pivot.sqrt();
        }
        Ok(l)
    }

    /// Solve L L† x = b with `self` the Cholesky factor L.
    fn solve(&self, b: &[C64]) -> Vec<C64> {
        let m = self.len();
        let mut y = b.to_vec();
        for i in 0..m {
            if i >= 1 {
                let t = self.sub1[i - 1] * y[i - 1];
                y[i] -= t;
            }
            if i >= 2 {
                let t = self.sub2[i - 2] * y[i - 2];
                y[i] -= t;
            }
            y[i] /= self.diag[i];
        }
        for i in (0..m).rev() {
            if i + 1 < m {
                let t = self.sub1[i].conj() * y[i + 1];
                y[i] -= t;
            }
            if i + 2 < m {
                let t = self.sub2[i].conj() * y[i + 2];
                y[i] -= t;
            }
            y[i] /= self.diag[i];
        }
        y
    }
}

const BLOCK: usize = 8;
const MAX_ITERATIONS: usize = 2000;

fn orthonormalize(block: &mut [Vec<C64>]) -> Result<()> {
    for pass in 0..2 {
        for j in 0..block.len() {
            for i in 0..j {
                let proj: C64 = block[i].iter().zip(&block[j]).map(|(a, b)| a.conj() * b).sum();
                let (head, tail) = block.split_at_mut(j);
                for (x, q) in tail[0].iter_mut().zip(&head[i]) {
                    *x -= proj * q;
                }
            }
            let norm = block[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::Numerical(format!("block vector {j} collapsed (pass {pass})")));
            }
            block[j].iter_mut().for_each(|z| *z /= norm);
        }
    }
    Ok(())
}

/// Three lowest eigenpairs of H_m by shift-invert block iteration.
///
/// The shift sits below min U_m, a lower bound on the truncated spectrum,
/// so H − σ is positive definite and the banded Cholesky never pivots.
fn lowest_levels_banded(params: &CircuitParams, m: usize) -> Result<LowestLevels> {
    let band = Band::hamiltonian(params, m)?;
    let cutoff = m / 2;
    let h = TAU / SCAN_POINTS as f64;
    let u_min = (0..SCAN_POINTS).map(|i| params.potential(-PI + i as f64 * h)).fold(f64::INFINITY, f64::min);
    let curvature = params.e_j * (2.0 + 4.0 * params.alpha);
    let sigma = u_min - h * h * curvature / 8.0 - 1e-3 * params.e_j;
    let factor = band.cholesky(sigma)?;
    let scale = params.e_j.max(u_min.abs());

    let mut block: Vec<Vec<C64>> = (0..BLOCK)
        .map(|j| {
            // plane waves n = 0, 1, −1, 2, −2, … as the starting guess
            let n = if j % 2 == 1 { j.div_ceil(2) } else { cutoff - (j / 2).min(cutoff) };
            let idx = if j % 2 == 1 { cutoff + n } else { n };
            let mut v = vec![C64::new(0.0, 0.0); m];
            v[idx] = C64::new(1.0, 0.0);
            v[(idx + 1) % m] = C64::new(0.5, 0.1 * j as f64);
            v
        })
        .collect();
    orthonormalize(&mut block)?;

    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<Vec<C64>> = block.iter().map(|v| factor.solve(v)).collect();
        orthonormalize(&mut next)?;
        let applied: Vec<Vec<C64>> = next.iter().map(|v| band.apply(v)).collect();
        let projected = DMatrix::<C64>::from_fn(BLOCK, BLOCK, |r, c| next[r].iter().zip(&applied[c]).map(|(a, b)| a.conj() * b).sum());
        let projected = (&projected + projected.adjoint()) * C64::new(0.5, 0.0);
        let eig = nalgebra::SymmetricEigen::new(projected);
        let mut order: Vec<usize> = (0..BLOCK).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let rotate = |source: &[Vec<C64>], c: usize| -> Vec<C64> {
            (0..m).map(|r| (0..BLOCK).map(|k| source[k][r] * eig.eigenvectors[(k, order[c])]).sum()).collect()
        };
        block = (0..BLOCK).map(|c| rotate(&next, c)).collect();
        let images: Vec<Vec<C64>> = (0..3).map(|c| rotate(&applied, c)).collect();
        let residual = (0..3)
            .map(|c| {
                let theta = eig.eigenvalues[order[c]];
                images[c].iter().zip(&block[c]).map(|(hx, x)| (hx - x * theta).norm_sqr()).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        if residual <= 1e-12 * scale {
            let energies = [eig.eigenvalues[order[0]], eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]];
            let vectors = DMatrix::from_fn(m, 3, |r, c| block[c][r]);
            return Ok(LowestLevels { energies, vectors });
        }
    }
    Err(Error::Numerical(format!("level solver did not converge in {MAX_ITERATIONS} iterations (M = {m})")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub flux: f64,
    pub e_g: f64,
    pub e_e: f64,
    pub e_f: f64,
    pub omega_ge: f64,
    pub omega_gf: f64,
    /// ω_ef − ω_ge.
    pub anharmonicity: f64,
    /// |⟨g|D|f⟩|, rad/s per unit f_b.
    pub drive_element: f64,
    /// |⟨g|n|f⟩|.
    pub charge_element: f64,
    pub basis_size: usize,
    /// ω_ge moved by less than 1e−8 relative under M → 2M + 1.
    pub converged: bool,
}

fn spectrum_at(params: &CircuitParams, m: usize) -> Result<(LowestLevels, DMatrix<C64>)> {
    Ok((lowest_levels_banded(params, m)?, drive_operator(params, m)?))
}

/// Levels, transition frequencies and g–f matrix elements at basis size
/// `m`, with a convergence check against 2m + 1.
pub fn spectrum(params: &CircuitParams, m: usize) -> Result<SpectrumResult> {
    let (levels, drive) = spectrum_at(params, m)?;
    let [e_g, e_e, e_f] = levels.energies;
    let omega_ge = e_e - e_g;
    let fine = lowest_levels_banded(params, 2 * m + 1)?;
    let fine_ge = fine.energies[1] - fine.energies[0];
    let converged = ((fine_ge - omega_ge) / omega_ge).abs() < CONVERGENCE_TOL;
    Ok(SpectrumResult {
        flux: params.flux,
        e_g,
        e_e,
        e_f,
        omega_ge,
        omega_gf: e_f - e_g,
        anharmonicity: (e_f - e_e) - omega_ge,
        drive_element: levels.matrix_element(&drive, 0, 2),
        charge_element: levels.matrix_element(&charge_operator(m)?, 0, 2),
        basis_size: m,
        converged,
    })
}

/// |⟨g|D|f⟩| at flux f, together with the operator scale 2παE_J used for
/// relative comparisons.
pub fn drive_matrix_element(params: &CircuitParams, flux: f64, m: usize) -> Result<(f64, f64)> {
    let p = params.with_flux(flux);
    let (levels, drive) = spectrum_at(&p, m)?;
    Ok((levels.matrix_element(&drive, 0, 2), TAU * p.alpha * p.e_j))
}

/// Spectra over a list of flux values, evaluated in parallel and returned in
/// input order.
pub fn flux_sweep(params: &CircuitParams, fluxes: &[f64], m: usize) -> Result<Vec<SpectrumResult>> {
    fluxes.par_iter().map(|&f| spectrum(&params.with_flux(f), m)).collect()
}

/// Harmonic-plus-Kerr approximation around the potential minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbativeLevels {
    pub phi_min: f64,
    /// Ω_m⁰ = √(U″/M_m), rad/s.
    pub omega0: f64,
    pub u2: f64,
    pub u4: f64,
    /// (1/(2M_m U″))^{1/4} with ħ = 1.
    pub phi_z: f64,
    /// E_e − E_g ≈ Ω_m⁰.
    pub e_e: f64,
    /// E_f − E_g ≈ 2Ω_m⁰ + U⁗φ_Z⁴/4.
    pub e_f: f64,
    /// |U⁗|φ_Z⁴/(4Ω_m⁰): small means the expansion is trustworthy.
    pub quality_ratio: f64,
    /// Second-order relative shift of ω_ge from the cubic term the
    /// expansion drops, 60g₃²/Ω_m⁰² with g₃ = U‴φ_zpf³/6 and
    /// φ_zpf⁴ = φ_Z⁴/2. Zero at the sweet spot by symmetry.
    pub cubic_ratio: f64,
}

impl PerturbativeLevels {
    /// Predicted relative error of ω_ge: quartic plus neglected cubic shift.
    pub fn predicted_error(&self) -> f64 {
        self.quality_ratio + self.cubic_ratio
    }

    pub fn is_reliable(&self, tol: f64) -> bool {
        self.predicted_error() < tol
    }
}

const SCAN_POINTS: usize = 4096;

/// Locate the minimum of U_m on [−π, π) and expand to fourth order.
pub fn harmonic_quartic_levels(params: &CircuitParams) -> Result<PerturbativeLevels> {
    params.validate()?;
    let h = TAU / SCAN_POINTS as f64;
    let values: Vec<f64> = (0..SCAN_POINTS).map(|i| params.potential(-PI + i as f64 * h)).collect();
    let minima: Vec<usize> = (0..SCAN_POINTS)
        .filter(|&i| {
            let prev = values[(i + SCAN_POINTS - 1) % SCAN_POINTS];
            let next = values[(i + 1) % SCAN_POINTS];
            values[i] < prev && values[i] <= next
        })
        .collect();
    if minima.len() != 1 {
        return Err(Error::Degenerate(format!(
            "potential has {} local minima on [−π, π); double-well regime is outside the expansion",
            minima.len()
        )));
    }
    let phi_min = refine_minimum(params, -PI + minima[0] as f64 * h, h)?;
    let [_, _, u2, u3, u4] = params.potential_derivatives(phi_min);
    if u2 <= 0.0 {
        return Err(Error::Degenerate(format!("U″ = {u2} ≤ 0 at the located minimum")));
    }
    let mass = params.mass_minus() / HBAR;
    let omega0 = (u2 / mass).sqrt();
    let phi_z4 = 1.0 / (2.0 * mass * u2);
    let kerr = u4 * phi_z4 / 4.0;
    let g3 = u3 * (0.5 * phi_z4).powf(0.75) / 6.0;
    Ok(PerturbativeLevels {
        phi_min,
        omega0,
        u2,
        u4,
        phi_z: phi_z4.powf(0.25),
        e_e: omega0,
        e_f: 2.0 * omega0 + kerr,
        quality_ratio: kerr.abs() / omega0,
        cubic_ratio: 60.0 * (g3 / omega0).powi(2),
    })
}

/// Safeguarded Newton on U′ inside [φ₀ − h, φ₀ + h].
fn refine_minimum(params: &CircuitParams, guess: f64, h: f64) -> Result<f64> {
    let (mut lo, mut hi) = (guess - h, guess + h);
    let mut phi = guess;
    for _ in 0..100 {
        let [_, d1, d2, _, _] = params.potential_derivatives(phi);
        if d1 > 0.0 {
            hi = phi;
        } else {
            lo = phi;
        }
        let newton = if d2 > 0.0 { phi - d1 / d2 } else { f64::NAN };
        let next = if newton.is_finite() && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - phi).abs() <= 1e-15 * (1.0 + phi.abs()) {
            return Ok(next);
        }
        phi = next;
    }
    if (hi - lo) < 1e-12 {
        Ok(phi)
    } else {
        Err(Error::Numerical("minimum refinement did not converge".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_device_scales() {
        let p = CircuitParams::reference_device(0.5).unwrap();
        assert_relative_eq!(p.beta(), 5.0, max_relative = 1e-12);
        assert_relative_eq!(p.e_j / TAU / 1e9, 43.7, max_relative = 2e-3);
        assert_relative_eq!(p.kinetic(), 2.265e9, max_relative = 1e-3);
        assert!(p.in_single_well_region());
    }

    #[test]
    fn basis_size_is_checked() {
        let p = CircuitParams::reference_device(0.5).unwrap();
        assert!(build_reduced_hamiltonian(&p, 400).is_err());
        assert!(build_reduced_hamiltonian(&p, 199).is_err());
        assert!(build_reduced_hamiltonian(&p, 201).is_ok());
    }

    #[test]
    fn hamiltonian_is_hermitian_and_parity_symmetric_at_sweet_spot() {
        let p = CircuitParams::reference_device(0.5).unwrap();
        let h = build_reduced_hamiltonian(&p, 201).unwrap();
        assert_eq!(h, h.adjoint());
        let m = h.nrows();
        for i in 0..m {
            for j in 0..m {
                assert_eq!(h[(i, j)], h[(m - 1 - i, m - 1 - j)]);
            }
        }
    }

    #[test]
    fn sweet_spot_parity_rule() {
        let p = CircuitParams::reference_device(0.5).unwrap();
        let s = spectrum(&p, DEFAULT_BASIS).unwrap();
        let scale = TAU * p.alpha * p.e_j;
        assert!(s.drive_element < 1e-10 * scale, "{}", s.drive_element);
        assert!(s.charge_element < 1e-10 * DEFAULT_BASIS as f64);
        assert!(s.anharmonicity > 0.0);
        assert!(s.converged);
        let off = spectrum(&p.with_flux(0.496), DEFAULT_BASIS).unwrap();
        assert!(off.drive_element > 1e-6 * scale);
    }

    #[test]
    fn spectrum_mirror_symmetry() {
        let p = CircuitParams::reference_device(0.497).unwrap();
        let a = spectrum(&p, 201).unwrap();
        let b = spectrum(&p.with_flux(0.503), 201).unwrap();
        assert_relative_eq!(a.omega_ge, b.omega_ge, max_relative = 1e-10);
        assert_relative_eq!(a.omega_gf, b.omega_gf, max_relative = 1e-10);
        assert_relative_eq!(a.drive_element, b.drive_element, max_relative = 1e-6);
    }

    #[test]
    fn banded_solver_matches_dense() {
        for (flux, alpha) in [(0.5, 0.471), (0.496, 0.471), (0.49, 0.3), (0.5, 0.0), (0.2, 0.1)] {
            let p = CircuitParams::reference_device(flux).unwrap().with_alpha(alpha);
            let dense = solve_levels(&build_reduced_hamiltonian(&p, 201).unwrap()).unwrap();
            let banded = lowest_levels_banded(&p, 201).unwrap();
            for k in 0..3 {
                assert_relative_eq!(dense.energies[k], banded.energies[k], max_relative = 1e-11, epsilon = 1e-3);
            }
            let d = drive_operator(&p, 201).unwrap();
            let scale = TAU * p.alpha.max(1e-3) * p.e_j;
            assert!((dense.matrix_element(&d, 0, 2) - banded.matrix_element(&d, 0, 2)).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn sweet_spot_minimum_is_at_origin() {
        let p = CircuitParams::reference_device(0.5).unwrap();
        let levels = harmonic_quartic_levels(&p).unwrap();
        assert!(levels.phi_min.abs() < 1e-12);
        assert!(levels.u4 > 0.0);
        assert_relative_eq!(levels.u2, p.e_j * (2.0 - 4.0 * p.alpha), max_relative = 1e-12);
        assert_relative_eq!(levels.phi_z.powi(4), p.kinetic() / levels.u2, max_relative = 1e-12);
        assert_relative_eq!(levels.omega0, (2.0 * p.kinetic() * levels.u2).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn double_well_is_rejected() {
        let p = CircuitParams::reference_device(0.5).unwrap().with_alpha(0.8);
        assert!(matches!(harmonic_quartic_levels(&p), Err(Error::Degenerate(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = CircuitParams::reference_device(0.493).unwrap();
        let h = 1e-4;
        for phi in [-2.0, -0.3, 0.0, 0.7, 2.5] {
            let d = p.potential_derivatives(phi);
            for k in 0..4 {
                let fd = (p.potential_derivatives(phi + h)[k] - p.potential_derivatives(phi - h)[k]) / (2.0 * h);
                assert!((fd - d[k + 1]).abs() < 1e-6 * p.e_j, "order {k} at {phi}");
            }
        }
    }
}
