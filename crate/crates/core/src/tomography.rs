//! Three-level state tomography: the nine tabulated pre-measurement
//! rotations, a seeded shot model and maximum-likelihood reconstruction.
//!
//! Setting i measures diag(λᵢ ρ λᵢ†) in the {g, e, f} basis. The estimate is
//! parameterised as ρ = T†T / tr(T†T) with T lower triangular, so every
//! iterate is a valid density matrix, and the multinomial log-likelihood is
//! maximised by BFGS from the maximally mixed state, followed by a Newton
//! polish in ρ coordinates.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{SMatrix, SVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qutrit::{DensityMatrix3, Operator3, C64};

pub const SETTINGS: usize = 9;

/// Labels of the nine rotations, in table order.
pub const LABELS: [&str; SETTINGS] = [
    "I",
    "(pi/2)x_ge",
    "(pi/2)y_ge",
    "(pi)x_ge",
    "(pi/2)x_ef",
    "(pi/2)y_ef",
    "(pi)x_ge (pi/2)x_ef",
    "(pi)x_ge (pi/2)y_ef",
    "(pi)x_ge (pi)x_ef",
];

fn op(rows: [[(f64, f64); 3]; 3], scale: f64) -> Operator3 {
    Operator3::from_fn(|r, c| C64::new(rows[r][c].0, rows[r][c].1) * scale)
}

/// λ₁ … λ₉ exactly as tabulated.
pub fn rotation_set() -> [Operator3; SETTINGS] {
    let s = std::f64::consts::SQRT_2;
    let h = FRAC_1_SQRT_2;
    let (o, one, m1, j, mj, r2) = ((0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (s, 0.0));
    [
        op([[one, o, o], [o, one, o], [o, o, one]], 1.0),
        op([[one, mj, o], [mj, one, o], [o, o, r2]], h),
        op([[one, m1, o], [one, one, o], [o, o, r2]], h),
        op([[o, mj, o], [mj, o, o], [o, o, one]], 1.0),
        op([[r2, o, o], [o, one, mj], [o, mj, one]], h),
        op([[r2, o, o], [o, one, m1], [o, one, one]], h),
        op([[o, r2, o], [one, o, mj], [mj, o, one]], h),
        op([[o, r2, o], [one, o, m1], [one, o, one]], h),
        op([[o, o, j], [mj, o, o], [o, mj, o]], 1.0),
    ]
}

/// Outcome probabilities diag(λρλ†) for every setting.
pub fn outcome_probabilities(rho: &DensityMatrix3) -> [[f64; 3]; SETTINGS] {
    rotation_set().map(|l| {
        let rotated = l * rho.matrix() * l.adjoint();
        [0, 1, 2].map(|k| rotated[(k, k)].re)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingRecord {
    pub label: String,
    pub probabilities: [f64; 3],
    /// Present when shots were drawn.
    pub counts: Option<[u64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyRecord {
    pub settings: Vec<SettingRecord>,
    /// Shots per setting; 0 means exact probabilities.
    pub shots: u64,
    pub seed: u64,
}

impl TomographyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.settings.len() != SETTINGS {
            return Err(Error::InvalidArgument(format!("need {SETTINGS} settings, got {}", self.settings.len())));
        }
        for (i, s) in self.settings.iter().enumerate() {
            if s.probabilities.iter().any(|p| !p.is_finite() || *p < -1e-12) {
                return Err(Error::InvalidArgument(format!("setting {}: invalid probabilities {:?}", i + 1, s.probabilities)));
            }
            let total: f64 = s.probabilities.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("setting {}: probabilities sum to {total}", i + 1)));
            }
            match (s.counts, self.shots) {
                (Some(c), n) if n > 0 && c.iter().sum::<u64>() != n => {
                    return Err(Error::InvalidArgument(format!("setting {}: counts do not sum to {n}", i + 1)));
                }
                (None, n) if n > 0 => {
                    return Err(Error::InvalidArgument(format!("setting {}: counts missing", i + 1)));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Observed frequencies: counts/shots, or the exact probabilities.
    pub fn frequencies(&self) -> [[f64; 3]; SETTINGS] {
        std::array::from_fn(|i| {
            let s = &self.settings[i];
            match (s.counts, self.shots) {
                (Some(c), n) if n > 0 => c.map(|k| k as f64 / n as f64),
                _ => s.probabilities,
            }
        })
    }
}

/// Probabilities for every setting and, if `shots > 0`, multinomial counts
/// drawn from a ChaCha stream seeded with `seed`.
pub fn simulate_tomography(rho: &DensityMatrix3, shots: u64, seed: u64) -> Result<TomographyRecord> {
    let rho = DensityMatrix3::new(*rho.matrix())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut settings = Vec::with_capacity(SETTINGS);
    for (label, probs) in LABELS.iter().zip(outcome_probabilities(&rho)) {
        let clipped = probs.map(|p| p.max(0.0));
        let total: f64 = clipped.iter().sum();
        let probabilities = clipped.map(|p| p / total);
        let counts = if shots > 0 { Some(draw_counts(&mut rng, shots, probabilities)?) } else { None };
        settings.push(SettingRecord { label: label.to_string(), probabilities, counts });
    }
    Ok(TomographyRecord { settings, shots, seed })
}

/// Full-rank random state ρ = GG†/tr(GG†), G with i.i.d. complex Gaussian
/// entries (Ginibre). Uses its own ChaCha stream, so sharing a seed with
/// [`simulate_tomography`] does not correlate the two.
pub fn random_state(seed: u64) -> DensityMatrix3 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let g = Operator3::from_fn(|_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let a = g * g.adjoint();
    let m = a / a.trace();
    DensityMatrix3::new((m + m.adjoint()) * C64::new(0.5, 0.0)).expect("Ginibre states are valid")
}

fn draw_counts(rng: &mut ChaCha8Rng, shots: u64, p: [f64; 3]) -> Result<[u64; 3]> {
    let binomial = |n: u64, q: f64, rng: &mut ChaCha8Rng| -> Result<u64> {
        let q = q.clamp(0.0, 1.0);
        Binomial::new(n, q).map(|b| b.sample(rng)).map_err(|e| Error::Numerical(format!("binomial draw: {e}")))
    };
    let g = binomial(shots, p[0], rng)?;
    let rest = 1.0 - p[0];
    let e = if rest > 0.0 { binomial(shots - g, p[1] / rest, rng)? } else { 0 };
    Ok([g, e, shots - g - e])
}

type Params = SVector<f64, 9>;

/// Lower-triangular T from (t₀₀, t₁₁, t₂₂, Re/Im t₁₀, Re/Im t₂₀, Re/Im t₂₁).
fn unpack(x: &Params) -> Operator3 {
    let mut t = Operator3::zeros();
    t[(0, 0)] = C64::new(x[0], 0.0);
    t[(1, 1)] = C64::new(x[1], 0.0);
    t[(2, 2)] = C64::new(x[2], 0.0);
    t[(1, 0)] = C64::new(x[3], x[4]);
    t[(2, 0)] = C64::new(x[5], x[6]);
    t[(2, 1)] = C64::new(x[7], x[8]);
    t
}

const OFF_DIAGONAL: [(usize, usize); 3] = [(1, 0), (2, 0), (2, 1)];

struct Likelihood {
    projectors: Vec<(Operator3, f64)>,
    total_weight: f64,
}

impl Likelihood {
    fn new(record: &TomographyRecord) -> Self {
        let rotations = rotation_set();
        let freqs = record.frequencies();
        let mut projectors = Vec::new();
        for (l, f) in rotations.iter().zip(freqs) {
            for (k, &w) in f.iter().enumerate() {
                if w > 0.0 {
                    let row = l.row(k);
                    projectors.push((row.adjoint() * row, w));
                }
            }
        }
        let total_weight = projectors.iter().map(|(_, w)| w).sum();
        Self { projectors, total_weight }
    }

    /// Negative log-likelihood and its gradient in the T parameters.
    fn evaluate(&self, x: &Params) -> (f64, Params) {
        let t = unpack(x);
        let a = t.adjoint() * t;
        let trace = a.trace().re;
        let mut value = self.total_weight * trace.ln();
        let mut g = Operator3::identity() * C64::new(self.total_weight / trace, 0.0);
        for (pi, w) in &self.projectors {
            let p = (pi * a).trace().re;
            if p <= 0.0 {
                return (f64::INFINITY, Params::zeros());
            }
            value -= w * p.ln();
            g -= pi * C64::new(w / p, 0.0);
        }
        // d/dT_ab of tr(G T†T) is 2(G T†)_ba
        let gt = g * t.adjoint();
        let mut grad = Params::zeros();
        for d in 0..3 {
            grad[d] = 2.0 * gt[(d, d)].re;
        }
        for (slot, &(a_, b_)) in OFF_DIAGONAL.iter().enumerate() {
            let z = gt[(b_, a_)];
            grad[3 + 2 * slot] = 2.0 * z.re;
            grad[4 + 2 * slot] = -2.0 * z.im;
        }
        (value, grad)
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix3,
    pub negative_log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit; `rho` is then the best iterate.
    pub converged: bool,
}

const MAX_ITERATIONS: usize = 5000;

/// Maximum-likelihood density matrix for a nine-setting record.
pub fn mle_reconstruct(record: &TomographyRecord) -> Result<MleResult> {
    record.validate()?;
    let likelihood = Likelihood::new(record);
    let mut x = Params::zeros();
    for d in 0..3 {
        x[d] = 1.0 / 3f64.sqrt();
    }
    let (mut fx, mut gx) = likelihood.evaluate(&x);
    let mut inv_hessian = SMatrix::<f64, 9, 9>::identity();
    let mut iterations = 0;
    let mut converged = false;
    let mut stalls = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        if gx.norm() < 1e-12 {
            converged = true;
            break;
        }
        let mut direction = -(inv_hessian * gx);
        if direction.dot(&gx) >= 0.0 {
            inv_hessian = SMatrix::identity();
            direction = -gx;
        }
        let slope = direction.dot(&gx);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = x + direction * step;
            let (ft, gt) = likelihood.evaluate(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new, g_new)) = accepted else {
            // no descent possible at machine precision
            converged = gx.norm() < 1e-6;
            break;
        };
        let s = x_new - x;
        let y = g_new - gx;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let eye = SMatrix::<f64, 9, 9>::identity();
            inv_hessian = (eye - s * y.transpose() * rho) * inv_hessian * (eye - y * s.transpose() * rho) + s * s.transpose() * rho;
        }
        let improvement = fx - f_new;
        x = x_new;
        fx = f_new;
        gx = g_new;
        if improvement <= 1e-16 * fx.abs().max(1.0) {
            stalls += 1;
            if stalls >= 5 {
                converged = true;
                break;
            }
        } else {
            stalls = 0;
        }
    }
    let t = unpack(&x);
    let a = t.adjoint() * t;
    let m = a / a.trace();
    let m = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let polished = polish(&likelihood, m);
    Ok(MleResult {
        rho: DensityMatrix3::new(polished.rho)?,
        negative_log_likelihood: polished.value,
        gradient_norm: polished.gradient_norm,
        iterations: iterations + polished.iterations,
        converged: converged || polished.stationary,
    })
}

/// Traceless Hermitian basis (Gell-Mann matrices).
fn traceless_basis() -> [Operator3; 8] {
    let mut basis = [Operator3::zeros(); 8];
    let mut n = 0;
    for (r, c) in [(0, 1), (0, 2), (1, 2)] {
        basis[n][(r, c)] = C64::new(1.0, 0.0);
        basis[n][(c, r)] = C64::new(1.0, 0.0);
        basis[n + 1][(r, c)] = C64::new(0.0, -1.0);
        basis[n + 1][(c, r)] = C64::new(0.0, 1.0);
        n += 2;
    }
    basis[6] = Operator3::from_diagonal(&[1.0, -1.0, 0.0].map(|v| C64::new(v, 0.0)).into());
    basis[7] = Operator3::from_diagonal(&[1.0, 1.0, -2.0].map(|v| C64::new(v / 3f64.sqrt(), 0.0)).into());
    basis
}

struct Polished {
    rho: Operator3,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    stationary: bool,
}

fn negative_log_likelihood(likelihood: &Likelihood, rho: &Operator3) -> Option<f64> {
    let mut v = 0.0;
    for (pi, w) in &likelihood.projectors {
        let p = (pi * rho).trace().re;
        if p <= 0.0 {
            return None;
        }
        v -= w * p.ln();
    }
    Some(v)
}

/// Nearest density matrix: negative eigenvalues clipped, trace restored.
fn clip_to_state(m: &Operator3) -> Operator3 {
    let eig = ((m + m.adjoint()) * C64::new(0.5, 0.0)).symmetric_eigen();
    let values = eig.eigenvalues.map(|v| v.max(0.0));
    let total = values.sum();
    let mut out = Operator3::zeros();
    for k in 0..3 {
        let v = eig.eigenvectors.column(k);
        out += v * v.adjoint() * C64::new(values[k] / total, 0.0);
    }
    (out + out.adjoint()) * C64::new(0.5, 0.0)
}

/// Newton iteration directly on ρ over the unit-trace Hermitian plane.
///
/// For pure or near-pure optima the likelihood is flat to first order in the
/// small eigenvalues, and ρ = T†T squares them again, so the T-space search
/// stalls a few 1e−5 short. Newton in ρ converges quadratically there; the
/// end point is clipped back to a state and kept only if it is no worse.
fn polish(likelihood: &Likelihood, start: Operator3) -> Polished {
    let basis = traceless_basis();
    // tr(Π_k B_j) per observed outcome
    let overlaps: Vec<SVector<f64, 8>> = likelihood
        .projectors
        .iter()
        .map(|(pi, _)| SVector::from_fn(|j, _| (pi * basis[j]).trace().re))
        .collect();
    let start_value = negative_log_likelihood(likelihood, &start).unwrap_or(f64::INFINITY);
    let mut rho = start;
    let mut value = start_value;
    let mut gradient_norm = f64::INFINITY;
    let mut stationary = false;
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        let mut grad = SVector::<f64, 8>::zeros();
        let mut hess = SMatrix::<f64, 8, 8>::zeros();
        for ((pi, w), o) in likelihood.projectors.iter().zip(&overlaps) {
            let p = (pi * rho).trace().re;
            grad -= o * (w / p);
            hess += o * o.transpose() * (w / (p * p));
        }
        gradient_norm = grad.norm();
        // pseudo-inverse: directions touching only unobserved outcomes are flat
        let eig = hess.symmetric_eigen();
        let cutoff = 1e-12 * eig.eigenvalues.amax();
        let mut step = SVector::<f64, 8>::zeros();
        for k in 0..8 {
            let lam = eig.eigenvalues[k];
            if lam > cutoff {
                let v = eig.eigenvectors.column(k);
                step -= v * (v.dot(&grad) / lam);
            }
        }
        let decrease = -grad.dot(&step);
        if decrease <= 1e-24 * value.abs().max(1.0) {
            stationary = true;
            break;
        }
        let direction: Operator3 = (0..8).fold(Operator3::zeros(), |acc, j| acc + basis[j] * C64::new(step[j], 0.0));
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = rho + direction * C64::new(s, 0.0);
            if let Some(v) = negative_log_likelihood(likelihood, &trial) {
                if v <= value - 1e-4 * s * decrease || (v <= value && s * decrease < 1e-14) {
                    rho = (trial + trial.adjoint()) * C64::new(0.5, 0.0);
                    value = v;
                    accepted = true;
                    break;
                }
            }
            s *= 0.5;
        }
        if !accepted {
            stationary = gradient_norm < 1e-6;
            break;
        }
    }
    let clipped = clip_to_state(&rho);
    match negative_log_likelihood(likelihood, &clipped) {
        Some(v) if v <= start_value => Polished { rho: clipped, value: v, gradient_norm, iterations, stationary },
        _ => Polished { rho: start, value: start_value, gradient_norm, iterations, stationary: false },
    }
}
