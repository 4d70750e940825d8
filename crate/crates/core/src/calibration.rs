//! Calibration fits: cascade decay rates from population time series, and
//! the coupling product A·m from Rabi first-peak times.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::evolution::{decay_populations, DecayRates};

/// One population sample (P_g, P_e, P_f) at time `t` (s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSample {
    pub t: f64,
    pub populations: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rates: DecayRates,
    /// Root-mean-square population residual.
    pub rms_residual: f64,
    /// Covariance of (Γ_eg, Γ_fe, Γ_fg) in 1/s², from σ²(JᵀJ)⁻¹.
    pub covariance: [[f64; 3]; 3],
    /// Condition number of JᵀJ in scaled coordinates; large means the data
    /// cannot separate the rates.
    pub condition_number: f64,
    /// Slowest observable decay constant times the series length.
    pub coverage: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DecayFit {
    /// Standard errors of (Γ_eg, Γ_fe, Γ_fg).
    pub fn standard_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn well_covered(&self) -> bool {
        self.coverage >= 3.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit {
    /// A·⟨g|D|f⟩; the two factors are not separately identifiable.
    pub coupling_product: f64,
    pub rms_residual: f64,
    pub points: usize,
}

impl RabiFit {
    /// Predicted first-peak time for drive amplitude `omega0`.
    pub fn first_peak_time(&self, omega0: f64) -> f64 {
        FRAC_PI_2 / (omega0 * self.coupling_product)
    }
}

/// Both calibration results together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub coupling_product: f64,
    pub rates: DecayRates,
    pub decay_rms_residual: f64,
    pub rabi_rms_residual: f64,
}

pub fn calibrate(series: &[PopulationSample], rabi: &[(f64, f64)]) -> Result<CalibrationFit> {
    let decay = fit_decay_rates(series)?;
    let peak = rabi_first_peak_fit(rabi)?;
    Ok(CalibrationFit {
        coupling_product: peak.coupling_product,
        rates: decay.rates,
        decay_rms_residual: decay.rms_residual,
        rabi_rms_residual: peak.rms_residual,
    })
}

/// Generate the noiseless cascade series for `rates` at `times`.
pub fn synthetic_decay_series(rates: &DecayRates, times: &[f64]) -> Vec<PopulationSample> {
    times.iter().map(|&t| PopulationSample { t, populations: decay_populations(rates, t) }).collect()
}

/// Add i.i.d. Gaussian noise of standard deviation `noise_std` to every
/// population, drawn in time order from `seed`.
pub fn add_population_noise(series: &mut [PopulationSample], noise_std: f64, seed: u64) -> Result<()> {
    ensure_finite("noise_std", noise_std)?;
    if noise_std < 0.0 {
        return Err(Error::InvalidArgument(format!("noise_std must be non-negative, got {noise_std}")));
    }
    let normal = Normal::new(0.0, noise_std).map_err(|e| Error::InvalidArgument(format!("noise_std: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for sample in series {
        for p in &mut sample.populations {
            *p += normal.sample(&mut rng);
        }
    }
    Ok(())
}

const MAX_ITERATIONS: usize = 500;

struct DecayProblem<'a> {
    series: &'a [PopulationSample],
    t_max: f64,
}

impl DecayProblem<'_> {
    fn rates(&self, x: &Vector3<f64>) -> DecayRates {
        DecayRates { gamma_eg: x[0] / self.t_max, gamma_fe: x[1] / self.t_max, gamma_fg: x[2] / self.t_max }
    }

    fn residuals(&self, x: &Vector3<f64>) -> Vec<f64> {
        let rates = self.rates(x);
        self.series
            .iter()
            .flat_map(|s| {
                let model = decay_populations(&rates, s.t);
                [0, 1, 2].map(|k| model[k] - s.populations[k])
            })
            .collect()
    }

    fn cost(&self, x: &Vector3<f64>) -> f64 {
        self.residuals(x).iter().map(|r| r * r).sum()
    }

    /// Finite-difference Jacobian, one-sided at the lower bound.
    fn jacobian(&self, x: &Vector3<f64>) -> Vec<[f64; 3]> {
        let base = self.residuals(x);
        let mut jac = vec![[0.0; 3]; base.len()];
        for p in 0..3 {
            let h = 1e-6 * x[p].abs().max(1e-3);
            let mut plus = *x;
            plus[p] += h;
            let rp = self.residuals(&plus);
            if x[p] > h {
                let mut minus = *x;
                minus[p] -= h;
                let rm = self.residuals(&minus);
                for (row, (a, b)) in jac.iter_mut().zip(rp.iter().zip(&rm)) {
                    row[p] = (a - b) / (2.0 * h);
                }
            } else {
                for (row, (a, b)) in jac.iter_mut().zip(rp.iter().zip(&base)) {
                    row[p] = (a - b) / h;
                }
            }
        }
        jac
    }

    fn normal_equations(&self, x: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let jac = self.jacobian(x);
        let res = self.residuals(x);
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for (row, r) in jac.iter().zip(&res) {
            let v = Vector3::from(*row);
            jtj += v * v.transpose();
            jtr += v * *r;
        }
        (jtj, jtr)
    }

    /// Projected Levenberg–Marquardt from `x0`.
    fn solve(&self, x0: Vector3<f64>) -> (Vector3<f64>, f64, usize, bool) {
        let mut x = x0;
        let mut cost = self.cost(&x);
        let mut lambda = 1e-3;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < MAX_ITERATIONS {
            iterations += 1;
            if cost < 1e-30 {
                converged = true;
                break;
            }
            let (jtj, jtr) = self.normal_equations(&x);
            let mut improved = false;
            for _ in 0..40 {
                let mut damped = jtj;
                for i in 0..3 {
                    damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(step) = damped.cholesky().map(|c| c.solve(&(-jtr))) else {
                    lambda *= 10.0;
                    continue;
                };
                let trial = (x + step).map(|v| v.max(0.0));
                let trial_cost = self.cost(&trial);
                if trial_cost < cost {
                    let moved = (trial - x).norm();
                    let gain = cost - trial_cost;
                    x = trial;
                    cost = trial_cost;
                    lambda = (lambda * 0.3).max(1e-12);
                    improved = true;
                    if moved <= 1e-13 * x.norm().max(1e-3) || gain <= 1e-15 * cost {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if !improved {
                // no downhill step left: stationary to working precision
                converged = true;
                break;
            }
            if converged {
                break;
            }
        }
        (x, cost, iterations, converged)
    }
}

/// Least-squares fit of (Γ_eg, Γ_fe, Γ_fg) to a cascade decay from |f⟩,
/// with all rates bounded below at zero.
pub fn fit_decay_rates(series: &[PopulationSample]) -> Result<DecayFit> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {}", series.len())));
    }
    for s in series {
        ensure_finite("t", s.t)?;
        if s.t < 0.0 {
            return Err(Error::InvalidArgument(format!("negative sample time {}", s.t)));
        }
        for p in s.populations {
            ensure_finite("population", p)?;
        }
    }
    let t_max = series.iter().map(|s| s.t).fold(0.0, f64::max);
    if t_max <= 0.0 {
        return Err(Error::Degenerate("all samples at t = 0".into()));
    }
    let problem = DecayProblem { series, t_max };

    // P_f decays at Γ_fe + Γ_fg: log-linear slope through the origin
    let (num, den) = series
        .iter()
        .filter(|s| s.populations[2] > 1e-12 && s.t > 0.0)
        .fold((0.0, 0.0), |(n, d), s| (n - s.t * s.populations[2].ln(), d + s.t * s.t));
    let total = if den > 0.0 { (num / den).max(0.0) * t_max } else { 0.0 };

    let starts = [0.5, 1.0, 2.0].map(|k| Vector3::new(k * total, 0.5 * total, 0.5 * total));
    let (x, cost, iterations, converged) = starts
        .into_iter()
        .map(|x0| problem.solve(x0))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three starts");

    let rates = problem.rates(&x);
    let n = 3 * series.len();
    let (jtj, _) = problem.normal_equations(&x);
    let eig = SymmetricEigen::new(jtj).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    let condition_number = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    let sigma2 = if n > 3 { cost / (n - 3) as f64 } else { 0.0 };
    let covariance = match jtj.try_inverse() {
        Some(inv) => {
            std::array::from_fn(|i| std::array::from_fn(|j| sigma2 * inv[(i, j)] / (t_max * t_max)))
        }
        None => [[f64::INFINITY; 3]; 3],
    };
    let slowest = rates.gamma_eg.min(rates.f_total());
    Ok(DecayFit {
        rates,
        rms_residual: (cost / n as f64).sqrt(),
        covariance,
        condition_number,
        coverage: slowest * t_max,
        iterations,
        converged,
    })
}

/// Fit t₁ = π/(2Ω₀·A·m) to (Ω₀, t₁) pairs by least squares in t₁.
pub fn rabi_first_peak_fit(pairs: &[(f64, f64)]) -> Result<RabiFit> {
    for &(omega, t) in pairs {
        ensure_finite("Ω₀", omega)?;
        ensure_finite("t₁", t)?;
        if omega <= 0.0 || t <= 0.0 {
            return Err(Error::InvalidArgument(format!("need positive (Ω₀, t₁), got ({omega}, {t})")));
        }
    }
    let mut distinct: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 distinct amplitudes, got {}", distinct.len())));
    }
    // t = c/Ω₀ with c = π/(2A·m)
    let num: f64 = pairs.iter().map(|(w, t)| t / w).sum();
    let den: f64 = pairs.iter().map(|(w, _)| 1.0 / (w * w)).sum();
    let c = num / den;
    let ssr: f64 = pairs.iter().map(|(w, t)| (t - c / w).powi(2)).sum();
    Ok(RabiFit {
        coupling_product: FRAC_PI_2 / c,
        rms_residual: (ssr / pairs.len() as f64).sqrt(),
        points: pairs.len(),
    })
}
