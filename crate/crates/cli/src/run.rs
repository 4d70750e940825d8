//! Dispatch a validated experiment to the core library and tabulate it.

use anyhow::{Context, Result};
use qbattery_core::calibration;
use qbattery_core::evolution::{self, DetuningSchedule};
use qbattery_core::protocols::{self, SweepResult};
use qbattery_core::pulses::ConstantDrive;
use qbattery_core::qutrit::{self, DensityMatrix3, PureState3};
use qbattery_core::tomography;
use qbattery_core::{circuit, metrics, units};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{DecaySource, Experiment, ExperimentConfig, TomoState};
use crate::table::{Cell, ResultTable};

/// Run the experiment and attach metadata. Errors here are numerical
/// failures (exit status 3).
pub fn run(config: &ExperimentConfig) -> Result<ResultTable> {
    let (mut table, summary) = match &config.experiment {
        Experiment::ChargeCurve { template, levels, rates, params } => {
            let curve = protocols::charging_curve(template, units::ns(params.dtau_ns), template.tau, levels, rates.as_ref())?;
            let mut table = ResultTable::new(&["tau_ns", "ergotropy_norm", "ergotropy_rad_per_s"]);
            for (i, (&e, n)) in curve.values().iter().zip(curve.normalized()).enumerate() {
                table.push(vec![Cell::float(units::to_ns(curve.tau(i))), Cell::float(n), Cell::float(e)]);
            }
            let m = metrics::charging_metrics(&curve, params.theta_min, template.omega_max)?;
            let summary = json!({
                "charged": m.is_some(),
                "tau_c_ns": m.map(|m| units::to_ns(m.tau_c)),
                "xi_norm": m.map(|m| m.xi / curve.e_max()),
                "s": m.map(|m| m.s),
            });
            (table, summary)
        }
        Experiment::SweepEta { sweep, .. } => {
            let result = protocols::sweep_eta(sweep)?;
            sweep_table(&result, sweep.levels.e_max())
        }
        Experiment::SweepPhase { sweep, eta, .. } => {
            let result = protocols::sweep_phase(sweep, *eta)?;
            sweep_table(&result, sweep.levels.e_max())
        }
        Experiment::Qsl { params, omega_max, protection, levels } => {
            let run = protocols::run_qsl_protocol(*omega_max, protection, levels, params.theta_min)?;
            let bound = protocols::verify_qsl_bound(&run.trajectory, *omega_max)?;
            let summary = json!({
                "tau_c_ns": run.tau_c.map(units::to_ns),
                "speed_limit_ns": units::to_ns(protocols::speed_limit_time(*omega_max)),
                "bound_satisfied": bound.satisfied(),
            });
            let table = if params.trajectory {
                let mut table = ResultTable::new(&["t_ns", "p_g", "p_e", "p_f", "ergotropy_norm"]);
                for ((t, rho), e) in run.trajectory.times.iter().zip(&run.trajectory.states).zip(&run.ergotropy_norm) {
                    let [g, ex, f] = rho.populations();
                    table.push(vec![Cell::float(units::to_ns(*t)), Cell::float(g), Cell::float(ex), Cell::float(f), Cell::float(*e)]);
                }
                table
            } else {
                let mut table = ResultTable::new(&[
                    "tau_c_ns",
                    "speed_limit_ns",
                    "peak_norm",
                    "max_overall_norm",
                    "min_after_cutoff_norm",
                    "rabi_floor_norm",
                    "bound_violations",
                    "bound_satisfied",
                ]);
                table.push(vec![
                    Cell::opt(run.tau_c.map(units::to_ns)),
                    Cell::float(units::to_ns(protocols::speed_limit_time(*omega_max))),
                    Cell::opt(run.peak),
                    Cell::float(run.max_overall),
                    Cell::opt(run.min_after_cutoff),
                    Cell::float(run.rabi_floor),
                    Cell::Int(bound.violations as i64),
                    Cell::flag(bound.satisfied()),
                ]);
                table
            };
            (table, summary)
        }
        Experiment::SpectrumSweep { params, circuit: device, fluxes } => {
            let results = circuit::flux_sweep(device, fluxes, params.basis_size)?;
            let mut table = ResultTable::new(&[
                "flux",
                "omega_ge_ghz_over_2pi",
                "omega_gf_ghz_over_2pi",
                "anharmonicity_mhz_over_2pi",
                "drive_element_rad_per_s",
                "charge_element",
                "basis_size",
                "converged",
            ]);
            for r in &results {
                table.push(vec![
                    Cell::float(r.flux),
                    Cell::float(units::to_ghz(r.omega_ge)),
                    Cell::float(units::to_ghz(r.omega_gf)),
                    Cell::float(units::to_mhz(r.anharmonicity)),
                    Cell::float(r.drive_element),
                    Cell::float(r.charge_element),
                    Cell::Int(r.basis_size as i64),
                    Cell::flag(r.converged),
                ]);
            }
            let summary = json!({ "all_converged": results.iter().all(|r| r.converged) });
            (table, summary)
        }
        Experiment::TomoRoundtrip { params, levels } => {
            let e_max = levels.e_max();
            let rows = (0..params.records)
                .into_par_iter()
                .map(|i| {
                    let seed = config.seed.wrapping_add(i as u64);
                    let rho = match params.state {
                        TomoState::Ground => PureState3::ground().to_density(),
                        TomoState::Excited => PureState3::excited().to_density(),
                        TomoState::SecondExcited => PureState3::second_excited().to_density(),
                        TomoState::MaximallyMixed => DensityMatrix3::maximally_mixed(),
                        TomoState::Random => tomography::random_state(seed),
                    };
                    let record = tomography::simulate_tomography(&rho, params.shots, seed)?;
                    let est = tomography::mle_reconstruct(&record)?;
                    Ok(vec![
                        Cell::Int(i as i64),
                        Cell::float(qutrit::fidelity(&rho, &est.rho)),
                        Cell::float(qutrit::ergotropy(&rho, levels) / e_max),
                        Cell::float(qutrit::ergotropy(&est.rho, levels) / e_max),
                        Cell::float(est.negative_log_likelihood),
                        Cell::Int(est.iterations as i64),
                        Cell::flag(est.converged),
                    ])
                })
                .collect::<Result<Vec<_>, qbattery_core::Error>>()?;
            let mut table = ResultTable::new(&[
                "record",
                "fidelity",
                "ergotropy_true_norm",
                "ergotropy_est_norm",
                "negative_log_likelihood",
                "iterations",
                "converged",
            ]);
            let min_fidelity = rows.iter().filter_map(|r| r[1].as_f64()).fold(1.0, f64::min);
            for row in rows {
                table.push(row);
            }
            // record i uses seed + i for both its state and its shots
            (table, json!({ "min_fidelity": min_fidelity }))
        }
        Experiment::DecayFit { params, rates } => {
            let t_max = units::us(params.t_max_us);
            let times: Vec<f64> = (0..params.samples).map(|i| t_max * i as f64 / (params.samples - 1) as f64).collect();
            let mut series = match params.source {
                DecaySource::Analytic => calibration::synthetic_decay_series(rates, &times),
                DecaySource::Lindblad => lindblad_series(rates, &times)?,
            };
            if params.noise_std > 0.0 {
                calibration::add_population_noise(&mut series, params.noise_std, config.seed)?;
            }
            let fit = calibration::fit_decay_rates(&series)?;
            let truth = [rates.gamma_eg, rates.gamma_fe, rates.gamma_fg];
            let got = [fit.rates.gamma_eg, fit.rates.gamma_fe, fit.rates.gamma_fg];
            let errors = fit.standard_errors();
            let mut table = ResultTable::new(&["channel", "true_khz", "fitted_khz", "stderr_khz", "relative_error"]);
            for (k, name) in ["eg", "fe", "fg"].iter().enumerate() {
                let rel = if truth[k] > 0.0 { Cell::float((got[k] - truth[k]) / truth[k]) } else { Cell::Missing };
                table.push(vec![
                    Cell::Text(name.to_string()),
                    Cell::float(truth[k] / 1e3),
                    Cell::float(got[k] / 1e3),
                    Cell::float(errors[k] / 1e3),
                    rel,
                ]);
            }
            let summary = json!({
                "rms_residual": fit.rms_residual,
                "condition_number": finite_or_null(fit.condition_number),
                "coverage": fit.coverage,
                "well_covered": fit.well_covered(),
                "iterations": fit.iterations,
                "converged": fit.converged,
            });
            (table, summary)
        }
        Experiment::Thermo { params, specs, levels } => {
            let mut table = ResultTable::new(&[
                "protocol",
                "eta",
                "sigma_tau_mhz_over_2pi",
                "sigma_abs_ghz_over_2pi",
                "mu_percent",
            ]);
            for spec in specs {
                let report = metrics::thermo_cost(spec, levels)?;
                table.push(vec![
                    Cell::Text(spec.kind.name().to_string()),
                    Cell::float(spec.eta),
                    Cell::float(units::to_mhz(report.sigma_tau)),
                    Cell::float(units::to_ghz(report.sigma_abs)),
                    Cell::float(100.0 * report.mu),
                ]);
            }
            (table, json!({ "tau_ns": params.tau_ns }))
        }
    };
    table.metadata = json!({
        "tool": "qbattery",
        "version": env!("CARGO_PKG_VERSION"),
        "config": config.resolved(),
        "summary": summary,
    });
    table.validate()?;
    Ok(table)
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn sweep_table(result: &SweepResult, e_max: f64) -> (ResultTable, Value) {
    let mut table = ResultTable::new(&["eta", "phase_rad", "charged", "tau_c_ns", "xi_norm", "s", "best"]);
    for (i, row) in result.rows.iter().enumerate() {
        table.push(vec![
            Cell::float(row.eta),
            Cell::float(row.phase),
            Cell::flag(row.metrics.is_some()),
            Cell::opt(row.metrics.map(|m| units::to_ns(m.tau_c))),
            Cell::opt(row.metrics.map(|m| m.xi / e_max)),
            Cell::opt(row.metrics.map(|m| m.s)),
            Cell::flag(result.best == Some(i)),
        ]);
    }
    let best = result.best_row();
    let summary = json!({
        "best_eta": best.map(|r| r.eta),
        "best_phase_rad": best.map(|r| r.phase),
        "best_s": best.and_then(|r| r.s()),
    });
    (table, summary)
}

/// Populations of an undriven Lindblad run from |f⟩ at the requested times.
fn lindblad_series(rates: &qbattery_core::DecayRates, times: &[f64]) -> Result<Vec<calibration::PopulationSample>> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let drive = ConstantDrive::idle(t_max)?;
    let det = DetuningSchedule::none();
    let steps_per_sample = 50;
    let dt = t_max / ((times.len() - 1) * steps_per_sample) as f64;
    let traj = evolution::evolve_lindblad(&drive, &PureState3::second_excited().to_density(), rates, dt, &det)
        .context("idle Lindblad run")?;
    times
        .iter()
        .map(|&t| {
            let i = traj
                .times
                .iter()
                .position(|&s| (s - t).abs() <= 1e-9 * t_max)
                .with_context(|| format!("no trajectory sample at t = {t:e} s"))?;
            Ok(calibration::PopulationSample { t, populations: traj.states[i].populations() })
        })
        .collect()
}
