//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! (plus optional `info` lines); the test fails if any criterion fails.
//!
//! Run with `cargo test -p qbattery-cli --test acceptance`.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::process::Command;
use std::time::Instant;

use qbattery_core::circuit::{self, CircuitParams, DEFAULT_BASIS};
use qbattery_core::evolution::{self, DecayRates, DetuningSchedule};
use qbattery_core::metrics;
use qbattery_core::protocols::{self, ProtectionConfig, SweepConfig};
use qbattery_core::pulses::{ConstantDrive, Constraint, EnvelopeKind, EnvelopeSpec};
use qbattery_core::qutrit::{self, LevelEnergies, PureState3};
use qbattery_core::{calibration, tomography, units};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published optimal CD weights.
const ETA_SQUARE: f64 = 0.12;
const ETA_LINEAR: f64 = 0.14;
const ETA_TOL: f64 = 0.04;

type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

struct Outcome {
    pass: bool,
    detail: String,
    info: Vec<String>,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Self { pass, detail, info: Vec::new() }
    }

    fn with_info(mut self, line: String) -> Self {
        self.info.push(line);
        self
    }
}

/// Written straight to stdout so the lines survive the test harness's
/// output capture.
fn report(n: usize, name: &str, outcome: &Outcome) {
    let mut out = std::io::stdout().lock();
    let verdict = if outcome.pass { "PASS" } else { "FAIL" };
    writeln!(out, "{verdict} [{n:>2}] {name}: {}", outcome.detail).unwrap();
    for line in &outcome.info {
        writeln!(out, "       info: {line}").unwrap();
    }
}

fn omega_max() -> f64 {
    units::default_omega_max()
}

fn qsl_charging() -> Outcome {
    let start = Instant::now();
    let om = omega_max();
    let run = protocols::run_qsl_protocol(om, &ProtectionConfig::defaults(om), &LevelEnergies::charging_bias(), 0.999).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let dt = run.trajectory.dt;
    let crossing = run.ergotropy_norm.iter().position(|&e| e >= 0.999).map(|i| run.trajectory.times[i]);
    match run.tau_c {
        Some(tau_c) => Outcome::new(
            (tau_c - 25e-9).abs() <= dt && elapsed < 1.0,
            format!("τ_c = {:.4} ns (dt = {:.4} ns) in {elapsed:.3} s", units::to_ns(tau_c), units::to_ns(dt)),
        )
        .with_info(format!("first crossing of 0.999·E_max at {:.4} ns", units::to_ns(crossing.unwrap_or(f64::NAN)))),
        None => Outcome::new(false, "never charged".into()),
    }
}

fn qsl_bound() -> Outcome {
    let start = Instant::now();
    let om = omega_max();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let kinds = [
        EnvelopeKind::StirapTri,
        EnvelopeKind::StirapCyc,
        EnvelopeKind::CdSquareSum,
        EnvelopeKind::CdLinearSum,
        EnvelopeKind::QslSquare,
    ];
    let count = 120;
    let mut failures = 0;
    let mut earliest = f64::INFINITY;
    for i in 0..count {
        let kind = kinds[i % kinds.len()];
        let eta = rng.random_range(0.0..kind.constraint().max_eta());
        let phase = rng.random_range(-PI..PI);
        let tau = units::ns(rng.random_range(10.0..300.0));
        let spec = EnvelopeSpec::new(kind, om, tau, eta, phase).unwrap();
        let det = DetuningSchedule::none();
        let traj = evolution::evolve_unitary(&spec, &PureState3::ground(), evolution::default_dt(&spec, &det, None), &det).unwrap();
        let bound = protocols::verify_qsl_bound(&traj, om).unwrap();
        if !bound.satisfied() {
            failures += 1;
        }
        if let Some(t) = bound.first_passage {
            earliest = earliest.min(t);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    Outcome::new(
        failures == 0 && elapsed < 60.0,
        format!("{failures}/{count} specs violate the bound, {elapsed:.1} s"),
    )
    .with_info(format!(
        "earliest full charge {:.3} ns vs limit {:.3} ns",
        units::to_ns(earliest),
        units::to_ns(protocols::speed_limit_time(om))
    ))
}

fn constraint_identities() -> Outcome {
    let om = omega_max();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = [0.0f64; 2];
    for (slot, constraint) in [Constraint::SquareSum, Constraint::LinearSum].into_iter().enumerate() {
        for _ in 0..10_000 {
            let tau = units::ns(rng.random_range(10.0..1000.0));
            let eta = rng.random_range(0.0..constraint.max_eta());
            let spec = EnvelopeSpec::cd(constraint, om, tau, eta, 0.0).unwrap();
            let sample = spec.sample_at(rng.random_range(0.0..=tau)).unwrap();
            worst[slot] = worst[slot].max(constraint.relative_residual(&sample, om));
        }
    }
    Outcome::new(
        worst.iter().all(|&w| w < 1e-12),
        format!("max relative residual square {:.2e}, linear {:.2e}", worst[0], worst[1]),
    )
}

fn dark_state_kernel() -> Outcome {
    let om = omega_max();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let spec = if i % 2 == 0 {
            EnvelopeSpec::stirap_tri(om, units::ns(rng.random_range(10.0..1000.0))).unwrap()
        } else {
            EnvelopeSpec::stirap_cyc(om, units::ns(rng.random_range(10.0..1000.0))).unwrap()
        };
        let sample = spec.sample_at(rng.random_range(0.01..0.99) * spec.tau).unwrap();
        assert_eq!(sample.omega_gf, 0.0);
        let h = qutrit::interaction_hamiltonian(&sample, 0.0).unwrap();
        let dark = qutrit::dark_state(sample.omega_ge, sample.omega_ef).unwrap();
        worst = worst.max((h * dark.vector()).norm() / om);
    }
    Outcome::new(worst < 1e-12, format!("max ‖H|E₀⟩‖/Ω_max = {worst:.2e} over 1000 samples"))
}

fn optimal_eta(square: &protocols::SweepResult, linear: &protocols::SweepResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, result, target) in [("square", square, ETA_SQUARE), ("linear", linear, ETA_LINEAR)] {
        let Some(best) = result.best_row() else {
            return Outcome::new(false, format!("{name}: no charged row"));
        };
        let xi_best = best.metrics.unwrap().xi;
        let xi_zero = result.rows[0].metrics.map_or(f64::INFINITY, |m| m.xi);
        pass &= (best.eta - target).abs() <= ETA_TOL + 1e-12 && result.rows[0].eta == 0.0 && xi_best < xi_zero;
        parts.push(format!("{name} η* = {:.2} (ξ ratio {:.3})", best.eta, xi_best / xi_zero));
    }
    Outcome::new(pass, parts.join(", "))
}

fn curve_s(config: &SweepConfig, eta: f64, phase: f64) -> f64 {
    let spec = EnvelopeSpec::cd(config.constraint, config.omega_max, config.tau_max, eta, phase).unwrap();
    let curve = protocols::charging_curve(&spec, config.dtau, config.tau_max, &config.levels, None).unwrap();
    metrics::charging_metrics(&curve, config.theta_min, config.omega_max).unwrap().map_or(0.0, |m| m.s)
}

fn phase_optimum(square_eta: f64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut info = Vec::new();
    for (name, constraint, eta) in [("square", Constraint::SquareSum, ETA_SQUARE), ("linear", Constraint::LinearSum, ETA_LINEAR)] {
        let config = SweepConfig::defaults(constraint);
        let step = config.phase_grid.step;
        let mut worst_period = 0.0f64;
        for phase in [0.0, 0.7, -2.1] {
            let a = curve_s(&config, eta, phase);
            let b = curve_s(&config, eta, phase + 2.0 * PI);
            worst_period = worst_period.max((a - b).abs() / a.abs().max(f64::MIN_POSITIVE));
        }
        let result = protocols::sweep_phase(&config, eta).unwrap();
        let phi = result.best_row().map_or(f64::NAN, |r| r.phase);
        pass &= worst_period < 1e-9 && phi.abs() < step;
        parts.push(format!("{name} φ* = {phi:.4} at η = {eta} (period residual {worst_period:.1e})"));
        if constraint == Constraint::SquareSum && (square_eta - eta).abs() > 1e-12 {
            let at_sweep = protocols::sweep_phase(&config, square_eta).unwrap();
            info.push(format!(
                "square φ* at the sweep's η* = {square_eta:.2}: {:.4}",
                at_sweep.best_row().map_or(f64::NAN, |r| r.phase)
            ));
        }
    }
    let mut outcome = Outcome::new(pass, parts.join(", "));
    outcome.info = info;
    outcome
}

fn thermo_efficiency() -> Outcome {
    let om = omega_max();
    let tau = units::ns(200.0);
    let levels = LevelEnergies::sweet_spot();
    let mu = |spec: EnvelopeSpec| 100.0 * metrics::thermo_cost(&spec, &levels).unwrap().mu;
    let tri = mu(EnvelopeSpec::stirap_tri(om, tau).unwrap());
    let cyc = mu(EnvelopeSpec::stirap_cyc(om, tau).unwrap());
    let cd_cyc = mu(EnvelopeSpec::cd(Constraint::LinearSum, om, tau, ETA_LINEAR, 0.0).unwrap());
    // the square budget fixes the drive norm, so the CD triangle family shares μ at every η
    let cd_tri: Vec<f64> = [0.0, ETA_SQUARE, 0.4, 1.0]
        .iter()
        .map(|&eta| mu(EnvelopeSpec::cd(Constraint::SquareSum, om, tau, eta, 0.0).unwrap()))
        .collect();
    let tri_ok = cd_tri.iter().chain([&tri]).all(|m| (m - 99.772).abs() <= 0.01);
    let cd_spread = cd_tri.iter().fold(0.0f64, |a, m| a.max((m - tri).abs()));
    Outcome::new(
        tri_ok && (cyc - 99.815).abs() <= 0.01,
        format!("μ tri {tri:.5}% (CD η ∈ [0, 1] within {cd_spread:.1e} pp), cycloid STIRAP {cyc:.5}%"),
    )
    .with_info(format!("CD cycloid μ = {cd_cyc:.5}% (not gated; the linear budget changes Σ_τ with η)"))
}

fn decoherence_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for rates in [DecayRates::sweet_spot(), DecayRates::charging_bias()] {
        let duration = 50e-6;
        let steps_per_sample = 50;
        let drive = ConstantDrive::idle(duration).unwrap();
        let dt = duration / (100 * steps_per_sample) as f64;
        let traj = evolution::evolve_lindblad(&drive, &PureState3::second_excited().to_density(), &rates, dt, &DetuningSchedule::none()).unwrap();
        for k in 1..=100 {
            let i = k * steps_per_sample;
            let expected = evolution::analytic_decay_populations(&rates, traj.times[i]).unwrap();
            for (got, want) in traj.states[i].populations().iter().zip(expected) {
                worst = worst.max((got - want).abs());
            }
        }
    }
    Outcome::new(worst < 1e-6, format!("max population error {worst:.2e} at 100 times, both rate sets"))
}

fn decoherence_negligible() -> Outcome {
    let om = omega_max();
    let levels = LevelEnergies::charging_bias();
    let rates = DecayRates::charging_bias();
    let dtau = units::ns(4.0);
    let tau_max = units::ns(300.0);
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in [
        EnvelopeSpec::stirap_tri(om, tau_max).unwrap(),
        EnvelopeSpec::cd(Constraint::SquareSum, om, tau_max, ETA_SQUARE, 0.0).unwrap(),
    ] {
        let open = protocols::charging_curve(&spec, dtau, tau_max, &levels, Some(&rates)).unwrap();
        let closed = protocols::charging_curve(&spec, dtau, tau_max, &levels, None).unwrap();
        let worst = open
            .values()
            .iter()
            .zip(closed.values())
            .map(|(a, b)| (a - b).abs() / levels.e_max())
            .fold(0.0, f64::max);
        pass &= worst < 0.02;
        parts.push(format!("{} {:.3}%", spec.kind.name(), 100.0 * worst));
    }
    Outcome::new(pass, format!("max |ΔE|/E_max for τ ≤ 300 ns: {}", parts.join(", ")))
}

fn intermediate_suppression() -> Outcome {
    let om = omega_max();
    let dtau = units::ns(4.0);
    let tau_max = units::ns(1000.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (constraint, eta) in [(Constraint::SquareSum, ETA_SQUARE), (Constraint::LinearSum, ETA_LINEAR)] {
        let peak = |spec: EnvelopeSpec| {
            protocols::intermediate_population_peaks(&spec, dtau, tau_max).unwrap().into_iter().fold(0.0, f64::max)
        };
        let stirap = peak(EnvelopeSpec::new(constraint.stirap_kind(), om, tau_max, 0.0, 0.0).unwrap());
        let cd = peak(EnvelopeSpec::cd(constraint, om, tau_max, eta, 0.0).unwrap());
        pass &= cd <= stirap;
        parts.push(format!("{} max P_e {cd:.4} vs STIRAP {stirap:.4}", constraint.cd_kind().name()));
    }
    Outcome::new(pass, parts.join(", "))
}

fn parity_rule() -> Outcome {
    let params = CircuitParams::reference_device(0.5).unwrap();
    let (sweet, scale) = circuit::drive_matrix_element(&params, 0.5, DEFAULT_BASIS).unwrap();
    let (biased, _) = circuit::drive_matrix_element(&params, 0.496, DEFAULT_BASIS).unwrap();
    let spectrum = circuit::spectrum(&params, DEFAULT_BASIS).unwrap();
    let biased_spectrum = circuit::spectrum(&params.with_flux(0.496), DEFAULT_BASIS).unwrap();
    Outcome::new(
        sweet / scale < 1e-10 && biased > 0.0 && spectrum.anharmonicity > 0.0,
        format!(
            "|⟨g|D|f⟩| relative {:.1e} at 0.5, {:.3e} at 0.496; anharmonicity {:.1} MHz",
            sweet / scale,
            biased / scale,
            units::to_mhz(spectrum.anharmonicity)
        ),
    )
    .with_info(format!(
        "model ω_ge/2π = {:.4} GHz, ω_gf/2π = {:.4} GHz at 0.5; {:.4}, {:.4} GHz at 0.496 (quoted 2.6612/6.1703 and 2.7123/6.2180)",
        units::to_ghz(spectrum.omega_ge),
        units::to_ghz(spectrum.omega_gf),
        units::to_ghz(biased_spectrum.omega_ge),
        units::to_ghz(biased_spectrum.omega_gf)
    ))
}

fn perturbative_spectrum() -> Outcome {
    let base = CircuitParams::reference_device(0.5).unwrap();
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut quartic_only_misses = 0;
    let mut quartic_only = 0;
    for alpha in [0.0, 0.05, 0.1, 0.2, 0.3, 0.4, 0.471] {
        for flux in [0.5, 0.496, 0.45, 0.42, 0.4, 0.38, 0.35, 0.3] {
            let params = base.with_alpha(alpha).with_flux(flux);
            let Ok(levels) = circuit::harmonic_quartic_levels(&params) else { continue };
            if levels.quality_ratio >= 0.05 {
                continue;
            }
            let spectrum = circuit::spectrum(&params, DEFAULT_BASIS).unwrap();
            let error = (levels.e_e / spectrum.omega_ge - 1.0).abs();
            quartic_only += 1;
            if error >= 0.05 {
                quartic_only_misses += 1;
            }
            if levels.is_reliable(0.05) {
                checked += 1;
                worst = worst.max(error);
            }
        }
    }
    Outcome::new(
        checked > 0 && worst < 0.05,
        format!("{checked} reliable (α, f) points, worst E_e error {:.2}%", 100.0 * worst),
    )
    .with_info(format!(
        "{quartic_only_misses}/{quartic_only} points with only the quartic ratio < 0.05 miss 5% (dropped cubic shift)"
    ))
}

fn tomography_round_trip() -> Outcome {
    let mut worst_exact = 1.0f64;
    for seed in 0..100 {
        let rho = tomography::random_state(seed);
        let record = tomography::simulate_tomography(&rho, 0, seed).unwrap();
        let est = tomography::mle_reconstruct(&record).unwrap();
        worst_exact = worst_exact.min(qutrit::fidelity(&rho, &est.rho));
    }
    let mut good = 0;
    let mut worst_shots = 1.0f64;
    for seed in 0..100 {
        let rho = tomography::random_state(1000 + seed);
        let record = tomography::simulate_tomography(&rho, 10_000, seed).unwrap();
        let f = qutrit::fidelity(&rho, &tomography::mle_reconstruct(&record).unwrap().rho);
        worst_shots = worst_shots.min(f);
        if f >= 0.99 {
            good += 1;
        }
    }
    Outcome::new(
        worst_exact >= 1.0 - 1e-6 && good >= 95,
        format!("exact worst 1 − F = {:.1e}; 10⁴ shots: {good}/100 seeds F ≥ 0.99 (worst {worst_shots:.5})", 1.0 - worst_exact),
    )
}

fn decay_recovery() -> Outcome {
    let t_max = units::us(60.0);
    let times: Vec<f64> = (0..200).map(|i| t_max * i as f64 / 199.0).collect();
    let mut worst = 0.0f64;
    for rates in [DecayRates::sweet_spot(), DecayRates::charging_bias()] {
        let fit = calibration::fit_decay_rates(&calibration::synthetic_decay_series(&rates, &times)).unwrap();
        for (got, want) in [
            (fit.rates.gamma_eg, rates.gamma_eg),
            (fit.rates.gamma_fe, rates.gamma_fe),
            (fit.rates.gamma_fg, rates.gamma_fg),
        ] {
            worst = worst.max((got - want).abs() / want);
        }
    }
    Outcome::new(worst < 0.01, format!("worst relative rate error {worst:.2e}"))
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let configs = [
        r#"{"kind": "tomo-roundtrip", "params": {"state": "random", "records": 8, "shots": 5000}, "seed": 99}"#,
        r#"{"kind": "charge-curve", "params": {"protocol": "cd_linear_sum", "eta": 0.14, "tau_max_ns": 400}}"#,
        r#"{"kind": "decay-fit", "params": {"noise_std": 0.002}, "seed": 5}"#,
    ];
    let mut identical = 0;
    for (i, config) in configs.iter().enumerate() {
        let cfg = dir.path().join(format!("{i}.json"));
        fs::write(&cfg, config).unwrap();
        let outputs: Vec<Vec<u8>> = ["a", "b"]
            .iter()
            .map(|run| {
                let out = dir.path().join(format!("{i}{run}.csv"));
                let status = Command::new(env!("CARGO_BIN_EXE_qbattery"))
                    .arg("--config")
                    .arg(&cfg)
                    .arg("--out")
                    .arg(&out)
                    .output()
                    .unwrap()
                    .status;
                assert!(status.success());
                fs::read(out).unwrap()
            })
            .collect();
        if outputs[0] == outputs[1] {
            identical += 1;
        }
    }
    Outcome::new(identical == configs.len(), format!("{identical}/{} configs byte-identical across runs", configs.len()))
}

#[test]
fn acceptance_criteria() {
    let square = protocols::sweep_eta(&SweepConfig::defaults(Constraint::SquareSum)).unwrap();
    let linear = protocols::sweep_eta(&SweepConfig::defaults(Constraint::LinearSum)).unwrap();
    let square_eta = square.best_row().map_or(ETA_SQUARE, |r| r.eta);

    let checks: Vec<(&str, Check)> = vec![
        ("QSL charging", Box::new(qsl_charging)),
        ("QSL bound", Box::new(qsl_bound)),
        ("constraint identities", Box::new(constraint_identities)),
        ("dark-state kernel", Box::new(dark_state_kernel)),
        ("optimal η", Box::new(|| optimal_eta(&square, &linear))),
        ("phase optimum", Box::new(move || phase_optimum(square_eta))),
        ("thermodynamic efficiency", Box::new(thermo_efficiency)),
        ("decoherence oracle", Box::new(decoherence_oracle)),
        ("decoherence negligibility", Box::new(decoherence_negligible)),
        ("intermediate-state suppression", Box::new(intermediate_suppression)),
        ("parity selection rule", Box::new(parity_rule)),
        ("perturbative spectrum", Box::new(perturbative_spectrum)),
        ("tomography round trip", Box::new(tomography_round_trip)),
        ("decay-rate recovery", Box::new(decay_recovery)),
        ("CLI determinism", Box::new(cli_determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = check();
        report(i + 1, name, &outcome);
        if !outcome.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

