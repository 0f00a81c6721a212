use phs_decay::catalog::{self, CatalogEntry};
use phs_decay::simulator::*;
use phs_decay::system::energy_balance_residual;
use phs_decay::*;
use rayon::prelude::*;

fn unit_wave(k: f64) -> CatalogEntry {
    catalog::wave_constant(1.0, 1.0, k, 0.0, 1.0).unwrap()
}

fn catalog_certificate(e: &CatalogEntry) -> Certificate {
    match e.multipliers.first() {
        Some(m) => assemble_certificate(&e.system, m, e.xi, DEFAULT_GRID).unwrap(),
        None => best_certificate(&e.system, e.xi, &Family::ALL, DEFAULT_GRID).unwrap(),
    }
}

#[test]
fn reflective_scheme_conserves_energy() {
    let e = unit_wave(1.0);
    let d = discretize_with(&e.system, 64, SchemeOptions::conservative()).unwrap();
    let z0 = d.default_initial_state();
    let tr = simulate(&d, &z0, 10.0, 1e-3).unwrap();
    assert_eq!(tr.energy.len(), 10_001);
    let h0 = tr.energy[0];
    let drift = tr.energy.iter().fold(0.0f64, |m, h| m.max((h - h0).abs()));
    assert!(drift <= 1e-9 * h0, "drift {drift:e}");
}

#[test]
fn reflective_timoshenko_conserves_energy_without_viscosity() {
    let e = catalog::timoshenko_inviscid(1.0);
    let d = discretize_with(&e.system, 32, SchemeOptions::conservative()).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 1.0, 1e-4).unwrap();
    let h0 = tr.energy[0];
    assert!(tr.energy.iter().all(|h| (h - h0).abs() <= 1e-9 * h0));
}

#[test]
fn damped_wave_loses_energy() {
    let e = unit_wave(1.0);
    let d = discretize(&e.system, 100).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 1.0, 1e-3).unwrap();
    assert!(tr.energy.last().unwrap() < &tr.energy[0]);
    assert!((tr.energy[0] - 1.0).abs() < 1e-12);
}

#[test]
fn zero_state_gives_zero_residual() {
    let e = catalog::timoshenko_normalized();
    let d = discretize(&e.system, 16).unwrap();
    let z0 = StateField::zeros(d.nodes.clone(), e.system.n);
    let tr = simulate(&d, &z0, 0.1, 1e-2).unwrap();
    let res = energy_balance_residual(&e.system, &tr).unwrap();
    assert_eq!(res.len(), 10);
    assert!(res.iter().all(|&r| r == 0.0));
    assert!(tr.energy.iter().all(|&h| h == 0.0));
}

#[test]
fn residual_rejects_foreign_trace() {
    let d = discretize(&unit_wave(1.0).system, 16).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 0.01, 1e-3).unwrap();
    let other = catalog::timoshenko_normalized().system;
    assert!(matches!(energy_balance_residual(&other, &tr), Err(Error::Structural(_))));
}

// physical residual and numerical damping together close the discrete balance
#[test]
fn energy_balance_closes_at_round_off() {
    for e in [unit_wave(0.5), catalog::wave_variable_area(), catalog::timoshenko_normalized()] {
        let d = discretize(&e.system, 64).unwrap();
        let tr = simulate(&d, &d.default_initial_state(), 2.0, 1e-3).unwrap();
        let res = energy_balance_residual(&e.system, &tr).unwrap();
        let worst = res.iter().zip(&tr.numerical_dissipation).fold(0.0f64, |m, (r, n)| m.max((r + n).abs()));
        assert!(worst < 1e-10, "{}: {worst:e}", e.name);
        assert!(tr.numerical_dissipation.iter().all(|&n| n >= 0.0));
    }
}

#[test]
fn unit_wave_residual_below_tolerance() {
    let e = unit_wave(1.0);
    let d = discretize(&e.system, 200).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 3.0, 1e-3).unwrap();
    let res = energy_balance_residual(&e.system, &tr).unwrap();
    let worst = res.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    assert!(worst < 1e-6 * tr.energy[0], "{worst:e}");
}

/// `tanh(lambda) = -k` on the unit interval: `lambda = -atanh(k) + i pi m`.
fn wave_eigenvalue_errors(k: f64, cells: usize, modes: &[i32]) -> Vec<f64> {
    let d = discretize(&unit_wave(k).system, cells).unwrap();
    let ev = d.operator_dense().complex_eigenvalues();
    modes
        .iter()
        .map(|&m| {
            let (re, im) = (-k.atanh(), std::f64::consts::PI * m as f64);
            ev.iter().map(|z| (z.re - re).hypot(z.im - im)).fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn eigenvalues_converge_at_second_order() {
    let modes = [1, 2, 3];
    for k in [0.25, 0.5] {
        let coarse = wave_eigenvalue_errors(k, 40, &modes);
        let fine = wave_eigenvalue_errors(k, 80, &modes);
        let finer = wave_eigenvalue_errors(k, 160, &modes);
        for j in 0..modes.len() {
            for (e1, e2) in [(coarse[j], fine[j]), (fine[j], finer[j])] {
                let order = (e1 / e2).log2();
                assert!(order >= 1.9, "k = {k}, mode {}: errors {e1:e} -> {e2:e}", modes[j]);
            }
            assert!(finer[j] < 1e-2);
        }
    }
}

#[test]
fn fit_handles_oscillating_envelope() {
    let times: Vec<f64> = (0..=20_000).map(|i| i as f64 * 1e-3).collect();
    let energy: Vec<f64> = times.iter().map(|&t| (1.0 + (5.0 * t).cos().powi(2)) * (-t).exp()).collect();
    let fit = fit_decay_series(&times, &energy, DEFAULT_FIT_WINDOW).unwrap();
    assert!((fit.alpha_emp - 1.0).abs() < 0.05, "{fit:?}");
    assert!(!fit.truncated);
}

#[test]
fn inflated_rate_fails_verification() {
    let e = unit_wave(1.0);
    let cert = catalog_certificate(&e);
    let d = discretize(&e.system, 200).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 5.0 / cert.alpha, 1e-3).unwrap();
    assert!(verify_certificate(&cert, &tr).passed);
    let check = verify_envelope(cert.overshoot, 10.0 * cert.alpha, &tr, ENVELOPE_TOL);
    assert!(!check.passed);
    assert!(check.max_violation > 0.0);
}

#[test]
fn snapshots_respect_stride() {
    let d = discretize(&unit_wave(1.0).system, 16).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 2.5, 1e-3).unwrap();
    assert_eq!(tr.stride, 2);
    assert_eq!(tr.snapshots.first().unwrap().step, 0);
    assert_eq!(tr.snapshots.last().unwrap().step, 2500);
    assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn simulation_is_deterministic() {
    let e = catalog::wave_variable_area();
    let d = discretize(&e.system, 50).unwrap();
    let z0 = d.default_initial_state();
    let a = simulate(&d, &z0, 1.0, 1e-3).unwrap();
    let b = simulate(&d, &z0, 1.0, 1e-3).unwrap();
    assert_eq!(a.energy, b.energy);
    assert_eq!(a.yb, b.yb);
}

fn full_run(e: &CatalogEntry, cells: usize, dt: f64) -> (Certificate, SimulationTrace) {
    let cert = catalog_certificate(e);
    let d = discretize(&e.system, cells).unwrap();
    let tr = simulate(&d, &d.default_initial_state(), 5.0 / cert.alpha, dt).unwrap();
    (cert, tr)
}

fn assert_dissipative_and_enveloped(e: &CatalogEntry) {
    let (cert, tr) = full_run(e, 200, 1e-3);
    let h0 = tr.energy[0];
    for w in tr.energy.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-10), "{}: energy rose", e.name);
    }
    let check = verify_certificate(&cert, &tr);
    assert!(check.passed, "{}: {check:?}", e.name);
    let res = energy_balance_residual(&e.system, &tr).unwrap();
    assert!(res.iter().all(|r| r.abs() < 1e-6 * h0), "{}", e.name);
}

#[test]
fn inviscid_timoshenko_envelope() {
    assert_dissipative_and_enveloped(&catalog::timoshenko_inviscid(1.0));
}

#[test]
fn wave_variable_envelope() {
    assert_dissipative_and_enveloped(&catalog::wave_variable_area());
}

// k = 1 is excluded: the matched boundary empties the continuous system in
// finite time, so the fitted rate there only measures numerical damping.
#[test]
fn fitted_rate_is_stable_under_refinement() {
    let entries = [unit_wave(0.5), catalog::wave_variable_area(), catalog::timoshenko_normalized()];
    let runs: Vec<(usize, usize, f64)> = (0..entries.len()).flat_map(|i| [(i, 200, 1e-3), (i, 400, 5e-4)]).collect();
    let rates: Vec<f64> = runs
        .par_iter()
        .map(|&(i, cells, dt)| fit_decay(&full_run(&entries[i], cells, dt).1, DEFAULT_FIT_WINDOW).unwrap().alpha_emp)
        .collect();
    for (i, e) in entries.iter().enumerate() {
        let (a1, a2) = (rates[2 * i], rates[2 * i + 1]);
        assert!(((a2 - a1) / a1).abs() < 0.02, "{}: {a1} -> {a2}", e.name);
    }
}
