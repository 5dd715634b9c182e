use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rotunnel::rotor::{build_hamiltonian, solve, DimensionlessConfig, Spectrum};
use rotunnel::unitary::{
    doublet_state, evolve, evolve_state, first_maximum, gaussian_packet, time_grid, visibility, visibility_window,
    well_kernel, well_probability, StateVector, TimeSeries, TimeUnit,
};
use rotunnel::Error;

const V_TABLE: f64 = 4.02089;

fn table() -> Spectrum {
    solve(&DimensionlessConfig::new(V_TABLE, 0.0, 0.0, 20)).unwrap()
}

/// p₊ by summing |ψ(θ)|² on a fine grid over (0, π).
fn p_plus_on_grid(psi: &StateVector) -> f64 {
    let k = 4096;
    let n = psi.n_max as i64;
    let mut acc = 0.0;
    for j in 0..k {
        let th = PI * (j as f64 + 0.5) / k as f64;
        let amp: Complex64 = (-n..=n)
            .map(|m| psi.coeffs[(m + n) as usize] * Complex64::from_polar(1.0, m as f64 * th))
            .sum();
        acc += amp.norm_sqr();
    }
    acc * (PI / k as f64) / (2.0 * PI)
}

fn series(times: Vec<f64>, p: Vec<f64>) -> TimeSeries {
    TimeSeries { times, unit: TimeUnit::Dimensionless, p_plus: p }
}

#[test]
fn well_kernel_matches_quadrature() {
    let n = 6;
    let w = well_kernel(n);
    let k = 512;
    for a in 0..=2 * n {
        for b in 0..=2 * n {
            let dn = b as f64 - a as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..k {
                let th = PI * (j as f64 + 0.5) / k as f64;
                acc += Complex64::from_polar(1.0, dn * th);
            }
            let want = acc * (PI / k as f64) / (2.0 * PI);
            assert!((w[(a, b)] - want).norm() < 1e-5, "({a},{b})");
        }
    }
}

#[test]
fn well_probability_matches_grid_integration() {
    let s = table();
    let psi = doublet_state(&s).unwrap();
    let psi = evolve_state(&psi, &s, 1.3);
    assert!((well_probability(&psi) - p_plus_on_grid(&psi)).abs() < 1e-6);
}

#[test]
fn gaussian_packet_is_localized_left() {
    let psi = gaussian_packet(0.25, 20).unwrap();
    assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    let p_minus = 1.0 - well_probability(&psi);
    assert!(p_minus > 0.999999, "p_minus {p_minus}");
    assert!((well_probability(&psi) - p_plus_on_grid(&psi)).abs() < 1e-7);
}

#[test]
fn gaussian_packet_rejects_small_cutoff() {
    assert!(matches!(gaussian_packet(0.25, 5), Err(Error::Domain { .. })));
    assert!(matches!(gaussian_packet(0.02, 10), Err(Error::Numeric(_))));
    assert!(gaussian_packet(1.5, 20).is_err());
}

#[test]
fn doublet_state_tunnels() {
    let s = table();
    let psi = doublet_state(&s).unwrap();
    assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
    assert!(1.0 - well_probability(&psi) > 0.95);
    let half = PI / s.splitting();
    let later = evolve_state(&psi, &s, half);
    assert!(well_probability(&later) > 0.95);
    let back = evolve_state(&psi, &s, 2.0 * half);
    assert!((well_probability(&back) - well_probability(&psi)).abs() < 1e-10);
}

#[test]
fn two_level_oscillation_formula() {
    // Doublet-only state: p₊(t) = W̄ − |W01| cos(Δt) exactly.
    let s = table();
    let psi = doublet_state(&s).unwrap();
    let w = well_kernel(s.n_max);
    let w01 = s.vectors.column(0).dotc(&(&w * s.vectors.column(1))).norm();
    let times = time_grid(30.0, 200);
    let ts = evolve(&psi, &s, &times).unwrap();
    for (t, p) in times.iter().zip(&ts.p_plus) {
        let want = 0.5 - w01 * (s.splitting() * t).cos();
        assert!((p - want).abs() < 1e-10);
    }
}

#[test]
fn evolution_preserves_norm_and_energy() {
    let s = table();
    let h = build_hamiltonian(&DimensionlessConfig::new(V_TABLE, 0.0, 0.0, 20)).unwrap();
    let psi = gaussian_packet(0.3, 20).unwrap();
    let energy = |p: &StateVector| p.coeffs.dotc(&(&h * &p.coeffs)).re;
    let e0 = energy(&psi);
    for t in [0.1, 3.0, 50.0, 1e4] {
        let later = evolve_state(&psi, &s, t);
        assert!((later.norm_sqr() - 1.0).abs() < 1e-10);
        assert!((energy(&later) - e0).abs() < 1e-9 * e0.abs().max(1.0));
    }
}

#[test]
fn evolve_agrees_with_state_propagation() {
    let s = table();
    let psi = gaussian_packet(0.3, 20).unwrap();
    let times = time_grid(20.0, 41);
    let ts = evolve(&psi, &s, &times).unwrap();
    for (t, p) in times.iter().zip(&ts.p_plus) {
        assert!((well_probability(&evolve_state(&psi, &s, *t)) - p).abs() < 1e-10);
    }
    assert!(evolve(&psi, &s, &[0.0, 1.0, 0.5]).is_err());
}

#[test]
fn symmetric_state_stays_balanced() {
    let s = table();
    let psi = StateVector { n_max: s.n_max, coeffs: s.vectors.column(0).clone_owned() };
    let ts = evolve(&psi, &s, &time_grid(40.0, 100)).unwrap();
    assert!(ts.p_plus.iter().all(|p| (p - 0.5).abs() < 1e-10));
}

#[test]
fn visibility_of_ideal_cosine() {
    let period = 2.0 * PI;
    let times = time_grid(8.0 * period, 4001);
    let p = times.iter().map(|t| 0.5 + 0.25 * t.cos()).collect();
    let w = visibility_window(&series(times, p), period, 5.0).unwrap();
    assert!((w.value - 0.5).abs() < 1e-6);
    // t = 0 is an endpoint, so the first interior maximum is one period in.
    assert!((w.start.unwrap() - period).abs() < 0.02);
    assert!((w.end.unwrap() - w.start.unwrap() - 5.0 * period).abs() < 1e-9);
}

#[test]
fn first_maximum_skips_flat_noise() {
    assert_eq!(first_maximum(&[0.0, 1e-8, 0.0, 0.2, 0.1]), Some(3));
    assert_eq!(first_maximum(&[0.3, 0.2, 0.1]), None);
}

#[test]
fn relaxed_signal_has_no_visibility() {
    let times = time_grid(30.0, 300);
    let p = times.iter().map(|t| 0.5 - 0.5 * (-t).exp()).collect();
    assert_eq!(visibility(&series(times, p), 2.0 * PI).unwrap(), 0.0);
    let times = time_grid(30.0, 300);
    let flat = vec![0.5; times.len()];
    assert_eq!(visibility(&series(times, flat), 2.0 * PI).unwrap(), 0.0);
}

#[test]
fn short_window_is_an_error() {
    let times = time_grid(4.0, 200);
    let p = times.iter().map(|t| 0.5 - 0.25 * t.cos()).collect();
    let err = visibility(&series(times, p), 2.0 * PI).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
    assert!(visibility(&series(vec![0.0, 1.0], vec![0.0, 0.0]), 0.0).is_err());
}

#[test]
fn doublet_visibility_is_near_one() {
    let s = table();
    let psi = doublet_state(&s).unwrap();
    let period = 2.0 * PI / s.splitting();
    let ts = evolve(&psi, &s, &time_grid(7.0 * period, 3000)).unwrap();
    assert!(visibility(&ts, period).unwrap() > 0.9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn time_reversal(t in 0.0f64..500.0, sigma in 0.25f64..0.4, hz in -1.0f64..1.0) {
        let s = solve(&DimensionlessConfig::new(V_TABLE, 0.0, hz, 24)).unwrap();
        let psi = gaussian_packet(sigma, 24).unwrap();
        let back = evolve_state(&evolve_state(&psi, &s, t), &s, -t);
        prop_assert!((back.coeffs - psi.coeffs).norm() < 1e-9);
    }

    #[test]
    fn probabilities_stay_in_unit_interval(t in 0.0f64..1e3, sigma in 0.25f64..0.4, v0 in 0.0f64..20.0) {
        let s = solve(&DimensionlessConfig::new(v0, 0.0, 0.0, 24)).unwrap();
        let psi = evolve_state(&gaussian_packet(sigma, 24).unwrap(), &s, t);
        let p = well_probability(&psi);
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&p));
        prop_assert!((psi.norm_sqr() - 1.0).abs() < 1e-10);
    }
}
