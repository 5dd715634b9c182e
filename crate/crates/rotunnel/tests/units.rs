use approx::assert_relative_eq;
use proptest::prelude::*;
use rotunnel::units::{derive_scales, field_from_dimensionless, PhysicalParams};
use rotunnel::Error;

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn reference_table_entries() {
    let s = derive_scales(&PhysicalParams::table()).unwrap();
    assert!(rel(s.inertia, 1.257e-41) < 1e-3);
    assert!(rel(s.kinetic_energy, 4.425e-28) < 1e-3);
    assert!(rel(s.rate_scale, 4.196e6) < 1e-3);
    assert!(rel(s.barrier, 1.779e-27) < 1e-3);
    assert!(rel(s.v0, 4.02089) < 1e-5);
}

#[test]
fn scales_match_hand_evaluation() {
    // Independent evaluation with literal constants.
    let hbar = 1.054571817e-34;
    let mu0 = 4.0e-7 * std::f64::consts::PI * (1.0 + 5.5e-10);
    let zeta3 = 1.2020569031595942854;
    let r: f64 = 1e-9;
    let vol = 4.0 * std::f64::consts::PI / 3.0 * r.powi(3);
    let mu = 1e6 * vol;
    let inertia = 0.4 * 7.5e3 * vol * r * r;
    let ek = hbar * hbar / (2.0 * inertia);
    let v0 = mu0 * mu * mu * zeta3 / (8.0 * std::f64::consts::PI * 8.4e-8f64.powi(3));
    let s = derive_scales(&PhysicalParams::table()).unwrap();
    assert_relative_eq!(s.moment, mu, max_relative = 1e-14);
    assert_relative_eq!(s.inertia, inertia, max_relative = 1e-14);
    assert_relative_eq!(s.kinetic_energy, ek, max_relative = 1e-14);
    assert_relative_eq!(s.barrier, v0, max_relative = 1e-9);
    assert_relative_eq!(s.v0, v0 / ek, max_relative = 1e-9);
}

#[test]
fn zero_magnetization_is_free_rotor() {
    let p = PhysicalParams { magnetization: 0.0, ..PhysicalParams::table() };
    let s = derive_scales(&p).unwrap();
    assert_eq!(s.moment, 0.0);
    assert_eq!(s.barrier, 0.0);
    assert_eq!(s.v0, 0.0);
    assert!(matches!(field_from_dimensionless(0.3, &s), Err(Error::Domain { .. })));
}

#[test]
fn field_conversions() {
    let p = PhysicalParams { b_z: 3.169e-8, ..PhysicalParams::table() };
    let s = derive_scales(&p).unwrap();
    assert!((s.hz - 0.3).abs() < 1e-3);
    assert!(rel(field_from_dimensionless(0.3, &s).unwrap(), 3.169e-8) < 1e-3);
    assert_eq!(field_from_dimensionless(0.0, &s).unwrap(), 0.0);
    assert!(rel(field_from_dimensionless(1.0, &s).unwrap(), 1.0565e-7) < 5e-4);
}

#[test]
fn invalid_geometry_names_the_field() {
    let bad = |p: PhysicalParams, field: &str| match derive_scales(&p) {
        Err(Error::Domain { field: f, .. }) => assert_eq!(f, field),
        other => panic!("expected domain error on {field}, got {other:?}"),
    };
    let t = PhysicalParams::table();
    bad(PhysicalParams { radius: -1e-9, ..t }, "radius");
    bad(PhysicalParams { radius: 0.0, ..t }, "radius");
    bad(PhysicalParams { separation: 0.0, ..t }, "separation");
    bad(PhysicalParams { density: -1.0, ..t }, "density");
    bad(PhysicalParams { magnetization: -1.0, ..t }, "magnetization");
    bad(PhysicalParams { radius: 5e-8, ..t }, "radius");
}

#[test]
fn time_and_rate_conversions_round_trip() {
    let s = derive_scales(&PhysicalParams::table()).unwrap();
    let t = 1.19e-5;
    assert_relative_eq!(s.seconds(s.dimensionless_time(t)), t, max_relative = 1e-15);
    assert_relative_eq!(s.angular_frequency(1.0), s.rate_scale);
}

proptest! {
    #[test]
    fn magnetization_scaling(c in 0.1f64..10.0) {
        let t = PhysicalParams::table();
        let a = derive_scales(&t).unwrap();
        let b = derive_scales(&PhysicalParams { magnetization: c * t.magnetization, ..t }).unwrap();
        prop_assert!(rel(b.moment, c * a.moment) < 1e-12);
        prop_assert!(rel(b.barrier, c * c * a.barrier) < 1e-12);
        prop_assert!(rel(b.v0, c * c * a.v0) < 1e-12);
        prop_assert_eq!(b.inertia, a.inertia);
        prop_assert_eq!(b.kinetic_energy, a.kinetic_energy);
    }

    #[test]
    fn radius_scaling(c in 0.2f64..5.0) {
        let t = PhysicalParams::table();
        let a = derive_scales(&t).unwrap();
        let b = derive_scales(&PhysicalParams { radius: c * t.radius, ..t }).unwrap();
        prop_assert!(rel(b.inertia, c.powi(5) * a.inertia) < 1e-12);
        prop_assert!(rel(b.kinetic_energy, c.powi(-5) * a.kinetic_energy) < 1e-12);
    }

    #[test]
    fn field_round_trip(bx in -1e-6f64..1e-6, bz in -1e-6f64..1e-6) {
        let p = PhysicalParams { b_x: bx, b_z: bz, ..PhysicalParams::table() };
        let s = derive_scales(&p).unwrap();
        let back_x = field_from_dimensionless(s.hx, &s).unwrap();
        let back_z = field_from_dimensionless(s.hz, &s).unwrap();
        prop_assert!((back_x - bx).abs() <= 1e-12 * bx.abs().max(1e-300));
        prop_assert!((back_z - bz).abs() <= 1e-12 * bz.abs().max(1e-300));
    }
}
