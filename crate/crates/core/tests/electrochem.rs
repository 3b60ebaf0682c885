mod common;

use battdispatch_core::electrochem::{molar_fractions, redlich_kister, DiffusionPath};
use battdispatch_core::BatteryParams;
use common::literal;
use proptest::prelude::*;
use rand::Rng;

fn params() -> BatteryParams {
    BatteryParams::synthetic_default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn thousand_random_points_match_literal_formulas() {
    let p = params();
    let mut r = common::rng(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let soc: f64 = r.random_range(0.0..=1.0);
        let t: f64 = p.t_ref + r.random_range(-15.0..15.0);
        let i: f64 = r.random_range(0.0..p.admissible_current());
        let checks = [
            (p.equilibrium_voltage(soc, t).unwrap(), literal::v_eq(&p, soc, t)),
            (p.ohmic_resistance(soc, t).unwrap(), literal::r_ohm(&p, soc, t)),
            (p.charge_transfer_resistance(soc, t).unwrap(), literal::r_ct(&p, soc, t)),
            (p.diffusion_resistance(t, DiffusionPath::Membrane).unwrap(), literal::r_mem(&p, t)),
            (p.diffusion_resistance(t, DiffusionPath::Electrode).unwrap(), literal::r_elec(&p, t)),
            (p.total_resistance(soc, t).unwrap(), literal::r_tot(&p, soc, t)),
            (p.coulombic_efficiency(i, t).unwrap(), literal::eta_c(&p, i, t)),
            (p.surface_soc(soc, i, t).unwrap(), literal::surface_soc(&p, soc, i, t)),
            (p.surface_soc(soc, -i, t).unwrap(), literal::surface_soc(&p, soc, -i, t)),
        ];
        for (k, (got, want)) in checks.into_iter().enumerate() {
            let e = if want.abs() < 1e-12 { (got - want).abs() } else { rel(got, want) };
            assert!(e <= 1e-10, "check {k} at soc={soc} T={t} i={i}: {got} vs {want}");
            worst = worst.max(e);
        }
    }
    assert!(worst <= 1e-10);
}

#[test]
fn interaction_term_off_the_singular_point_matches_divided_form() {
    let mut r = common::rng(11);
    for _ in 0..200 {
        let a: [f64; 7] = std::array::from_fn(|_| r.random_range(-5e4..5e4));
        let chi = 0.6;
        let got = redlich_kister(chi, &a).unwrap();
        let want = literal::redlich_kister(chi, &a);
        assert!((got - want).abs() <= 1e-10 * want.abs().max(1e-3), "{got} vs {want}");
    }
}

#[test]
fn interaction_term_at_half_keeps_only_second_coefficient() {
    let mut a = [0.0; 7];
    a[1] = common::FARADAY;
    assert!((redlich_kister(0.5, &a).unwrap() + 0.5).abs() < 1e-15);
    let mut r = common::rng(3);
    let a: [f64; 7] = std::array::from_fn(|_| r.random_range(-5e4..5e4));
    let limit = -2.0 * 0.5 * 0.5 * a[1] / common::FARADAY;
    assert!((redlich_kister(0.5, &a).unwrap() - limit).abs() < 1e-12);
}

#[test]
fn nernst_term_vanishes_where_fractions_meet() {
    let mut p = params();
    p.a_and = [0.0; 7];
    p.a_ctd = [0.0; 7];
    let soc = 0.917 / 1.617;
    let f = molar_fractions(soc).unwrap();
    assert!((f.anode - f.cathode).abs() < 1e-15);
    assert!((p.equilibrium_voltage(soc, 298.15).unwrap() - p.u_bat0).abs() < 1e-12);
}

#[test]
fn charge_transfer_minimum_sits_at_largest_fraction_product() {
    let p = params();
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 / 1000.0).collect();
    let argmin_r = grid
        .iter()
        .copied()
        .min_by(|a, b| {
            let ra = p.charge_transfer_resistance(*a, 298.15).unwrap();
            let rb = p.charge_transfer_resistance(*b, 298.15).unwrap();
            ra.total_cmp(&rb)
        })
        .unwrap();
    let argmax_prod = grid
        .iter()
        .copied()
        .max_by(|a, b| {
            let (xa, ya) = literal::fractions(*a);
            let (xb, yb) = literal::fractions(*b);
            (xa * ya).total_cmp(&(xb * yb))
        })
        .unwrap();
    assert_eq!(argmin_r, argmax_prod);
}

#[test]
fn resistance_positive_and_rising_toward_empty() {
    let p = params();
    for k in 1..=99 {
        let soc = k as f64 / 100.0;
        for dt in [-10.0, -5.0, 0.0, 5.0, 10.0] {
            assert!(p.total_resistance(soc, p.t_ref + dt).unwrap() > 0.0);
        }
    }
    let low = p.total_resistance(0.01, p.t_ref).unwrap();
    let mid = p.total_resistance(0.5, p.t_ref).unwrap();
    assert!(low > mid);
}

#[test]
fn equilibrium_voltage_increases_on_dense_grid() {
    let p = params();
    let mut prev = f64::NEG_INFINITY;
    for k in 0..=1000 {
        let v = p.equilibrium_voltage(k as f64 / 1000.0, p.t_ref).unwrap();
        assert!(v > prev, "not increasing at soc={}", k as f64 / 1000.0);
        prev = v;
    }
}

#[test]
fn shipped_parameter_file_validates() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/default_battery.json");
    let p = BatteryParams::load(path).unwrap();
    assert_eq!(p, params());
    assert!(p.label.as_deref().unwrap().contains("Not measured"));
}

proptest! {
    #[test]
    fn interaction_term_is_continuous_at_half(a in prop::array::uniform7(-1e5f64..1e5), side in prop::bool::ANY) {
        let at = redlich_kister(0.5, &a).unwrap();
        let near = redlich_kister(if side { 0.5 + 1e-7 } else { 0.5 - 1e-7 }, &a).unwrap();
        prop_assert!((near - at).abs() <= 1e-6 * at.abs().max(1.0));
    }

    #[test]
    fn ohmic_resistance_is_affine_in_soc(a in 0.0f64..=1.0, b in 0.0f64..=1.0, t in 280.0f64..320.0) {
        let p = params();
        let mid = p.ohmic_resistance(0.5 * a + 0.5 * b, t).unwrap();
        let avg = 0.5 * p.ohmic_resistance(a, t).unwrap() + 0.5 * p.ohmic_resistance(b, t).unwrap();
        prop_assert!((mid - avg).abs() <= 1e-14 * avg.abs().max(1.0));
    }

    #[test]
    fn coulombic_efficiency_is_affine_in_current(a in 0.0f64..200.0, b in 0.0f64..200.0, t in 280.0f64..320.0) {
        let p = params();
        let mid = p.coulombic_efficiency(0.5 * a + 0.5 * b, t).unwrap();
        let avg = 0.5 * p.coulombic_efficiency(a, t).unwrap() + 0.5 * p.coulombic_efficiency(b, t).unwrap();
        prop_assert!((mid - avg).abs() <= 1e-14);
    }

    #[test]
    fn coulombic_efficiency_in_unit_interval(i in 0.0f64..=200.0, dt in -10.0f64..10.0) {
        let p = params();
        let e = p.coulombic_efficiency(i, p.t_ref + dt).unwrap();
        prop_assert!(e > 0.0 && e <= 1.0);
    }

    #[test]
    fn surface_soc_decreases_in_signed_current(soc in 0.0f64..=1.0, i in -40.0f64..200.0, d in 1e-3f64..10.0) {
        let p = params();
        let t = p.t_ref;
        prop_assert!(p.surface_soc(soc, i + d, t).unwrap() < p.surface_soc(soc, i, t).unwrap());
    }

    #[test]
    fn doubling_interface_area_halves_charge_transfer(soc in 0.0f64..=1.0, t in 280.0f64..320.0) {
        let p = params();
        let mut q = p.clone();
        q.a_sei *= 2.0;
        let r = p.charge_transfer_resistance(soc, t).unwrap();
        let r2 = q.charge_transfer_resistance(soc, t).unwrap();
        prop_assert!((r2 - 0.5 * r).abs() <= 1e-14 * r);
    }

    #[test]
    fn out_of_range_soc_is_a_domain_error(soc in prop_oneof![-10.0f64..-1e-12, 1.0 + 1e-12..10.0]) {
        prop_assert!(molar_fractions(soc).is_err());
        prop_assert!(params().equilibrium_voltage(soc, 298.15).is_err());
    }
}
