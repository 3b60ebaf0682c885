mod common;

use battdispatch_core::characterization::{max_power, Mode};
use battdispatch_core::dispatch::BatterySchedule;
use battdispatch_core::reliability::{assess_battery, clip_to_limits, imbalance, realize_trajectory};
use battdispatch_core::{BatteryParams, FormulationKind};
use common::literal;
use proptest::prelude::*;

const CAP: f64 = 5320.0;

fn schedule(p_dis: Vec<f64>, p_cha: Vec<f64>, e1: f64, temperature: f64) -> BatterySchedule {
    let n = p_dis.len();
    BatterySchedule {
        node: 0,
        energy_capacity_wh: CAP,
        initial_energy_wh: e1,
        temperature,
        p_dis,
        p_cha,
        p_out: vec![0.0; n],
        p_in: vec![0.0; n],
        energy: vec![e1; n],
        soc: vec![e1 / CAP; n],
        dis_weights: Vec::new(),
        cha_weights: Vec::new(),
    }
}

/// Stored-energy change for terminal power `p`: the open-circuit voltage
/// times the current solving `p = v i -/+ i^2 R`.
fn internal_power(p: &BatteryParams, soc: f64, t: f64, power: f64, discharge: bool) -> f64 {
    let v = literal::v_eq(p, soc, t);
    let r = literal::r_tot(p, soc, t);
    let i = if discharge {
        (v - (v * v - 4.0 * r * power).sqrt()) / (2.0 * r)
    } else {
        (-v + (v * v + 4.0 * r * power).sqrt()) / (2.0 * r)
    };
    v * i
}

#[test]
fn realized_energy_matches_sequential_oracle() {
    let p = BatteryParams::synthetic_default();
    let t = 283.15;
    let dt = 0.25;
    let p_dis = vec![0.0, 4000.0, 0.0, 9000.0, 2500.0, 0.0];
    let p_cha = vec![3000.0, 0.0, 1500.0, 0.0, 0.0, 6000.0];
    let b = schedule(p_dis.clone(), p_cha.clone(), 2660.0, t);
    let clipped = clip_to_limits(&b, &p, t, dt).unwrap();
    let e = realize_trajectory(&clipped, 2660.0, CAP, &p, t, dt).unwrap();

    let mut energy = 2660.0;
    for k in 0..p_dis.len() {
        assert!((e[k] - energy).abs() < 1e-9 * CAP, "step {k}: {} vs {energy}", e[k]);
        let soc = (energy / CAP).clamp(0.0, 1.0);
        let dis = p_dis[k].min(max_power(&p, soc, t, Mode::Discharge).unwrap().watts);
        let cha = p_cha[k].min(max_power(&p, soc, t, Mode::Charge).unwrap().watts);
        assert!((clipped.p_dis[k] - dis).abs() < 1e-9 && (clipped.p_cha[k] - cha).abs() < 1e-9);
        if cha > 0.0 {
            energy += internal_power(&p, soc, t, cha, false) * dt;
        }
        if dis > 0.0 {
            energy -= internal_power(&p, soc, t, dis, true) * dt;
        }
    }
}

#[test]
fn oversized_request_is_flagged_and_clipped() {
    let p = BatteryParams::synthetic_default();
    let b = schedule(vec![1e6, 0.0], vec![0.0, 0.0], 0.5 * CAP, p.t_ref);
    let r = assess_battery(&b, 0, FormulationKind::Ideal, &p, 0.1).unwrap();
    let cap = max_power(&p, 0.5, p.t_ref, Mode::Discharge).unwrap().watts;
    assert_eq!(r.clipped_steps, 1);
    assert!((r.clipped.p_dis[0] - cap).abs() < 1e-9);
    assert!((r.max_violation - (1e6 - cap)).abs() < 1e-6);
    assert!(r.imbalance_wh < 0.0);
}

#[test]
fn empty_horizon_reports_zero() {
    let p = BatteryParams::synthetic_default();
    let b = schedule(vec![], vec![], 1000.0, p.t_ref);
    let r = assess_battery(&b, 0, FormulationKind::Envelope, &p, 1.0).unwrap();
    assert!(r.e_real.is_empty());
    assert_eq!(r.imbalance_wh, 0.0);
    assert_eq!(r.imbalance_fraction, 0.0);
    assert_eq!(imbalance(&[], &[]).unwrap(), (0.0, 0.0));
}

#[test]
fn mismatched_trajectories_are_rejected() {
    assert!(imbalance(&[1.0, 2.0], &[1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn clipping_never_increases_power(
        p_dis in prop::collection::vec(0.0f64..3e4, 1..12),
        p_cha in prop::collection::vec(0.0f64..1e4, 1..12),
        soc0 in 0.05f64..0.95,
        dt in 0.05f64..0.5,
    ) {
        let n = p_dis.len().min(p_cha.len());
        let p = BatteryParams::synthetic_default();
        let b = schedule(p_dis[..n].to_vec(), p_cha[..n].to_vec(), soc0 * CAP, p.t_ref);
        let c = clip_to_limits(&b, &p, p.t_ref, dt).unwrap();
        for k in 0..n {
            prop_assert!(c.p_dis[k] <= b.p_dis[k] && c.p_dis[k] >= 0.0);
            prop_assert!(c.p_cha[k] <= b.p_cha[k] && c.p_cha[k] >= 0.0);
            let cut = (b.p_dis[k] - c.p_dis[k]) + (b.p_cha[k] - c.p_cha[k]);
            prop_assert!((c.violation[k] - cut).abs() <= 1e-9 * cut.max(1.0));
        }
    }

    #[test]
    fn idle_schedule_keeps_energy(n in 0usize..20, soc0 in 0.0f64..=1.0, dt in 0.01f64..1.0) {
        let p = BatteryParams::synthetic_default();
        let b = schedule(vec![0.0; n], vec![0.0; n], soc0 * CAP, p.t_ref);
        let r = assess_battery(&b, 0, FormulationKind::Ideal, &p, dt).unwrap();
        prop_assert!(r.e_real.iter().all(|e| *e == soc0 * CAP));
        prop_assert_eq!(r.imbalance_wh, 0.0);
        prop_assert_eq!(r.imbalance_fraction, 0.0);
    }

    #[test]
    fn imbalance_is_the_summed_gap(
        pairs in prop::collection::vec((0.0f64..1e4, 0.0f64..1e4), 1..30),
    ) {
        let (sched, real): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (total, fraction) = imbalance(&sched, &real).unwrap();
        let gap: f64 = real.iter().zip(&sched).map(|(r, s)| r - s).sum();
        let stored: f64 = sched.iter().sum();
        prop_assert!((total - gap).abs() <= 1e-9 * stored.max(1.0));
        if stored > 0.0 {
            prop_assert!((fraction - gap.abs() / stored).abs() <= 1e-12 * fraction.max(1.0));
        }
    }

    #[test]
    fn matching_trajectories_have_no_imbalance(e in prop::collection::vec(0.0f64..1e4, 0..30)) {
        prop_assert_eq!(imbalance(&e, &e).unwrap(), (0.0, 0.0));
    }
}
