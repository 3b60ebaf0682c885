//! Acceptance runner: one PASS/FAIL line per criterion, with wall time
//! against the allowed limit. Exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use battdispatch_core::characterization::{
    efficiency, envelope_error, max_current, sample_surface, EvaluationGrid, HullInterpolator, SamplingGrid,
};
use battdispatch_core::dispatch::{build_dispatch, solve_dispatch, verify_schedule, BuildOptions, DispatchOptions};
use battdispatch_core::electrochem::{redlich_kister, DiffusionPath};
use battdispatch_core::optim::{export_mps, import_mps, solve_lp, solve_milp, MilpOptions};
use battdispatch_core::reliability::{assess, assess_battery};
use battdispatch_core::{
    BatteryFormulation, BatteryParams, DispatchSchedule, FormulationKind, Mode, NetworkCase, SolverOptions, Status,
};
use common::{enumeration_oracle, literal, random_lp, random_mip, random_mps_model, same_digits, vertex_oracle};
use rand::Rng;

type Check = std::result::Result<String, String>;

struct Outcome {
    result: Check,
    /// Time charged against the limit when it differs from the wall time.
    timed: Option<Duration>,
}

impl From<Check> for Outcome {
    fn from(result: Check) -> Self {
        Outcome { result, timed: None }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn params() -> BatteryParams {
    BatteryParams::synthetic_default()
}

fn rel(a: f64, b: f64) -> f64 {
    if b.abs() < 1e-12 {
        (a - b).abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn electrochem_oracle() -> Check {
    let p = params();
    let mut r = common::rng(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let soc: f64 = r.random_range(0.0..=1.0);
        let t: f64 = p.t_ref + r.random_range(-15.0..15.0);
        let i: f64 = r.random_range(0.0..p.admissible_current());
        let e = |x: battdispatch_core::Result<f64>| x.map_err(|e| e.to_string());
        let pairs = [
            (e(p.equilibrium_voltage(soc, t))?, literal::v_eq(&p, soc, t)),
            (e(p.ohmic_resistance(soc, t))?, literal::r_ohm(&p, soc, t)),
            (e(p.charge_transfer_resistance(soc, t))?, literal::r_ct(&p, soc, t)),
            (e(p.diffusion_resistance(t, DiffusionPath::Membrane))?, literal::r_mem(&p, t)),
            (e(p.diffusion_resistance(t, DiffusionPath::Electrode))?, literal::r_elec(&p, t)),
            (e(p.total_resistance(soc, t))?, literal::r_tot(&p, soc, t)),
            (e(p.coulombic_efficiency(i, t))?, literal::eta_c(&p, i, t)),
            (e(p.surface_soc(soc, i, t))?, literal::surface_soc(&p, soc, i, t)),
            (e(p.surface_soc(soc, -i, t))?, literal::surface_soc(&p, soc, -i, t)),
        ];
        for (got, want) in pairs {
            worst = worst.max(rel(got, want));
        }
    }
    ensure(worst <= 1e-10, || format!("worst relative error {worst:e}"))?;
    let mut jump = 0.0f64;
    for _ in 0..200 {
        let a: [f64; 7] = std::array::from_fn(|_| r.random_range(-1e5..1e5));
        let at = redlich_kister(0.5, &a).map_err(|e| e.to_string())?;
        for chi in [0.5 - 1e-7, 0.5 + 1e-7] {
            jump = jump.max((redlich_kister(chi, &a).map_err(|e| e.to_string())? - at).abs());
        }
    }
    ensure(jump <= 1e-6, || format!("interaction term jumps by {jump:e} at 0.5"))?;
    Ok(format!("worst rel {worst:.1e}; jump at 0.5 {jump:.1e}"))
}

fn limit_roots() -> Check {
    let p = params();
    let t = p.t_ref;
    let mut worst = 0.0f64;
    let mut binding = (0, 0);
    for k in 1..=99 {
        let soc = k as f64 / 100.0;
        for mode in [Mode::Discharge, Mode::Charge] {
            let lim = max_current(&p, soc, t, mode).map_err(|e| e.to_string())?;
            let (signed, target, rate) = match mode {
                Mode::Discharge => (lim.root, 0.0, p.c_rate_dis),
                Mode::Charge => (-lim.root, 1.0, p.c_rate_cha),
            };
            worst = worst.max((literal::surface_soc(&p, soc, signed, t) - target).abs());
            let cap = rate * p.capacity_ah;
            if lim.root > cap {
                ensure(lim.limit == cap, || format!("{mode:?} cap at soc {soc}: {} != {cap}", lim.limit))?;
                match mode {
                    Mode::Discharge => binding.0 += 1,
                    Mode::Charge => binding.1 += 1,
                }
            } else {
                ensure(lim.limit == lim.root, || format!("{mode:?} root not used at soc {soc}"))?;
            }
        }
    }
    ensure(worst <= 1e-9, || format!("surface SOC off boundary by {worst:e}"))?;
    Ok(format!(
        "worst surface gap {worst:.1e}; caps bind at {} discharge / {} charge points",
        binding.0, binding.1
    ))
}

fn efficiency_identities() -> Check {
    let p = params();
    let mut r = common::rng(77);
    for k in 0..=20 {
        let soc = k as f64 / 20.0;
        for mode in [Mode::Discharge, Mode::Charge] {
            let e = efficiency(&p, soc, 0.0, p.t_ref, mode).map_err(|e| e.to_string())?;
            ensure(e == 1.0, || format!("{mode:?} efficiency at zero current is {e}"))?;
        }
    }
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let soc = r.random_range(0.2..0.95);
        let t = p.t_ref + r.random_range(-10.0..10.0);
        let imax = max_current(&p, soc, t, Mode::Discharge).map_err(|e| e.to_string())?.limit;
        let f = |i: f64| efficiency(&p, soc, i, t, Mode::Discharge).map_err(|e| e.to_string());
        let (i1, i2) = (0.1 * imax, 0.9 * imax);
        let slope = (f(i2)? - f(i1)?) / (i2 - i1);
        let want = -literal::r_tot(&p, soc, t) / literal::v_eq(&p, soc, t);
        ensure(slope < 0.0, || "discharge efficiency not decreasing".into())?;
        worst = worst.max((slope - want).abs() / want.abs());
    }
    ensure(worst <= 1e-9, || format!("slope off by {worst:e}"))?;
    Ok(format!("eta(0) = 1 exactly; slope rel error {worst:.1e}"))
}

fn envelope_quality() -> Check {
    let p = params();
    let t = p.t_ref;
    let eval = EvaluationGrid::default();
    let mut reports = Vec::new();
    for mode in [Mode::Discharge, Mode::Charge] {
        let set = sample_surface(&p, mode, &SamplingGrid::default_for(mode), t).map_err(|e| e.to_string())?;
        let expected = if mode == Mode::Discharge { 14 } else { 20 };
        ensure(set.samples.len() == expected, || format!("{mode:?}: {} samples", set.samples.len()))?;
        let hull = HullInterpolator::new(&set);
        let mut vertex = 0.0f64;
        for s in &set.samples {
            let got = hull
                .interpolate(s.soc, s.p_terminal)
                .map_err(|e| e.to_string())?
                .ok_or_else(|| format!("{mode:?} vertex outside its own hull"))?;
            vertex = vertex.max((got - s.p_internal).abs() / s.p_internal.max(1.0));
        }
        ensure(vertex <= 1e-9, || format!("{mode:?} vertex error {vertex:e}"))?;

        let levels = [
            vec![1.0 / 3.0, 2.0 / 3.0, 1.0],
            SamplingGrid::default_for(mode).power_fraction,
            (1..=12).map(|k| k as f64 / 12.0).collect(),
        ];
        let mut prev = f64::INFINITY;
        for fractions in levels {
            let grid = SamplingGrid {
                power_fraction: fractions,
                ..SamplingGrid::default_for(mode)
            };
            let set = sample_surface(&p, mode, &grid, t).map_err(|e| e.to_string())?;
            let rep = envelope_error(&set, &p, t, &eval).map_err(|e| e.to_string())?;
            ensure(rep.max_rel_error <= prev + 1e-12, || {
                format!("{mode:?}: refining raised max error {prev} -> {}", rep.max_rel_error)
            })?;
            prev = rep.max_rel_error;
        }
        let set = sample_surface(&p, mode, &SamplingGrid::default_for(mode), t).map_err(|e| e.to_string())?;
        let rep = envelope_error(&set, &p, t, &eval).map_err(|e| e.to_string())?;
        ensure(
            rep.max_rel_error.is_finite() && rep.mean_rel_error.is_finite() && rep.std_rel_error.is_finite(),
            || format!("{mode:?} report not finite"),
        )?;
        reports.push(rep);
    }
    let (d, c) = (&reports[0], &reports[1]);
    ensure(c.max_rel_error < d.max_rel_error, || {
        format!("charge max {} >= discharge max {}", c.max_rel_error, d.max_rel_error)
    })?;
    Ok(format!(
        "discharge max/mean/std {:.2}%/{:.2}%/{:.2}%, charge {:.2}%/{:.2}%/{:.2}%",
        100.0 * d.max_rel_error,
        100.0 * d.mean_rel_error,
        100.0 * d.std_rel_error,
        100.0 * c.max_rel_error,
        100.0 * c.mean_rel_error,
        100.0 * c.std_rel_error
    ))
}

fn solver_correctness() -> Check {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-7 * a.abs().max(b.abs()).max(1.0);
    let mut infeasible = 0;
    for seed in 0..200u64 {
        let lp = random_lp(seed);
        let sol = solve_lp(&lp, &SolverOptions::default()).map_err(|e| format!("lp {seed}: {e}"))?;
        match vertex_oracle(&lp) {
            Some((obj, _)) => ensure(sol.status == Status::Optimal && close(sol.objective, obj), || {
                format!("lp {seed}: {} {} vs {obj}", sol.status, sol.objective)
            })?,
            None => {
                infeasible += 1;
                ensure(sol.status == Status::Infeasible, || format!("lp {seed}: {} vs infeasible", sol.status))?
            }
        }
    }
    for seed in 0..50u64 {
        let mip = random_mip(1000 + seed, 1 + (seed as usize % 12));
        let sol = solve_milp(&mip, &MilpOptions::default()).map_err(|e| format!("mip {seed}: {e}"))?;
        let oracle = enumeration_oracle(&mip).ok_or_else(|| format!("mip {seed}: oracle infeasible"))?;
        ensure(sol.status == Status::Optimal && close(sol.objective, oracle), || {
            format!("mip {seed}: {} vs {oracle}", sol.objective)
        })?;
    }
    Ok(format!("200 LPs ({infeasible} infeasible) and 50 MIPs agree with enumeration"))
}

fn shipped(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../testcases").join(name).join("case.json")
}

fn formulations(case: &NetworkCase, kind: FormulationKind) -> std::result::Result<Vec<BatteryFormulation>, String> {
    case.batteries
        .iter()
        .map(|b| BatteryFormulation::for_kind(kind, &b.params, b.temperature).map_err(|e| e.to_string()))
        .collect()
}

fn run(case: &NetworkCase, kind: FormulationKind) -> std::result::Result<DispatchSchedule, String> {
    let forms = formulations(case, kind)?;
    let model = build_dispatch(case, &forms, &BuildOptions::default()).map_err(|e| e.to_string())?;
    solve_dispatch(case, &model, &DispatchOptions::default()).map_err(|e| format!("{kind:?}: {e}"))
}

fn dispatch_residuals() -> Check {
    let case = NetworkCase::load(shipped("rts24")).map_err(|e| e.to_string())?;
    ensure(case.horizon() == 144, || format!("{} steps", case.horizon()))?;
    let forms = formulations(&case, FormulationKind::Envelope)?;
    let model = build_dispatch(&case, &forms, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let opts = DispatchOptions {
        verify_tolerance: 1e-6,
        ..DispatchOptions::default()
    };
    let s = solve_dispatch(&case, &model, &opts).map_err(|e| e.to_string())?;
    let r = verify_schedule(&case, &model, &s);
    let (family, worst) = r.worst();
    ensure(worst <= 1e-6, || format!("{family} residual {worst:e}"))?;
    ensure(r.simultaneous <= 1e-6, || format!("simultaneous ratio {:e}", r.simultaneous))?;
    Ok(format!(
        "worst residual {worst:.1e} ({family}); simultaneous {:.1e}; objective {:.3}",
        r.simultaneous, s.objective
    ))
}

fn case_comparison() -> Check {
    let case = NetworkCase::load(shipped("rts24")).map_err(|e| e.to_string())?;
    let ideal = run(&case, FormulationKind::Ideal)?.objective;
    let envelope = run(&case, FormulationKind::Envelope)?.objective;
    let spread = (ideal - envelope).abs() / ideal.abs().min(envelope.abs());
    ensure(spread <= 1e-3, || format!("ideal {ideal} vs envelope {envelope}: {:.4}%", 100.0 * spread))?;

    let short = case.truncated(24);
    let forms = formulations(&short, FormulationKind::MilpTriangle)?;
    let model = build_dispatch(&short, &forms, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let relaxed = solve_lp(&model.program.lp, &SolverOptions::default()).map_err(|e| e.to_string())?;
    ensure(relaxed.status == Status::Optimal, || format!("relaxation {}", relaxed.status))?;
    let milp = solve_dispatch(&short, &model, &DispatchOptions::default()).map_err(|e| e.to_string())?;
    ensure(milp.objective >= relaxed.objective - 1e-7 * relaxed.objective.abs(), || {
        format!("milp {} below relaxation {}", milp.objective, relaxed.objective)
    })?;
    Ok(format!(
        "ideal {ideal:.3}, envelope {envelope:.3} (spread {:.4}%); milp(24) {:.3} >= relaxed {:.3}",
        100.0 * spread,
        milp.objective,
        relaxed.objective
    ))
}

fn reliability_metric() -> Outcome {
    let prep = Instant::now();
    let solved = (|| -> std::result::Result<_, String> {
        let case = NetworkCase::load(shipped("rts24-stressed")).map_err(|e| e.to_string())?;
        let ideal = run(&case, FormulationKind::Ideal)?;
        let envelope = run(&case, FormulationKind::Envelope)?;
        Ok((case, ideal, envelope))
    })();
    let solve_time = prep.elapsed();
    let (case, ideal, envelope) = match solved {
        Ok(v) => v,
        Err(e) => return Outcome::from(Err(e)),
    };
    let start = Instant::now();
    let result = (|| -> Check {
        let params: Vec<BatteryParams> = case.batteries.iter().map(|b| b.params.clone()).collect();
        let temperature = case.batteries[0].temperature;
        let ideal_rep = assess(&ideal, &params).map_err(|e| e.to_string())?;
        let env_rep = assess(&envelope, &params).map_err(|e| e.to_string())?;
        let clipped: usize = ideal_rep.iter().map(|r| r.clipped_steps).sum();
        let ideal_frac = ideal_rep.iter().map(|r| r.imbalance_fraction).fold(0.0, f64::max);
        ensure(clipped > 0, || "ideal schedule was never clipped".into())?;
        ensure(ideal_frac >= 0.10, || format!("ideal imbalance {:.2}% is not double-digit", 100.0 * ideal_frac))?;

        let mut mean = 0.0f64;
        for mode in [Mode::Discharge, Mode::Charge] {
            let p = &params[0];
            let set = sample_surface(p, mode, &SamplingGrid::default_for(mode), temperature).map_err(|e| e.to_string())?;
            let rep = envelope_error(&set, p, temperature, &EvaluationGrid::default()).map_err(|e| e.to_string())?;
            mean = mean.max(rep.mean_rel_error);
        }
        let env_frac = env_rep.iter().map(|r| r.imbalance_fraction).fold(0.0, f64::max);
        ensure(env_frac <= 2.0 * mean, || {
            format!("envelope imbalance {:.3}% > 2 x mean error {:.3}%", 100.0 * env_frac, 100.0 * mean)
        })?;

        // a schedule whose energy is the nonlinear model's own trajectory
        let mut feasible = env_rep[0].clone();
        let mut battery = envelope.batteries[0].clone();
        battery.p_dis = feasible.clipped.p_dis.clone();
        battery.p_cha = feasible.clipped.p_cha.clone();
        battery.energy = std::mem::take(&mut feasible.e_real);
        let rep = assess_battery(&battery, 0, FormulationKind::Envelope, &params[0], case.time_step_h)
            .map_err(|e| e.to_string())?;
        ensure(rep.imbalance_wh == 0.0 && rep.imbalance_fraction == 0.0 && rep.clipped_steps == 0, || {
            format!("feasible schedule gave {} Wh, {} clipped", rep.imbalance_wh, rep.clipped_steps)
        })?;
        Ok(format!(
            "ideal {clipped} clipped steps, {:.2}%; envelope {:.3}% <= 2 x {:.3}%; feasible 0 (solves took {:.1} s, untimed)",
            100.0 * ideal_frac,
            100.0 * env_frac,
            100.0 * mean,
            solve_time.as_secs_f64()
        ))
    })();
    Outcome {
        result,
        timed: Some(start.elapsed()),
    }
}

fn mps_round_trip() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for seed in 0..100u64 {
        let a = random_mps_model(seed);
        let path = dir.path().join(format!("m{seed}.mps"));
        export_mps(&a, &path).map_err(|e| e.to_string())?;
        let b = import_mps(&path).map_err(|e| e.to_string())?;
        let fail = |what: &str| format!("seed {seed}: {what}");
        ensure(a.binaries() == b.binaries(), || fail("integrality"))?;
        ensure(a.lp.variables.len() == b.lp.variables.len(), || fail("column count"))?;
        ensure(a.lp.constraints.len() == b.lp.constraints.len(), || fail("row count"))?;
        for (x, y) in a.lp.variables.iter().zip(&b.lp.variables) {
            ensure(
                x.name == y.name
                    && same_digits(x.cost, y.cost, 12)
                    && same_digits(x.lower, y.lower, 12)
                    && same_digits(x.upper, y.upper, 12),
                || fail(&format!("column {}", x.name)),
            )?;
        }
        for (r, s) in a.lp.constraints.iter().zip(&b.lp.constraints) {
            let mut u = r.coeffs.clone();
            let mut v = s.coeffs.clone();
            u.sort_by_key(|c| c.0);
            v.sort_by_key(|c| c.0);
            ensure(
                r.name == s.name
                    && r.sense == s.sense
                    && same_digits(r.rhs, s.rhs, 12)
                    && u.len() == v.len()
                    && u.iter().zip(&v).all(|(p, q)| p.0 == q.0 && same_digits(p.1, q.1, 12)),
                || fail(&format!("row {}", r.name)),
            )?;
        }
    }
    Ok("100 models equal to 12 significant digits".into())
}

/// Number, name, time limit in seconds, check.
type Criterion = (u32, &'static str, Option<f64>, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: Vec<Criterion> = vec![
        (1, "electrochemical oracle", Some(5.0), || electrochem_oracle().into()),
        (2, "limit-root back-substitution", Some(1.0), || limit_roots().into()),
        (3, "efficiency identities", None, || efficiency_identities().into()),
        (4, "envelope quality", Some(30.0), || envelope_quality().into()),
        (5, "LP/MILP correctness", Some(120.0), || solver_correctness().into()),
        (6, "dispatch constraint verification", Some(120.0), || dispatch_residuals().into()),
        (7, "case comparison", None, || case_comparison().into()),
        (8, "reliability metric", Some(10.0), reliability_metric),
        (9, "MPS round trip", None, || mps_round_trip().into()),
    ];
    let mut failed = 0;
    for (n, name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let secs = outcome.timed.unwrap_or_else(|| start.elapsed()).as_secs_f64();
        let over = limit.is_some_and(|l| secs > l);
        let limit_text = limit.map_or("no limit".to_string(), |l| format!("limit {l} s"));
        let (verdict, detail) = match (&outcome.result, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("too slow; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {n} {verdict} [{secs:.2} s, {limit_text}] {name}: {detail}");
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
