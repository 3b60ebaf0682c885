//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the algorithms it is used to check.
#![allow(dead_code)]

use battdispatch_core::optim::{LinearProgram, MixedIntegerProgram, Sense};
use battdispatch_core::BatteryParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const GAS: f64 = 8.314_462_618;
pub const FARADAY: f64 = 96_485.332_12;

/// Literal circuit-model formulas, written from the printed equations.
pub mod literal {
    use super::*;

    fn clamp(chi: f64) -> f64 {
        chi.clamp(1e-6, 1.0 - 1e-6)
    }

    pub fn fractions(soc: f64) -> (f64, f64) {
        (clamp(0.083 + 0.917 * soc), clamp(1.0 - 0.7 * soc))
    }

    /// Interaction term in its original divided form; undefined at 0.5.
    pub fn redlich_kister(chi: f64, a: &[f64; 7]) -> f64 {
        let u = 2.0 * chi - 1.0;
        let mut total = 0.0;
        for k in 1..=7i32 {
            let first = u.powi(k);
            let second = 2.0 * chi * (k - 1) as f64 * (1.0 - chi) / u.powi(2 - k);
            total += a[(k - 1) as usize] * (first - second);
        }
        total / FARADAY
    }

    pub fn v_eq(p: &BatteryParams, soc: f64, t: f64) -> f64 {
        let (and, ctd) = fractions(soc);
        let nernst = GAS * t / FARADAY * ((1.0 - ctd) * and / (ctd * (1.0 - and))).ln();
        p.u_bat0 + nernst + redlich_kister(ctd, &p.a_ctd) - redlich_kister(and, &p.a_and)
    }

    pub fn r_ohm(p: &BatteryParams, soc: f64, t: f64) -> f64 {
        p.r_ohm_0 + p.r_ohm_t * t + p.r_ohm_soc * soc
    }

    pub fn r_ct(p: &BatteryParams, soc: f64, t: f64) -> f64 {
        let (and, ctd) = fractions(soc);
        let e_a = p.e_a * 1000.0;
        GAS * t * (e_a / (GAS * t)).exp() / (FARADAY.powi(2) * p.a_sei * p.k_0) / (and * ctd).sqrt()
    }

    pub fn r_mem(p: &BatteryParams, t: f64) -> f64 {
        p.k_dif_mem * (p.b_dif_mem / (t - p.t0_dif_mem)).exp()
    }

    pub fn r_elec(p: &BatteryParams, t: f64) -> f64 {
        p.k_dif_elec * (p.b_dif_elec / (t - p.t0_dif_elec)).exp()
    }

    pub fn r_tot(p: &BatteryParams, soc: f64, t: f64) -> f64 {
        r_ohm(p, soc, t) + r_ct(p, soc, t) + r_mem(p, t)
    }

    pub fn eta_c(p: &BatteryParams, i: f64, t: f64) -> f64 {
        p.eta_c0 + p.eta_ct * t + p.eta_ci * i
    }

    /// Signed current: positive discharges.
    pub fn surface_soc(p: &BatteryParams, soc: f64, i: f64, t: f64) -> f64 {
        soc - r_elec(p, t) * i * eta_c(p, i.abs(), t)
    }

    pub fn eta_dis(p: &BatteryParams, soc: f64, i: f64, t: f64) -> f64 {
        1.0 - i * r_tot(p, soc, t) / v_eq(p, soc, t)
    }

    pub fn eta_cha(p: &BatteryParams, soc: f64, i: f64, t: f64) -> f64 {
        let v = v_eq(p, soc, t);
        v / (v + i * r_tot(p, soc, t))
    }

    /// Smallest current driving the surface SOC to `target`, by bisection.
    pub fn surface_root(p: &BatteryParams, soc: f64, t: f64, discharge: bool) -> f64 {
        let sign = if discharge { 1.0 } else { -1.0 };
        let target = if discharge { 0.0 } else { 1.0 };
        let gap = |i: f64| sign * (surface_soc(p, soc, sign * i, t) - target);
        if gap(0.0) <= 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while gap(hi) > 0.0 {
            hi *= 2.0;
            assert!(hi < 1e12, "no surface root");
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            go(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    go(0, n, k, &mut Vec::new(), f);
}

/// Optimal value and point of a bounded LP by enumerating every vertex.
/// All variable bounds must be finite. `None` means infeasible.
pub fn vertex_oracle(lp: &LinearProgram) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_variables();
    // dense rows: a x = rhs in eqs, a x <= rhs in ineqs
    let mut eqs = Vec::new();
    let mut ineqs = Vec::new();
    for c in &lp.constraints {
        let mut a = vec![0.0; n];
        for &(j, v) in &c.coeffs {
            a[j] += v;
        }
        match c.sense {
            Sense::Eq => eqs.push((a, c.rhs)),
            Sense::Le => ineqs.push((a, c.rhs)),
            Sense::Ge => ineqs.push((a.iter().map(|v| -v).collect(), -c.rhs)),
        }
    }
    for (j, v) in lp.variables.iter().enumerate() {
        assert!(v.lower.is_finite() && v.upper.is_finite(), "oracle needs finite bounds");
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ineqs.push((e.clone(), v.upper));
        ineqs.push((e.iter().map(|x| -x).collect(), -v.lower));
    }
    if n == 0 {
        let ok = eqs.iter().all(|(_, r): &(Vec<f64>, f64)| r.abs() < 1e-9) && ineqs.iter().all(|(_, r)| *r >= -1e-9);
        return ok.then(|| (0.0, Vec::new()));
    }
    let feasible = |x: &[f64]| {
        let dot = |a: &[f64]| a.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        eqs.iter().all(|(a, r)| (dot(a) - r).abs() <= 1e-7 * (1.0 + r.abs()))
            && ineqs.iter().all(|(a, r)| dot(a) <= r + 1e-7 * (1.0 + r.abs()))
    };
    let cost: Vec<f64> = lp.variables.iter().map(|v| v.cost).collect();
    // every vertex is fixed by n independent tight rows out of all rows
    let rows: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(&ineqs).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    combinations(rows.len(), n, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| rows[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if feasible(&x) {
                let obj: f64 = cost.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    best
}

/// Optimal value of a MIP by enumerating every binary assignment and
/// solving the remaining continuous LP by vertex enumeration.
pub fn enumeration_oracle(mip: &MixedIntegerProgram) -> Option<f64> {
    let lp = &mip.lp;
    let bins = mip.binaries().to_vec();
    let cont: Vec<usize> = (0..lp.num_variables()).filter(|j| !mip.is_binary(*j)).collect();
    let mut best: Option<f64> = None;
    for mask in 0u64..(1u64 << bins.len()) {
        let mut value = vec![0.0; lp.num_variables()];
        for (k, &j) in bins.iter().enumerate() {
            value[j] = ((mask >> k) & 1) as f64;
        }
        let fixed_cost: f64 = bins.iter().map(|&j| lp.variables[j].cost * value[j]).sum();
        let mut reduced = LinearProgram::new("reduced");
        for &j in &cont {
            let v = &lp.variables[j];
            reduced.add_variable(v.name.clone(), v.lower, v.upper, v.cost);
        }
        for c in &lp.constraints {
            let mut rhs = c.rhs;
            let mut coeffs = Vec::new();
            for &(j, a) in &c.coeffs {
                match cont.iter().position(|&k| k == j) {
                    Some(pos) => coeffs.push((pos, a)),
                    None => rhs -= a * value[j],
                }
            }
            reduced.add_constraint(c.name.clone(), coeffs, c.sense, rhs);
        }
        if let Some((obj, _)) = vertex_oracle(&reduced) {
            let total = obj + fixed_cost;
            if best.map_or(true, |b| total < b) {
                best = Some(total);
            }
        }
    }
    best
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small bounded LP with integer data. Mostly feasible by construction
/// (rows are built around an interior point); a quarter get random
/// right-hand sides and may be infeasible.
pub fn random_lp(seed: u64) -> LinearProgram {
    let mut r = rng(seed);
    let n = r.random_range(1..=4);
    let m = r.random_range(1..=4);
    let mut lp = LinearProgram::new(format!("rand{seed}"));
    let mut point = Vec::new();
    for j in 0..n {
        let lo = r.random_range(-3..=0) as f64;
        let hi = lo + r.random_range(1..=5) as f64;
        point.push(r.random_range(lo..=hi));
        lp.add_variable(format!("x{j}"), lo, hi, r.random_range(-5..=5) as f64);
    }
    let wild = r.random_bool(0.25);
    for i in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                let a = r.random_range(-5..=5);
                (a != 0).then_some((j, a as f64))
            })
            .collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        let sense = match r.random_range(0..5) {
            0 => Sense::Eq,
            1 | 2 => Sense::Le,
            _ => Sense::Ge,
        };
        let rhs = if wild {
            r.random_range(-10..=10) as f64
        } else {
            match sense {
                Sense::Eq => act,
                Sense::Le => (act + r.random_range(0.0..3.0)).round().max(act.ceil()),
                Sense::Ge => (act - r.random_range(0.0..3.0)).round().min(act.floor()),
            }
        };
        lp.add_constraint(format!("r{i}"), coeffs, sense, rhs);
    }
    lp
}

/// MIP with `binaries` binary columns and up to two bounded continuous
/// ones, feasible by construction.
pub fn random_mip(seed: u64, binaries: usize) -> MixedIntegerProgram {
    let mut r = rng(seed);
    let cont = r.random_range(0..=2);
    let mut mip = MixedIntegerProgram::new(LinearProgram::new(format!("mip{seed}")));
    let mut point = Vec::new();
    for k in 0..binaries {
        let j = mip.add_binary(format!("b{k}"), r.random_range(-9..=9) as f64);
        debug_assert_eq!(j, point.len());
        point.push(r.random_range(0..=1) as f64);
    }
    for c in 0..cont {
        let hi = r.random_range(1..=4) as f64;
        mip.lp.add_variable(format!("y{c}"), 0.0, hi, r.random_range(-4..=4) as f64 + 0.5);
        point.push(r.random_range(0.0..hi));
    }
    let n = point.len();
    for i in 0..r.random_range(1..=4) {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .filter_map(|j| {
                let a = r.random_range(-6..=6);
                (a != 0).then_some((j, a as f64))
            })
            .collect();
        let act: f64 = coeffs.iter().map(|&(j, a)| a * point[j]).sum();
        if r.random_bool(0.5) {
            lp_row(&mut mip.lp, i, coeffs, Sense::Le, (act + r.random_range(0.0..4.0)).floor().max(act.ceil()));
        } else {
            lp_row(&mut mip.lp, i, coeffs, Sense::Ge, (act - r.random_range(0.0..4.0)).ceil().min(act.floor()));
        }
    }
    mip
}

fn lp_row(lp: &mut LinearProgram, i: usize, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
    lp.add_constraint(format!("c{i}"), coeffs, sense, rhs);
}

/// LP or MIP with arbitrary real coefficients, infinite bounds and long
/// names, for export/import round trips.
pub fn random_mps_model(seed: u64) -> MixedIntegerProgram {
    let mut r = rng(seed);
    let n = r.random_range(1..=12);
    let m = r.random_range(0..=10);
    let mut mip = MixedIntegerProgram::new(LinearProgram::new(format!("model_{seed}")));
    let real = |r: &mut ChaCha8Rng| {
        let mag = 10f64.powi(r.random_range(-6..=6));
        let v = r.random_range(-1.0..1.0) * mag;
        if r.random_bool(0.1) {
            0.0
        } else {
            v
        }
    };
    for j in 0..n {
        let name = format!("var[{j},{}]", r.random_range(0..1000));
        if r.random_bool(0.3) {
            mip.add_binary(name, real(&mut r));
            continue;
        }
        let (lo, hi) = match r.random_range(0..5) {
            0 => (f64::NEG_INFINITY, f64::INFINITY),
            1 => (0.0, f64::INFINITY),
            2 => (f64::NEG_INFINITY, real(&mut r).abs()),
            3 => {
                let v = real(&mut r);
                (v, v)
            }
            _ => {
                let a = real(&mut r);
                (a, a + real(&mut r).abs())
            }
        };
        mip.lp.add_variable(name, lo, hi, real(&mut r));
    }
    for i in 0..m {
        let mut cols: Vec<usize> = (0..n).filter(|_| r.random_bool(0.5)).collect();
        if cols.is_empty() {
            cols.push(r.random_range(0..n));
        }
        let coeffs = cols.into_iter().map(|j| (j, real(&mut r))).filter(|c| c.1 != 0.0).collect();
        let sense = [Sense::Le, Sense::Eq, Sense::Ge][r.random_range(0..3)];
        mip.lp.add_constraint(format!("row_{i}_long_name"), coeffs, sense, real(&mut r));
    }
    mip
}

/// True when `a` and `b` agree to `digits` significant digits.
pub fn same_digits(a: f64, b: f64, digits: i32) -> bool {
    if a == b {
        return true;
    }
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= scale * 10f64.powi(-digits)
}
