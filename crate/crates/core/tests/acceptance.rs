//! Acceptance criteria for the planner. Runs without the libtest harness so
//! every criterion prints exactly one PASS/FAIL line; the process exits
//! nonzero if any criterion fails.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use reconfig_core::bermodel::{lifetime_extension, BerCurve, DensityRange};
use reconfig_core::evaluate::{delta, equal_share_baseline, prior_work_baseline, Entry};
use reconfig_core::fixtures;
use reconfig_core::kkt::{kkt_verify, kkt_verify_shares, Objective};
use reconfig_core::lp::{solve_lp, Polytope, Sense};
use reconfig_core::offline::{
    bounds_polytope, c_region_boundaries, share_bounds, solve_problem1, solve_problem2, solve_problem3,
    SchemeCatalog,
};
use reconfig_core::online::{plan_from_fits, run_online, violation_fraction, CurveOracle, OnlineSetup};
use reconfig_core::Error;

/// Collects the individual checks behind one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        let line = format!("{what} = {got:.6} (want {want} +/- {tol})");
        if ok {
            self.notes.push(line);
        } else {
            self.failures.push(line);
        }
    }

    fn shares(&mut self, what: &str, got: &[f64; 4], want: [f64; 4], tol: f64) {
        for i in 0..4 {
            self.near(&format!("{what} x{}", i + 1), got[i], want[i], tol);
        }
    }

    fn truth(&mut self, what: &str, ok: bool) {
        if ok {
            self.notes.push(what.to_string());
        } else {
            self.failures.push(what.to_string());
        }
    }
}

struct Report {
    failed: usize,
    total: usize,
}

impl Report {
    fn run(&mut self, id: &str, title: &str, f: impl FnOnce(&mut Checks)) {
        let mut c = Checks::default();
        let start = std::time::Instant::now();
        f(&mut c);
        let secs = start.elapsed().as_secs_f64();
        self.total += 1;
        let status = if c.failures.is_empty() { "PASS" } else { "FAIL" };
        println!(
            "{status} [{id}] {title} ({} checks ok, {} failed, {secs:.2}s)",
            c.notes.len(),
            c.failures.len()
        );
        for line in &c.failures {
            println!("       failed: {line}");
        }
        if !c.failures.is_empty() {
            self.failed += 1;
        }
    }
}

const A: f64 = 1e-3;
const A_HIGH: f64 = 1.6e-3;

fn setup() -> (SchemeCatalog, Vec<BerCurve>, DensityRange) {
    (SchemeCatalog::length23(), fixtures::offline_mt().to_vec(), DensityRange::default())
}

fn criterion1(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let p = solve_problem1(&cat, &curves, A, &range).unwrap().plan;
    c.shares("problem 1", &p.shares, [0.2624, 0.1458, 0.5039, 0.0879], 0.003);
    c.near("capacity", p.capacity, 0.8544, 0.002);
    c.near("avg adder", p.avg_adder, 52.4265, 0.2);
}

fn criterion2(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let (c12, c34) = c_region_boundaries(&cat).unwrap();
    c.near("k1 = k2 boundary", c12, 988.0, 1.0);
    c.near("k3 = k4 boundary", c34, 349.0, 1.0);
    let cases = [
        (100.0, [0.0, 0.4082, 0.0, 0.5918], 0.7993),
        (500.0, [0.0, 0.4082, 0.5039, 0.0879], 0.8412),
        (2000.0, [0.2624, 0.1458, 0.5039, 0.0879], 0.8544),
    ];
    for (cv, x, cap) in cases {
        let p = solve_problem2(&cat, &curves, A, &range, cv).unwrap().solution.plan;
        c.shares(&format!("c = {cv}"), &p.shares, x, 0.003);
        c.near(&format!("c = {cv} capacity"), p.capacity, cap, 0.002);
    }
}

fn criterion3(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let p = solve_problem3(&cat, &curves, A, &range, 35.0).unwrap().solution.plan;
    c.shares("z = 35", &p.shares, [0.0, 0.4082, 0.3554, 0.2364], 0.003);
    c.near("z = 35 capacity", p.capacity, 0.8288, 0.002);
    let p = solve_problem3(&cat, &curves, A, &range, 45.0).unwrap().solution.plan;
    c.shares("z = 45", &p.shares, [0.1139, 0.2943, 0.5039, 0.0879], 0.003);
    c.near("z = 45 capacity", p.capacity, 0.8469, 0.002);
    let infeasible = matches!(solve_problem3(&cat, &curves, A, &range, 20.0), Err(Error::Infeasible(_)));
    c.truth("z = 20 is infeasible", infeasible);
    let p3 = solve_problem3(&cat, &curves, A, &range, 100.0).unwrap().solution.plan;
    let p1 = solve_problem1(&cat, &curves, A, &range).unwrap().plan;
    let gap = p3.shares.iter().zip(&p1.shares).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.near("z = 100 vs problem 1 max share gap", gap, 0.0, 1e-9);
}

fn criterion4(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let u = share_bounds(&curves, A, &range).unwrap().u;
    // cheapest plan: all of the SP bound, ST for the rest
    let z_min = cat.adder_sizes[1] * u[1] + cat.adder_sizes[3] * (1.0 - u[1]);
    let slope = cat.adder_sizes[2] - cat.adder_sizes[3];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..5 {
        let z = rng.random_range(24.7..=39.3);
        let x = solve_problem3(&cat, &curves, A, &range, z).unwrap().solution.plan.shares;
        let x3 = (z - z_min) / slope;
        c.near(&format!("z = {z:.4} x3"), x[2], x3, 1e-3);
        c.near(&format!("z = {z:.4} x4"), x[3], 1.0 - u[1] - x3, 1e-3);
    }
}

fn criterion5(c: &mut Checks) {
    let (_, curves, range) = setup();
    let st = lifetime_extension(&curves[3], A, range.d1, 2.0).unwrap();
    c.truth("ST reaches 1e-3 before the search cap", st.reached);
    c.near("ST crossing of 1e-3", st.density, 1.528, 0.01);
    let op = curves[0].threshold_crossing(A, range.d0, range.d1).unwrap();
    c.near("x1 from OP crossing", range.share_of(op), 0.2624, 0.003);
}

fn criterion6(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let p = solve_problem1(&cat, &curves, A_HIGH, &range).unwrap().plan;
    c.shares("a = 1.6e-3", &p.shares, [0.3036, 0.1711, 0.5253, 0.0], 0.005);
    c.near("a = 1.6e-3 capacity", p.capacity, 0.8674, 0.002);
    c.near("a = 1.6e-3 avg adder", p.avg_adder, 54.24, 0.3);
    let ext = lifetime_extension(&curves[3], A_HIGH, range.d1, 2.0).unwrap();
    c.near("ST crossing of 1.6e-3", ext.density, 1.66, 0.02);
    c.near("lifetime extension (%)", 100.0 * ext.relative_gain(range.d1), 10.67, 1.5);
}

fn criterion7(c: &mut Checks) {
    let (cat, truth, range) = setup();
    let p = plan_from_fits(&fixtures::online_setup4(), &cat, A, &range).unwrap();
    c.shares("setup 4", &p.shares, [0.2443, 0.1799, 0.4684, 0.1074], 0.01);
    c.near("setup 4 capacity", p.capacity, 0.8527, 0.003);
    c.near("setup 4 violation", violation_fraction(&p, &truth, A, &range).unwrap(), 0.016, 0.005);
}

fn criterion8(c: &mut Checks) {
    let (cat, truth, range) = setup();
    let eq = equal_share_baseline(&cat, &range, A);
    c.near("equal-share capacity", eq.capacity, 0.8452, 1e-4);
    c.truth(&format!("equal-share avg adder {} == 43.25", eq.avg_adder), eq.avg_adder == 43.25);
    c.near("equal-share violation", violation_fraction(&eq, &truth, A, &range).unwrap(), 0.07, 0.015);
    let p3 = solve_problem3(&cat, &truth, A, &range, 43.25).unwrap().solution.plan;
    c.near("z = 43.25 capacity", p3.capacity, 0.8451, 5e-4);
    c.near("z = 43.25 violation", violation_fraction(&p3, &truth, A, &range).unwrap(), 0.0, 0.0);
    let p1 = solve_problem1(&cat, &truth, A, &range).unwrap().plan;
    let ours = Entry::from_plan("problem-1", &p1, &truth, A, &range).unwrap();
    let d = delta(&ours, &prior_work_baseline());
    c.near("adder reduction vs prior work (%)", 100.0 * d.adder_reduction, 15.3, 0.3);
    c.near("capacity loss vs prior work (%)", 100.0 * d.capacity_loss, 1.09, 0.1);
}

/// Uniform point on the probability simplex.
fn simplex_point(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let e: [f64; 4] = std::array::from_fn(|_| Exp1.sample(rng));
    let s: f64 = e.iter().sum();
    e.map(|v| v / s)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn criterion9a(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut problems: Vec<(String, Polytope, [f64; 4], f64)> = Vec::new();
    for a in [A, A_HIGH] {
        let s = solve_problem1(&cat, &curves, a, &range).unwrap();
        problems.push((format!("problem 1, a = {a}"), bounds_polytope(&s.bounds.u), cat.rates, s.plan.capacity));
    }
    let u = share_bounds(&curves, A, &range).unwrap().u;
    for cv in [100.0, 500.0, 2000.0] {
        let s = solve_problem2(&cat, &curves, A, &range, cv).unwrap();
        problems.push((format!("problem 2, c = {cv}"), bounds_polytope(&u), s.k, s.solution.lp.objective_value));
    }
    for z in [35.0, 45.0] {
        let s = solve_problem3(&cat, &curves, A, &range, z).unwrap();
        let poly = bounds_polytope(&u).with_inequality(&cat.adder_sizes, z).unwrap();
        problems.push((format!("problem 3, z = {z}"), poly, cat.rates, s.solution.plan.capacity));
    }
    for (name, poly, obj, best) in problems {
        let (mut accepted, mut worst_gap) = (0, f64::NEG_INFINITY);
        let mut tries = 0u64;
        while accepted < 10_000 && tries < 20_000_000 {
            tries += 1;
            let x = simplex_point(&mut rng);
            if !poly.contains(&x, 0.0) {
                continue;
            }
            accepted += 1;
            worst_gap = worst_gap.max(dot(&obj, &x) - best);
        }
        c.truth(&format!("{name}: {accepted} feasible samples"), accepted == 10_000);
        c.truth(&format!("{name}: no sample beats the optimum (max gap {worst_gap:.3e})"), worst_gap <= 1e-12);
    }
}

/// Inequality rows `(a, b)` meaning `a . x <= b`, copied out of the polytope.
fn rows_of(poly: &Polytope) -> Vec<([f64; 4], f64)> {
    (0..poly.a.nrows())
        .map(|i| (std::array::from_fn(|j| poly.a[(i, j)]), poly.b[i]))
        .collect()
}

/// Best objective over a grid of simplex points whose first three
/// coordinates start at `lo` and advance by `step`.
fn grid_best(rows: &[([f64; 4], f64)], obj: &[f64; 4], lo: [f64; 3], step: f64, counts: usize) -> Option<([f64; 4], f64)> {
    let mut best: Option<([f64; 4], f64)> = None;
    for i in 0..=counts {
        let x1 = lo[0] + i as f64 * step;
        for j in 0..=counts {
            let x2 = lo[1] + j as f64 * step;
            for k in 0..=counts {
                let x3 = lo[2] + k as f64 * step;
                let x4 = 1.0 - x1 - x2 - x3;
                if x4 < -1e-12 {
                    break;
                }
                let x = [x1, x2, x3, x4];
                if rows.iter().any(|(a, b)| dot(a, &x) > b + 1e-12) {
                    continue;
                }
                let v = dot(obj, &x);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((x, v));
                }
            }
        }
    }
    best
}

fn criterion9b(c: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for t in 0..50 {
        // three random cuts through an interior point of the simplex
        let center = simplex_point(&mut rng).map(|v| 0.5 * v + 0.125);
        let mut rows: Vec<(Vec<f64>, f64)> = (0..4)
            .map(|i| {
                let mut r = vec![0.0; 4];
                r[i] = -1.0;
                (r, 0.0)
            })
            .collect();
        for _ in 0..3 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let margin = rng.random_range(0.05..0.3);
            let rhs = dot(&a, &center) + margin;
            rows.push((a, rhs));
        }
        let poly = Polytope::from_rows(4, &rows, &[(vec![1.0; 4], 1.0)]).unwrap();
        let obj: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let lp = solve_lp(&poly, &obj, Sense::Maximize).unwrap().objective_value;
        let rows = rows_of(&poly);

        // coarse grid, then two zoomed passes around the incumbent
        let (mut x, mut v) = grid_best(&rows, &obj, [0.0; 3], 0.01, 100).expect("interior point exists");
        for (half, step) in [(0.02, 0.001), (0.002, 0.0001)] {
            let lo = [x[0] - half, x[1] - half, x[2] - half];
            if let Some((nx, nv)) = grid_best(&rows, &obj, lo, step, 40) {
                if nv > v {
                    (x, v) = (nx, nv);
                }
            }
        }
        let gap = lp - v;
        worst = worst.max(gap.abs());
        if !(-1e-9..=2e-3).contains(&gap) {
            all_ok = false;
            c.failures.push(format!("polytope {t}: lp {lp:.6} vs grid {v:.6}"));
        }
    }
    c.truth(&format!("50 random polytopes agree with grid search (worst gap {worst:.2e})"), all_ok);
}

fn criterion9c(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let mut optima = Vec::new();
    for a in [A, A_HIGH] {
        let p = solve_problem1(&cat, &curves, a, &range).unwrap().plan;
        optima.push((format!("problem 1, a = {a}"), p, Objective::Capacity, a));
    }
    for cv in [100.0, 500.0, 2000.0] {
        let p = solve_problem2(&cat, &curves, A, &range, cv).unwrap().solution.plan;
        optima.push((format!("problem 2, c = {cv}"), p, Objective::Tradeoff { c: cv }, A));
    }
    for (name, plan, obj, a) in &optima {
        let cert = kkt_verify(plan, &cat, &curves, *a, &range, *obj).unwrap();
        c.truth(&format!("{name} certified"), cert.valid);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let u = share_bounds(&curves, A, &range).unwrap().u;
    let poly = bounds_polytope(&u);
    let mut rejected = 0;
    let mut tested = 0;
    let mut idx = 0;
    while tested < 100 {
        let (_, plan, obj, a) = &optima[idx % optima.len()];
        idx += 1;
        if *a != A {
            continue;
        }
        // move along the simplex: random direction with zero sum
        let mut d: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let mean = d.iter().sum::<f64>() / 4.0;
        d.iter_mut().for_each(|v| *v -= mean);
        let scale = rng.random_range(0.005..0.05) / d.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let x: [f64; 4] = std::array::from_fn(|i| plan.shares[i] + scale * d[i]);
        if !poly.contains(&x, 0.0) {
            continue;
        }
        tested += 1;
        let cert = kkt_verify_shares(&x, &cat, &curves, A, &range, *obj, 1e-6).unwrap();
        if !cert.valid {
            rejected += 1;
        }
    }
    c.truth(&format!("{rejected}/100 perturbed feasible points rejected"), rejected == 100);
}

fn criterion9d(c: &mut Checks) {
    let range = DensityRange::default();
    let sets = fixtures::NAMES.map(|n| (n, fixtures::builtin(n).unwrap()));
    let mut worst = 0.0f64;
    for (name, curves) in &sets {
        for curve in curves {
            let scale = (0..=70)
                .map(|k| curve.eval_g(0.8 + 0.01 * k as f64, &range).abs())
                .fold(0.0, f64::max);
            for k in 0..=70 {
                let d = 0.8 + 0.01 * k as f64;
                let h = 1e-5;
                let fd = (curve.eval(d + h) - curve.eval(d - h)) / (2.0 * h) * range.width();
                let g = curve.eval_g(d, &range);
                let rel = (g - fd).abs() / g.abs().max(1e-3 * scale);
                worst = worst.max(rel);
                if rel > 1e-5 {
                    c.failures.push(format!("{name} {} at {d:.2}: g {g:e} vs fd {fd:e}", curve.scheme));
                }
            }
        }
    }
    c.truth(&format!("g matches central differences on all fixtures (worst rel {worst:.1e})"), worst <= 1e-5);
}

fn criterion9e(c: &mut Checks) {
    let (cat, curves, range) = setup();
    let p2 = solve_problem2(&cat, &curves, A, &range, 1e9).unwrap().solution.plan;
    let p1 = solve_problem1(&cat, &curves, A, &range).unwrap().plan;
    let gap = p2.shares.iter().zip(&p1.shares).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    c.near("c = 1e9 vs problem 1 max share gap", gap, 0.0, 1e-9);
}

fn setups_band(c: &mut Checks) {
    let (cat, truth, range) = setup();
    let offline = solve_problem1(&cat, &truth, A, &range).unwrap().plan;
    let oracle = CurveOracle::new(truth.clone());
    let rows = [
        (1, [0.2451, 0.1816, 0.4762, 0.0971]),
        (2, [0.2626, 0.1842, 0.4871, 0.0661]),
        (3, [0.2547, 0.1847, 0.4822, 0.0784]),
    ];
    for (id, want) in rows {
        let setup = OnlineSetup::standard(id, 0).unwrap();
        let r = run_online(&setup, &offline.switch_densities, &oracle, &cat, A, &range).unwrap();
        c.shares(&format!("setup {id}"), &r.plan.shares, want, 0.02);
    }
}

fn main() {
    let mut report = Report { failed: 0, total: 0 };
    report.run("1", "minimum-capacity plan at a = 1e-3", criterion1);
    report.run("2", "c-region boundaries and tradeoff optima", criterion2);
    report.run("3", "adder-budget plans at z = 35, 45, 20, 100", criterion3);
    report.run("4", "piecewise closed form in the lower z piece", criterion4);
    report.run("5", "threshold crossings", criterion5);
    report.run("6", "plan and lifetime extension at a = 1.6e-3", criterion6);
    report.run("7", "setup 4 from fixed fits", criterion7);
    report.run("8", "baselines and prior-work comparison", criterion8);
    report.run("9a", "LP optimum dominates sampled feasible points", criterion9a);
    report.run("9b", "vertex enumeration vs grid search", criterion9b);
    report.run("9c", "KKT certificates", criterion9c);
    report.run("9d", "scaled derivative vs finite differences", criterion9d);
    report.run("9e", "large-c tradeoff equals capacity plan", criterion9e);
    report.run("band", "setups 1-3 with noiseless truth oracle, +/- 0.02 per share", setups_band);
    println!("\nacceptance: {} of {} criteria passed", report.total - report.failed, report.total);
    if report.failed > 0 {
        std::process::exit(1);
    }
}
