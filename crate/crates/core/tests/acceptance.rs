//! Acceptance suite: one line per criterion, run sequentially with timings.

mod common;

use std::time::{Duration, Instant};

use common::*;
use jscl_core::diagnostics::{
    check_discrete_entropy, check_hj_scl_link, check_l1_contraction, check_max_principle, check_tech_lemma,
    check_time_bv, compact_perturbation, cross_distance, default_trace_tolerance, extract_traces,
    l1_error_against, riemann_completeness_sweep, StudyWindow, SweepSettings,
};
use jscl_core::junction::{underline_h, uniform_grid, EXACT_TOL};
use jscl_core::{
    relax_eval, run, Fluxes, Germ, GridSpec, InitialData, JunctionFunction, PiecewiseLinear, Problem,
    Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn riemann_problem(fluxes: Fluxes, vm: f64, vp: f64, dx: f64, half_width: f64, t: f64) -> Problem {
    Problem::new(
        fluxes,
        InitialData::riemann(vm, vp).unwrap(),
        GridSpec::new(dx, half_width, t, 0.9).unwrap(),
    )
}

fn abs_godunov() -> Fluxes {
    let a = abs_flux();
    Fluxes::new(a.clone(), a.clone(), JunctionFunction::from_godunov_pair(a))
}

fn criterion_1() -> Outcome {
    let traj = run(&riemann_problem(abs_godunov(), -1.0, 1.0, 1e-2, 2.05, 1.0)).unwrap();
    let c = check_hj_scl_link(&traj).unwrap();
    outcome(
        c.worst <= 1e-10,
        format!("max |v - du/dx| = {:.3e} over {} steps", c.worst, traj.steps),
    )
}

/// The randomized suite shared by criteria 2–5. Every flux configuration gets
/// 50 random problems; the first 25 of each also get a compactly perturbed partner.
struct SuiteRun {
    case: usize,
    traj: Trajectory,
    partner: Option<Trajectory>,
}

fn build_suite() -> Vec<SuiteRun> {
    let cases = suite_cases();
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let grid = GridSpec::new(0.02, 2.6, 0.5, 0.9).unwrap();
    (0..50 * cases.len())
        .map(|k| {
            let case = k % cases.len();
            let fluxes = cases[case].fluxes.clone();
            let data = random_data(&mut rng);
            let traj = run(&Problem::new(fluxes.clone(), data.clone(), grid)).unwrap();
            let partner = (k < 25 * cases.len()).then(|| {
                let other = compact_perturbation(&mut rng, &data, 0.5, 2.0);
                run(&Problem::new(fluxes, other, grid)).unwrap()
            });
            SuiteRun { case, traj, partner }
        })
        .collect()
}

/// Runs whose junction leaves every constant state stationary.
fn consistent(suite: &[SuiteRun]) -> impl Iterator<Item = &SuiteRun> {
    let cases = suite_cases();
    suite.iter().filter(move |r| cases[r.case].constants_stationary)
}

fn criterion_2(suite: &[SuiteRun]) -> Outcome {
    let runs: Vec<&SuiteRun> = consistent(suite).collect();
    let worst = runs
        .iter()
        .map(|r| check_max_principle(&r.traj).worst)
        .fold(0.0, f64::max);
    // not part of the criterion: junctions that move constant states
    let cases = suite_cases();
    let other: Vec<f64> = suite
        .iter()
        .filter(|r| !cases[r.case].constants_stationary)
        .map(|r| check_max_principle(&r.traj).worst)
        .collect();
    let exceeding = other.iter().filter(|&&w| w > 1e-12).count();
    outcome(
        runs.len() == 100 && worst <= 1e-12,
        format!(
            "worst residual {worst:.3e} over {} abs/W Godunov-junction runs (limited junctions, not covered by the estimate: {exceeding}/{} exceed ||v0||_inf)",
            runs.len(),
            other.len()
        ),
    )
}

fn criterion_3(suite: &[SuiteRun]) -> Outcome {
    let cases = suite_cases();
    let mut worst_ratio = 0.0_f64;
    let mut checked = 0;
    let mut ok = true;
    for r in suite {
        let fluxes = &cases[r.case].fluxes;
        let constants = germ_constants(fluxes, 5);
        if constants.len() < 5 {
            ok = false;
        }
        for k in constants {
            let c = check_discrete_entropy(&r.traj, fluxes, k).unwrap();
            worst_ratio = worst_ratio.max(c.worst / c.threshold);
            ok &= c.passed;
            checked += 1;
        }
    }
    outcome(
        ok,
        format!(
            "{} runs x 5 germ constants = {checked} checks; worst residual / threshold = {worst_ratio:.3e}",
            suite.len()
        ),
    )
}

fn criterion_4(suite: &[SuiteRun]) -> Outcome {
    let mut worst = 0.0_f64;
    let mut pairs = 0;
    for r in suite {
        if let Some(p) = &r.partner {
            let (c, _) = check_l1_contraction(&r.traj, p).unwrap();
            worst = worst.max(c.worst);
            pairs += 1;
        }
    }
    outcome(
        pairs >= 50 && worst <= 1e-10,
        format!("{pairs} pairs; largest step-to-step increase {worst:.3e}"),
    )
}

fn criterion_5(suite: &[SuiteRun]) -> Outcome {
    let cases = suite_cases();
    let mut failures = Vec::new();
    let mut runs = 0;
    for r in suite {
        for t in std::iter::once(&r.traj).chain(r.partner.as_ref()) {
            runs += 1;
            let c = check_time_bv(t).unwrap();
            if !c.passed {
                failures.push(format!("{} (excess {:.3e})", cases[r.case].name, c.worst));
            }
        }
    }
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} runs within 2 L ||v0||_BV")
        } else {
            format!("{} of {runs} runs exceed the bound: {}", failures.len(), failures.join(", "))
        },
    )
}

fn criterion_6() -> Outcome {
    let a = check_tech_lemma(&abs_flux(), 100_000, 11);
    let w = check_tech_lemma(&w_flux(), 100_000, 12);
    outcome(
        a.passed && w.passed,
        format!("worst violation abs {:.3e}, W {:.3e}", a.worst, w.worst),
    )
}

fn criterion_7() -> Outcome {
    let (a, w) = (abs_flux(), w_flux());
    let configs: Vec<(&str, PiecewiseLinear, PiecewiseLinear, JunctionFunction)> = vec![
        ("abs godunov", a.clone(), a.clone(), JunctionFunction::from_godunov_pair(a.clone())),
        (
            "W limited 0.5",
            w.clone(),
            w.clone(),
            JunctionFunction::from_limited(w.clone(), w.clone(), 0.5).unwrap(),
        ),
        ("abs|W diehl 0.1", a.clone(), w.clone(), JunctionFunction::from_diehl_eps(0.1).unwrap()),
    ];
    let grid = uniform_grid(-2.0, 2.0, 41);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut idem = 0.0_f64;
    let mut below = 0.0_f64;
    let mut coincide = 0.0_f64;
    let mut oracle = 0.0_f64;
    let mut coincidence_points = 0;
    for (_, hl, hr, f0) in &configs {
        let rf = f0.clone().relaxed(hl, hr, EXACT_TOL);
        for &p in &grid {
            for &q in &grid {
                let once = rf.eval(p, q);
                let twice = relax_eval(&rf, hl, hr, p, q, EXACT_TOL).unwrap().lambda;
                idem = idem.max((twice - once).abs());
                below = below.max(underline_h(hl, hr, p, q) - once);
            }
        }
        let g0 = Germ::new(hl.clone(), hr.clone(), f0.clone());
        for r in g0.rh_curve(&uniform_grid(0.0, 3.0, 61)) {
            if r.member && r.point.p_l.abs() <= 2.0 && r.point.p_r.abs() <= 2.0 {
                coincidence_points += 1;
                let v = rf.eval(r.point.p_l, r.point.p_r);
                coincide = coincide.max((v - f0.eval(r.point.p_l, r.point.p_r)).abs());
            }
        }
    }
    for k in 0..25 {
        let (_, hl, hr, f0) = &configs[k % configs.len()];
        let (p, q) = (rng.gen_range(-2.0..=2.0), rng.gen_range(-2.0..=2.0));
        let fast = relax_eval(f0, hl, hr, p, q, EXACT_TOL).unwrap().lambda;
        let slow = brute_force_relax(f0, hl, hr, p, q, 4.0, 1e-3);
        oracle = oracle.max((fast - slow).abs());
    }
    outcome(
        idem <= 1e-5 && below <= 1e-9 && coincide <= 1e-5 && coincidence_points > 0 && oracle <= 1e-2,
        format!(
            "|R2 - R| {idem:.2e}; max(underline_H - R) {below:.2e}; |R - F0| on {coincidence_points} coincidence points {coincide:.2e}; oracle gap {oracle:.2e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let traj = run(&riemann_problem(abs_godunov(), -1.0, 1.0, 1e-3, 2.05, 1.0)).unwrap();
    let exact = |x: f64| {
        if x < -1.0 {
            -1.0
        } else if x > 1.0 {
            1.0
        } else {
            0.0
        }
    };
    let err = l1_error_against(&traj, traj.steps, exact, -2.0, 2.0, 4).unwrap();
    let tr = extract_traces(&traj, 0.5, 1.0).unwrap();
    let trace_gap = tr.p_l.abs().max(tr.p_r.abs());
    outcome(
        err <= 0.05 && trace_gap <= 0.05,
        format!("L1 error {err:.4}; traces ({:.4}, {:.4})", tr.p_l, tr.p_r),
    )
}

fn criterion_9() -> Outcome {
    let a = abs_flux();
    let f0 = JunctionFunction::from_diehl_eps(0.01).unwrap();
    let rf = f0.clone().relaxed(&a, &a, EXACT_TOL);
    let fluxes = Fluxes::new(a.clone(), a.clone(), f0);
    let dists: Vec<f64> = [1e-2, 5e-3, 2.5e-3]
        .iter()
        .map(|&dx| {
            let p = riemann_problem(fluxes.clone(), 1.0, -1.0, dx, 1.2, 1.0);
            cross_distance(&p, &rf, StudyWindow::default()).unwrap()
        })
        .collect();
    let ratios: Vec<f64> = dists.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(
        ratios.iter().all(|&r| r < 0.9),
        format!(
            "cross L1 [{}]; ratios [{}]",
            dists.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", "),
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn criterion_10() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for (name, h) in [("abs", abs_flux()), ("W", w_flux())] {
        let f = JunctionFunction::from_limited(h.clone(), h.clone(), 0.5)
            .unwrap()
            .relaxed(&h, &h, EXACT_TOL);
        let g = Germ::new(h.clone(), h.clone(), f);
        let report = g.maximality_scan(&uniform_grid(0.01, 3.0, 120), 64);
        let non_members: Vec<_> = report.entries.iter().filter(|e| !e.member).collect();
        let picked: Vec<_> = (0..100.min(non_members.len()))
            .map(|k| non_members[k * non_members.len() / 100])
            .collect();
        let worst = picked
            .iter()
            .map(|e| e.dissipation.unwrap_or(f64::INFINITY))
            .fold(f64::NEG_INFINITY, f64::max);
        ok &= picked.len() == 100 && worst < -1e-6;
        details.push(format!(
            "{name}: {} non-members, 100 sampled, largest witness D {worst:.3e}",
            non_members.len()
        ));
    }
    outcome(ok, details.join("; "))
}

fn criterion_11() -> Outcome {
    let (a, w) = (abs_flux(), w_flux());
    let v_grid = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let mut details = Vec::new();
    let mut ok = true;
    let configs = [
        ("abs", a.clone(), JunctionFunction::from_godunov_pair(a.clone())),
        (
            "W limited 0.5",
            w.clone(),
            JunctionFunction::from_limited(w.clone(), w.clone(), 0.5).unwrap(),
        ),
    ];
    for (name, h, f0) in configs {
        let f = f0.relaxed(&h, &h, EXACT_TOL);
        let lip = h.lipschitz().max(f.lipschitz());
        let dx = 1e-3;
        let settings = SweepSettings {
            grid: GridSpec::new(dx, 1.2, 0.5, 0.9).unwrap(),
            window: (0.5, 1.0),
            witness_levels: uniform_grid(0.0, 3.0, 61),
            tol: Some(default_trace_tolerance(lip, dx)),
        };
        let report = riemann_completeness_sweep(&h, &h, &f, &v_grid, &settings);
        let failed = report
            .entries
            .iter()
            .filter(|e| !e.check.as_ref().is_some_and(|c| c.passed))
            .count();
        let worst_res = report
            .entries
            .iter()
            .filter_map(|e| e.check.as_ref().map(|c| c.membership_residual))
            .fold(0.0, f64::max);
        ok &= report.entries.len() == 25 && failed == 0;
        details.push(format!(
            "{name}: {failed}/25 failing, worst membership residual {worst_res:.3e} (tol {:.3e})",
            default_trace_tolerance(lip, dx)
        ));
    }
    outcome(ok, details.join("; "))
}

fn timed(label: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let o = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= budget;
    let passed = o.passed && in_time;
    println!(
        "[{}] criterion {label}: {} ({:.2} s, budget {} s{})",
        if passed { "PASS" } else { "FAIL" },
        o.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", over budget" }
    );
    passed
}

// Runs without the libtest harness so the per-criterion lines always show.
fn main() {
    let s = Duration::from_secs;
    let mut results = Vec::new();
    results.push(timed("1 (HJ-SCL link)", s(1), criterion_1));

    let start = Instant::now();
    let suite = build_suite();
    let suite_time = start.elapsed();
    println!("       randomized suite built in {:.2} s", suite_time.as_secs_f64());
    // the suite build is charged to each of the criteria that share it
    let with_suite = |budget: u64| s(budget).saturating_sub(suite_time);
    results.push(timed("2 (maximum principle)", with_suite(30), || criterion_2(&suite)));
    results.push(timed("3 (discrete entropy)", with_suite(30), || criterion_3(&suite)));
    results.push(timed("4 (L1 contraction)", with_suite(30), || criterion_4(&suite)));
    results.push(timed("5 (time BV)", with_suite(30), || criterion_5(&suite)));
    results.push(timed("6 (technical lemma)", s(30), criterion_6));
    results.push(timed("7 (relaxation operator)", s(60), criterion_7));
    results.push(timed("8 (Riemann golden case)", s(10), criterion_8));
    results.push(timed("9 (relaxation phenomenon)", s(60), criterion_9));
    results.push(timed("10 (maximality evidence)", s(10), criterion_10));
    results.push(timed("11 (completeness evidence)", s(120), criterion_11));
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
