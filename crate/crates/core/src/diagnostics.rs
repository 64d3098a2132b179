//! Executable versions of the discrete estimates satisfied by the scheme,
//! numerical trace extraction, and refinement studies.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germ::{Germ, GermPoint};
use crate::junction::JunctionFunction;
use crate::pl_function::PiecewiseLinear;
use crate::solver::{run, Fluxes, GridSpec, InitialData, Problem, RunOptions, Simulation, Trajectory};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub worst: f64,
    pub threshold: f64,
    pub passed: bool,
    /// `(n, j)` of the worst case, when meaningful.
    pub location: Option<(usize, usize)>,
}

impl CheckResult {
    fn at_most(name: &str, worst: f64, threshold: f64, location: Option<(usize, usize)>) -> Self {
        Self {
            name: name.to_string(),
            worst,
            threshold,
            passed: worst.is_finite() && worst <= threshold,
            location,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub metadata: BTreeMap<String, String>,
    pub checks: Vec<CheckResult>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn push(&mut self, check: CheckResult) {
        self.checks.push(check);
    }
}

fn require_dense(traj: &Trajectory) -> Result<()> {
    if traj.is_dense() {
        Ok(())
    } else {
        Err(Error::NeedsDenseTrajectory { stride: traj.stride })
    }
}

fn at(v: &[f64], i: isize) -> f64 {
    v[i.clamp(0, v.len() as isize - 1) as usize]
}

/// `max(0, max_n ||v^n||_inf - ||v^0||_inf)` over the stored layers.
pub fn check_max_principle(traj: &Trajectory) -> CheckResult {
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let initial = sup(&traj.v[0]);
    let mut worst = 0.0;
    let mut loc = None;
    for (l, v) in traj.v.iter().enumerate() {
        let (k, x) = v
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |(bk, bx), (k, x)| if x.abs() > bx { (k, x.abs()) } else { (bk, bx) });
        let excess = x - initial;
        if excess > worst {
            worst = excess;
            loc = Some((traj.stored_steps[l], k));
        }
    }
    CheckResult::at_most("max_principle", worst, 1e-12, loc)
}

fn entropy_residual(fluxes: &Fluxes, v: [&[f64]; 2], w: [&[f64]; 2], dx: f64, dt: f64) -> (f64, usize) {
    let m = v[0].len() as isize;
    let jm = m / 2;
    let q = |i: isize| {
        let (a, b) = (at(v[0], i - 1), at(v[0], i));
        let (c, d) = (at(w[0], i - 1), at(w[0], i));
        let j = (i - jm) as i64;
        fluxes.numerical_flux(j, a.max(c), b.max(d)) - fluxes.numerical_flux(j, a.min(c), b.min(d))
    };
    let mut worst = 0.0;
    let mut loc = 0;
    let mut q_left = q(0);
    for k in 0..m {
        let q_right = q(k + 1);
        let ku = k as usize;
        let dv = ((v[1][ku] - w[1][ku]).abs() - (v[0][ku] - w[0][ku]).abs()) / dt;
        let lhs = dv + (q_right - q_left) / dx;
        if lhs > worst {
            worst = lhs;
            loc = ku;
        }
        q_left = q_right;
    }
    (worst, loc)
}

/// Entropy inequality against the stationary solution `kappa_Delta` of a germ constant.
pub fn check_discrete_entropy(traj: &Trajectory, fluxes: &Fluxes, k: GermPoint) -> Result<CheckResult> {
    require_dense(traj)?;
    let g = Germ::new(fluxes.hl.clone(), fluxes.hr.clone(), fluxes.f0.clone());
    if !g.is_member(k) {
        let lam = fluxes.hl.eval(k.p_l);
        let residual = (lam - fluxes.hr.eval(k.p_r))
            .abs()
            .max((lam - fluxes.f0.eval(k.p_l, k.p_r)).abs());
        return Err(Error::NotAGermConstant {
            k_l: k.p_l,
            k_r: k.p_r,
            residual,
        });
    }
    let m = traj.grid.cells();
    let kappa: Vec<f64> = (0..m).map(|i| if i < m / 2 { k.p_l } else { k.p_r }).collect();
    let mut worst = 0.0;
    let mut loc = None;
    for n in 0..traj.steps {
        let (r, j) = entropy_residual(
            fluxes,
            [&traj.v[n], &traj.v[n + 1]],
            [&kappa, &kappa],
            traj.grid.dx,
            traj.dt,
        );
        if r > worst {
            worst = r;
            loc = Some((n, j));
        }
    }
    Ok(CheckResult::at_most(
        "discrete_entropy",
        worst,
        1e-10 * (1.0 + traj.lipschitz),
        loc,
    ))
}

fn same_run_shape(a: &Trajectory, b: &Trajectory) -> Result<()> {
    if a.grid != b.grid || a.dt != b.dt || a.steps != b.steps {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Entropy inequality between two scheme solutions.
pub fn check_discrete_entropy_pair(a: &Trajectory, b: &Trajectory, fluxes: &Fluxes) -> Result<CheckResult> {
    same_run_shape(a, b)?;
    require_dense(a)?;
    require_dense(b)?;
    let mut worst = 0.0;
    let mut loc = None;
    for n in 0..a.steps {
        let (r, j) = entropy_residual(
            fluxes,
            [&a.v[n], &a.v[n + 1]],
            [&b.v[n], &b.v[n + 1]],
            a.grid.dx,
            a.dt,
        );
        if r > worst {
            worst = r;
            loc = Some((n, j));
        }
    }
    Ok(CheckResult::at_most(
        "discrete_entropy_pair",
        worst,
        1e-10 * (1.0 + a.lipschitz),
        loc,
    ))
}

/// `sum_j |v^A - v^B| dx` for every layer stored by both runs.
pub fn l1_distances(a: &Trajectory, b: &Trajectory) -> Result<Vec<f64>> {
    same_run_shape(a, b)?;
    let dx = a.grid.dx;
    Ok(a.stored_steps
        .iter()
        .filter_map(|&n| {
            let va = a.v_at_step(n).ok()?;
            let vb = b.v_at_step(n).ok()?;
            Some(va.iter().zip(vb).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx)
        })
        .collect())
}

/// The L1 distance between two runs never increases.
pub fn check_l1_contraction(a: &Trajectory, b: &Trajectory) -> Result<(CheckResult, Vec<f64>)> {
    let d = l1_distances(a, b)?;
    let mut worst = 0.0;
    let mut loc = None;
    for (l, w) in d.windows(2).enumerate() {
        let inc = w[1] - w[0];
        if inc > worst {
            worst = inc;
            loc = Some((a.stored_steps[l + 1], 0));
        }
    }
    Ok((CheckResult::at_most("l1_contraction", worst, 1e-10, loc), d))
}

/// `sum_j |v^{n+1} - v^n| dx / dt <= 2 L ||v0||_BV` for every step.
///
/// The worst value reported is the largest excess over the bound (0 when it holds).
pub fn check_time_bv(traj: &Trajectory) -> Result<CheckResult> {
    require_dense(traj)?;
    let bound = 2.0 * traj.lipschitz * traj.v0_bv;
    let dx = traj.grid.dx;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut loc = None;
    for n in 0..traj.steps {
        let lhs: f64 = traj.v[n + 1]
            .iter()
            .zip(&traj.v[n])
            .map(|(x, y)| (x - y).abs())
            .sum::<f64>()
            * dx
            / traj.dt;
        let excess = lhs - bound * (1.0 + 1e-8);
        if excess > worst_excess {
            worst_excess = excess;
            loc = Some((n, 0));
        }
    }
    let worst = worst_excess.max(0.0);
    Ok(CheckResult {
        name: "time_bv".into(),
        worst,
        threshold: 0.0,
        passed: worst == 0.0 || traj.steps == 0,
        location: loc,
    })
}

/// Index windows for the space BV estimate, in cell labels `j` of `v_{j+1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BvWindows {
    pub right: (i64, i64),
    pub left: (i64, i64),
}

impl BvWindows {
    /// `[1, J - 1]` on the right and `[-J + 1, -2]` on the left.
    pub fn full(grid: &GridSpec) -> Self {
        let j = grid.j_max() as i64;
        Self {
            right: (1, j - 1),
            left: (-j + 1, -2),
        }
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        let j = grid.j_max() as i64;
        let (jr, big_jr) = self.right;
        let (big_jl, jl) = self.left;
        if jr < 1 || big_jr < jr || big_jr > j - 1 {
            return Err(Error::BadWindow(format!(
                "right window [{jr}, {big_jr}] must satisfy 1 <= j_R <= J_R <= {}",
                j - 1
            )));
        }
        if jl > -2 || big_jl > jl || big_jl < -j {
            return Err(Error::BadWindow(format!(
                "left window [{big_jl}, {jl}] must satisfy {} <= J_L <= j_L <= -2",
                -j
            )));
        }
        Ok(())
    }
}

/// Space BV estimate on junction-avoiding windows, compared for every start
/// layer `n1` in `{1, N/2}` against all later layers.
pub fn check_space_bv(traj: &Trajectory, windows: BvWindows) -> Result<CheckResult> {
    windows.validate(&traj.grid)?;
    require_dense(traj)?;
    let jm = traj.grid.j_max() as isize;
    let cell = |n: usize, j: i64| at(&traj.v[n], j as isize + jm);
    let dx = traj.grid.dx;
    let dt = traj.dt;
    let c_cfl = 1.0 / (2.0 * traj.lipschitz);
    let big_n = traj.steps;
    let mut worst = 0.0_f64;
    let mut loc = None;

    let sides = [
        // (variation range, the two boundary cells whose time variation enters)
        (windows.right.0, windows.right.1, windows.right.0, windows.right.1 + 1),
        (windows.left.0, windows.left.1, windows.left.0, windows.left.1 + 1),
    ];
    for &(lo, hi, edge_a, edge_b) in &sides {
        let tv: Vec<f64> = (0..=big_n)
            .map(|n| (lo..=hi).map(|j| (cell(n, j + 1) - cell(n, j)).abs()).sum::<f64>() / dx)
            .collect();
        let edge: Vec<f64> = (0..big_n)
            .map(|n| {
                c_cfl
                    * ((cell(n + 1, edge_a) - cell(n, edge_a)).abs()
                        + (cell(n + 1, edge_b) - cell(n, edge_b)).abs())
                    / dt
            })
            .collect();
        let mut starts = vec![1, big_n / 2];
        starts.dedup();
        for &n1 in &starts {
            if n1 < 1 || n1 >= big_n {
                continue;
            }
            let mut acc = 0.0;
            for n2 in n1 + 1..=big_n {
                acc += edge[n2 - 1];
                let rhs = tv[n1] + acc;
                let excess = (tv[n2] - rhs) / rhs.max(1e-300);
                if excess > worst {
                    worst = excess;
                    loc = Some((n2, n1));
                }
            }
        }
    }
    Ok(CheckResult::at_most("space_bv", worst, 1e-8, loc))
}

/// `Q(a, b; c, d) = g(a v c, b v d) - g(a ^ c, b ^ d)` for a single Godunov flux.
pub fn godunov_entropy_flux(h: &PiecewiseLinear, a: f64, b: f64, c: f64, d: f64) -> f64 {
    h.godunov_flux(a.max(c), b.max(d)) - h.godunov_flux(a.min(c), b.min(d))
}

/// Worst `|Q(a, b; b, c)| - |g(a, b) - g(b, c)|` over random triples in `[-3, 3]^3`.
pub fn check_tech_lemma(h: &PiecewiseLinear, trials: usize, seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials.max(1) {
        let (a, b, c) = (
            rng.gen_range(-3.0..=3.0),
            rng.gen_range(-3.0..=3.0),
            rng.gen_range(-3.0..=3.0),
        );
        let q = godunov_entropy_flux(h, a, b, b, c);
        let gap = q.abs() - (h.godunov_flux(a, b) - h.godunov_flux(b, c)).abs();
        worst = worst.max(gap);
    }
    CheckResult::at_most("tech_lemma", worst.max(0.0), 1e-12, None)
}

/// `|u(t_n, x_j) - u(0, x_j)| <= C0 t_n + 1e-9` on stored layers, with `C0`
/// from the Lipschitz bound of the initial data.
pub fn check_hj_stability(traj: &Trajectory, fluxes: &Fluxes) -> Result<CheckResult> {
    if traj.u.is_empty() {
        return Err(Error::NotStored {
            step: 0,
            stride: traj.stride,
        });
    }
    let lip = traj.v0_sup;
    let c_f0 = fluxes
        .f0
        .eval(lip, -lip)
        .abs()
        .max(fluxes.f0.eval(-lip, lip).abs());
    let c0 = fluxes
        .hl
        .max_abs_on(-lip, lip)
        .max(fluxes.hr.max_abs_on(-lip, lip))
        .max(c_f0);
    let u0 = &traj.u[0];
    let mut worst = f64::NEG_INFINITY;
    let mut loc = None;
    for (l, u) in traj.u.iter().enumerate() {
        let n = traj.stored_steps[l];
        let t = traj.time(n);
        for (j, (a, b)) in u.iter().zip(u0).enumerate() {
            let excess = (a - b).abs() - c0 * t;
            if excess > worst {
                worst = excess;
                loc = Some((n, j));
            }
        }
    }
    Ok(CheckResult::at_most("hj_stability", worst.max(0.0), 1e-9, loc))
}

/// Largest `|v^n_{j+1/2} - (u^n_{j+1} - u^n_j) / dx|` over stored layers.
pub fn check_hj_scl_link(traj: &Trajectory) -> Result<CheckResult> {
    if traj.u.is_empty() {
        return Err(Error::NotStored {
            step: 0,
            stride: traj.stride,
        });
    }
    let dx = traj.grid.dx;
    let mut worst = 0.0;
    let mut loc = None;
    for (l, (u, v)) in traj.u.iter().zip(&traj.v).enumerate() {
        for (k, vk) in v.iter().enumerate() {
            let d = (vk - (u[k + 1] - u[k]) / dx).abs();
            if d > worst {
                worst = d;
                loc = Some((traj.stored_steps[l], k));
            }
        }
    }
    Ok(CheckResult::at_most(
        "hj_scl_link",
        worst,
        1e-10 * (1.0 + traj.v0_sup),
        loc,
    ))
}

/// Smallest finite-difference slope of the update map in any of its arguments,
/// over random triples in `[-bound, bound]^3` at the junction and on both sides.
pub fn scheme_monotonicity_probe(fluxes: &Fluxes, ratio: f64, bound: f64, trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst = f64::INFINITY;
    for t in 0..trials {
        let j = [-3_i64, -1, 0, 1, 4][t % 5];
        let x = [
            rng.gen_range(-bound..=bound),
            rng.gen_range(-bound..=bound),
            rng.gen_range(-bound..=bound),
        ];
        let base = fluxes.scheme_update(j, x[0], x[1], x[2], ratio);
        for arg in 0..3 {
            let mut y = x;
            y[arg] += h;
            let slope = (fluxes.scheme_update(j, y[0], y[1], y[2], ratio) - base) / h;
            worst = worst.min(slope);
        }
    }
    worst
}

/// One-step truncation error of the HJ scheme on `phi(x) = x^3` at `x0 != 0`,
/// with the matching observed orders.
pub fn consistency_orders(fluxes: &Fluxes, x0: f64, dx_list: &[f64]) -> Vec<(f64, f64, Option<f64>)> {
    let phi = |x: f64| x * x * x;
    let dphi = |x: f64| 3.0 * x * x;
    let h = if x0 < 0.0 { &fluxes.hl } else { &fluxes.hr };
    let j = if x0 < 0.0 { -1 } else { 1 };
    let errs: Vec<f64> = dx_list
        .iter()
        .map(|&dx| {
            let back = (phi(x0) - phi(x0 - dx)) / dx;
            let fwd = (phi(x0 + dx) - phi(x0)) / dx;
            (fluxes.numerical_flux(j, back, fwd) - h.eval(dphi(x0))).abs()
        })
        .collect();
    (0..dx_list.len())
        .map(|k| {
            let order = (k > 0).then(|| {
                (errs[k - 1] / errs[k]).ln() / (dx_list[k - 1] / dx_list[k]).ln()
            });
            (dx_list[k], errs[k], order)
        })
        .collect()
}

/// Junction-adjacent cell values averaged over a time window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePair {
    pub p_l: f64,
    pub p_r: f64,
    pub t0: f64,
    pub t1: f64,
    pub times: Vec<f64>,
    pub series: Vec<(f64, f64)>,
}

impl TracePair {
    pub fn point(&self) -> GermPoint {
        GermPoint::new(self.p_l, self.p_r)
    }
}

pub fn extract_traces(traj: &Trajectory, t0: f64, t1: f64) -> Result<TracePair> {
    if !(t0 <= t1 && t0 >= 0.0 && t1 <= traj.grid.t_final && t1 > 0.0) {
        return Err(Error::BadWindow(format!(
            "time window [{t0}, {t1}] must lie in (0, {}]",
            traj.grid.t_final
        )));
    }
    let mut times = Vec::new();
    let mut series = Vec::new();
    for (n, &pair) in traj.junction.iter().enumerate() {
        let t = traj.time(n);
        if t >= t0 && t <= t1 && t > 0.0 {
            times.push(t);
            series.push(pair);
        }
    }
    if series.is_empty() {
        return Err(Error::EmptyWindow { t0, t1 });
    }
    let k = series.len() as f64;
    let p_l = series.iter().map(|p| p.0).sum::<f64>() / k;
    let p_r = series.iter().map(|p| p.1).sum::<f64>() / k;
    Ok(TracePair {
        p_l,
        p_r,
        t0,
        t1,
        times,
        series,
    })
}

/// `5 L sqrt(dx)`.
pub fn default_trace_tolerance(lipschitz: f64, dx: f64) -> f64 {
    5.0 * lipschitz * dx.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    pub trace: GermPoint,
    pub min_dissipation: f64,
    pub worst_witness: Option<GermPoint>,
    pub membership_residual: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Members of `g` on the Rankine–Hugoniot curve over `levels`, plus its
/// characteristic points.
pub fn default_witnesses(g: &Germ, levels: &[f64]) -> Vec<GermPoint> {
    let mut w: Vec<GermPoint> = g
        .rh_curve(levels)
        .into_iter()
        .filter(|r| r.member)
        .map(|r| r.point)
        .collect();
    w.extend(g.characteristic_points());
    w
}

/// Dissipation of the traces against every witness, and their distance from the germ.
pub fn germ_trace_check(trace: GermPoint, g: &Germ, witnesses: &[GermPoint], tol: f64) -> TraceCheck {
    let (min_d, worst) = witnesses
        .iter()
        .map(|&k| (g.dissipation(trace, k), k))
        .fold((f64::INFINITY, None), |(m, w), (d, k)| if d < m { (d, Some(k)) } else { (m, w) });
    let lam = g.hl.eval(trace.p_l);
    let membership_residual = (lam - g.hr.eval(trace.p_r))
        .abs()
        .max((lam - g.f.eval(trace.p_l, trace.p_r)).abs());
    TraceCheck {
        trace,
        min_dissipation: min_d,
        worst_witness: worst,
        membership_residual,
        tol,
        passed: min_d >= -tol && membership_residual <= tol,
    }
}

/// One row of a refinement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub dx: f64,
    /// `||v_dx - v_{dx/2}||_{L1}` over the window; absent on the finest level.
    pub l1_diff: Option<f64>,
    /// `||u_dx - u_{dx/2}||_inf` at the shared nodes in the window.
    pub linf_u_diff: Option<f64>,
    /// `log2` of the ratio of consecutive L1 differences.
    pub order: Option<f64>,
    /// `||v^{F0} - v^{other}||_{L1}` at this resolution, when a second junction is given.
    pub cross_l1: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub x_min: f64,
    pub x_max: f64,
}

impl Default for StudyWindow {
    fn default() -> Self {
        Self {
            x_min: -1.0,
            x_max: 1.0,
        }
    }
}

/// Space-time L1 distance of `v` over `[0, T] x window` and the sup distance of
/// `u` at common nodes, advancing both runs together. The coarse grid's cells
/// must be unions of fine cells (`dx` ratio an integer).
pub fn coupled_distance(a: &Problem, b: &Problem, window: StudyWindow) -> Result<(f64, Option<f64>)> {
    let mut sa = Simulation::new(a)?;
    let mut sb = Simulation::new(b)?;
    let (ga, gb) = (a.grid, b.grid);
    if ga.t_final != gb.t_final {
        return Err(Error::GridMismatch);
    }
    let t_final = ga.t_final;
    let ja = ga.j_max() as f64;
    let jb = gb.j_max() as f64;
    // fine cells (of b, or of a if a is finer) mapped to the coarse cell containing their center
    let (fine_is_b, gf, gc) = if gb.dx <= ga.dx { (true, gb, ga) } else { (false, ga, gb) };
    let (jf, jc) = if fine_is_b { (jb, ja) } else { (ja, jb) };
    let map: Vec<(usize, usize)> = (0..gf.cells())
        .filter_map(|k| {
            let x = gf.cell_center(k);
            if x < window.x_min || x > window.x_max {
                return None;
            }
            let kc = ((x + jc * gc.dx) / gc.dx).floor();
            (kc >= 0.0 && (kc as usize) < gc.cells()).then_some((k, kc as usize))
        })
        .collect();
    let node_map: Vec<(usize, usize)> = (0..gc.nodes())
        .filter_map(|i| {
            let x = gc.node_x(i);
            if x < window.x_min || x > window.x_max {
                return None;
            }
            let fi = (x + jf * gf.dx) / gf.dx;
            let r = fi.round();
            ((fi - r).abs() < 1e-6 && r >= 0.0 && (r as usize) < gf.nodes()).then_some((i, r as usize))
        })
        .collect();

    let time_of = |s: &Simulation, n: usize| if n >= s.steps { t_final } else { n as f64 * s.dt };
    let spatial = |sa: &Simulation, sb: &Simulation| {
        let (vf, vc) = if fine_is_b { (sb.v(), sa.v()) } else { (sa.v(), sb.v()) };
        map.iter().map(|&(k, kc)| (vf[k] - vc[kc]).abs()).sum::<f64>() * gf.dx
    };
    let u_gap = |sa: &Simulation, sb: &Simulation| -> Option<f64> {
        if sa.u().is_empty() || sb.u().is_empty() {
            return None;
        }
        let (uf, uc) = if fine_is_b { (sb.u(), sa.u()) } else { (sa.u(), sb.u()) };
        Some(node_map.iter().fold(0.0, |m, &(i, fi)| m.max((uc[i] - uf[fi]).abs())))
    };

    let mut total = 0.0;
    let mut t = 0.0;
    let mut u_sup = u_gap(&sa, &sb);
    while t < t_final && !(sa.done() && sb.done()) {
        let na = time_of(&sa, sa.step_index() + 1);
        let nb = time_of(&sb, sb.step_index() + 1);
        let next = na.min(nb);
        total += (next - t) * spatial(&sa, &sb);
        let eps = 1e-12 * t_final.max(1.0);
        let step_a = !sa.done() && na <= next + eps;
        let step_b = !sb.done() && nb <= next + eps;
        if step_a {
            sa.step()?;
        }
        if step_b {
            sb.step()?;
        }
        t = next;
        if let (Some(m), Some(g)) = (u_sup, u_gap(&sa, &sb)) {
            // compare u only when both runs sit at the same time level
            if (time_of(&sa, sa.step_index()) - time_of(&sb, sb.step_index())).abs() <= eps {
                u_sup = Some(m.max(g));
            }
        }
    }
    Ok((total, u_sup))
}

/// `||v^{F0} - v^{other}||_{L1([0, T] x window)}` for `problem` run with its
/// own junction function and with `other`, on a common time grid.
pub fn cross_distance(problem: &Problem, other: &JunctionFunction, window: StudyWindow) -> Result<f64> {
    let mut pa = problem.clone();
    pa.options.min_lipschitz = pa.fluxes.lipschitz().max(other.lipschitz());
    pa.options.evolve_hj = false;
    let mut pb = pa.clone();
    pb.fluxes.f0 = other.clone();
    Ok(coupled_distance(&pa, &pb, window)?.0)
}

/// Successive-refinement differences for `problem` at each `dx`, optionally
/// with the L1 distance to the same problem run with `other` as junction
/// function (both on the same time grid).
pub fn convergence_study(
    problem: &Problem,
    dx_list: &[f64],
    other: Option<&JunctionFunction>,
    window: StudyWindow,
) -> Result<Vec<ConvergenceRow>> {
    if dx_list.is_empty() || dx_list.windows(2).any(|w| (w[0] / w[1] - 2.0).abs() > 1e-9) {
        return Err(Error::InvalidGrid(
            "dx list must be non-empty and halve at every entry".into(),
        ));
    }
    let at_dx = |dx: f64| {
        let mut p = problem.clone();
        p.grid.dx = dx;
        p
    };
    let tasks: Vec<usize> = (0..dx_list.len()).collect();
    let results: Vec<Result<(Option<(f64, Option<f64>)>, Option<f64>)>> = tasks
        .par_iter()
        .map(|&k| {
            let p = at_dx(dx_list[k]);
            let diff = if k + 1 < dx_list.len() {
                Some(coupled_distance(&p, &at_dx(dx_list[k + 1]), window)?)
            } else {
                None
            };
            let cross = match other {
                Some(f) => Some(cross_distance(&p, f, window)?),
                None => None,
            };
            Ok((diff, cross))
        })
        .collect();
    let mut rows = Vec::with_capacity(dx_list.len());
    for (k, r) in results.into_iter().enumerate() {
        let (diff, cross) = r?;
        rows.push(ConvergenceRow {
            dx: dx_list[k],
            l1_diff: diff.map(|d| d.0),
            linf_u_diff: diff.and_then(|d| d.1),
            order: None,
            cross_l1: cross,
        });
    }
    for k in 1..rows.len() {
        if let (Some(a), Some(b)) = (rows[k - 1].l1_diff, rows[k].l1_diff) {
            rows[k].order = Some((a / b).log2());
        }
    }
    Ok(rows)
}

/// `int_lo^hi |v(t_n, x) - profile(x)| dx`, with `sub` midpoint samples per cell.
pub fn l1_error_against(
    traj: &Trajectory,
    n: usize,
    profile: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    sub: usize,
) -> Result<f64> {
    let v = traj.v_at_step(n)?;
    let g = &traj.grid;
    let sub = sub.max(1);
    let h = g.dx / sub as f64;
    let mut total = 0.0;
    for (k, vk) in v.iter().enumerate() {
        let left = g.node_x(k);
        for s in 0..sub {
            let (a, b) = (left + s as f64 * h, left + (s + 1) as f64 * h);
            let (a, b) = (a.max(lo), b.min(hi));
            if b > a {
                total += (vk - profile(0.5 * (a + b))).abs() * (b - a);
            }
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub v_minus: f64,
    pub v_plus: f64,
    pub check: Option<TraceCheck>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.check.as_ref().is_some_and(|c| c.passed))
    }
}

/// Settings shared by all runs of a Riemann sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub grid: GridSpec,
    /// Trace averaging window as fractions of `T`.
    pub window: (f64, f64),
    pub witness_levels: Vec<f64>,
    pub tol: Option<f64>,
}

/// Runs every Riemann problem on `v_grid^2` with junction `f` and checks the
/// junction traces against the germ of `f`.
pub fn riemann_completeness_sweep(
    hl: &PiecewiseLinear,
    hr: &PiecewiseLinear,
    f: &JunctionFunction,
    v_grid: &[f64],
    settings: &SweepSettings,
) -> SweepReport {
    let germ = Germ::new(hl.clone(), hr.clone(), f.clone());
    let witnesses = default_witnesses(&germ, &settings.witness_levels);
    let fluxes = Fluxes::new(hl.clone(), hr.clone(), f.clone());
    let tol = settings
        .tol
        .unwrap_or_else(|| default_trace_tolerance(fluxes.lipschitz(), settings.grid.dx));
    let pairs: Vec<(f64, f64)> = v_grid
        .iter()
        .flat_map(|&a| v_grid.iter().map(move |&b| (a, b)))
        .collect();
    let entries = pairs
        .par_iter()
        .map(|&(vm, vp)| {
            let outcome = (|| -> Result<TraceCheck> {
                let data = InitialData::riemann(vm, vp)?;
                let problem = Problem::new(fluxes.clone(), data, settings.grid).with_options(RunOptions {
                    snapshot_stride: usize::MAX,
                    evolve_hj: false,
                    min_lipschitz: 0.0,
                });
                let traj = run(&problem)?;
                let t = settings.grid.t_final;
                let tr = extract_traces(&traj, settings.window.0 * t, settings.window.1 * t)?;
                Ok(germ_trace_check(tr.point(), &germ, &witnesses, tol))
            })();
            match outcome {
                Ok(c) => SweepEntry {
                    v_minus: vm,
                    v_plus: vp,
                    check: Some(c),
                    error: None,
                },
                Err(e) => SweepEntry {
                    v_minus: vm,
                    v_plus: vp,
                    check: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    SweepReport { entries }
}

/// Random staircase `v0` with `jumps` discontinuities in `[-extent, extent]`
/// and values in `[-amplitude, amplitude]`.
pub fn random_bv_data(rng: &mut impl Rng, jumps: usize, extent: f64, amplitude: f64) -> InitialData {
    let mut xs: Vec<f64> = (0..jumps).map(|_| rng.gen_range(-extent..extent)).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let values = (0..=xs.len())
        .map(|_| rng.gen_range(-amplitude..=amplitude))
        .collect();
    InitialData::cells(xs, values).expect("sorted finite jumps")
}

/// `data` changed only on `[-extent, extent]`, so the two differ on a compact set.
pub fn compact_perturbation(rng: &mut impl Rng, data: &InitialData, extent: f64, amplitude: f64) -> InitialData {
    let mut xs: Vec<f64> = (0..4).map(|_| rng.gen_range(-extent..extent)).collect();
    xs.push(-extent);
    xs.push(extent);
    xs.extend(data.jumps().iter().copied());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let values = (0..=xs.len())
        .map(|k| {
            // probe point inside piece k
            let x = if k == 0 {
                xs[0] - 1.0
            } else if k == xs.len() {
                xs[k - 1] + 1.0
            } else {
                0.5 * (xs[k - 1] + xs[k])
            };
            if x.abs() < extent {
                rng.gen_range(-amplitude..=amplitude)
            } else {
                data.v_at(x)
            }
        })
        .collect();
    InitialData::cells(xs, values).expect("sorted finite jumps")
}
