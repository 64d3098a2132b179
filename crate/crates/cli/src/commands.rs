//! The five subcommands. Each writes its files into the output directory and
//! reports whether its checks passed.

use std::path::PathBuf;

use jscl_core::diagnostics::{
    check_discrete_entropy, check_hj_scl_link, check_hj_stability, check_l1_contraction,
    check_max_principle, check_space_bv, check_time_bv, compact_perturbation, convergence_study,
    default_trace_tolerance, default_witnesses, extract_traces, germ_trace_check,
    riemann_completeness_sweep, BvWindows, ConvergenceRow, StudyWindow, SweepSettings, TraceCheck,
};
use jscl_core::junction::{relax, uniform_grid};
use jscl_core::{
    run, underline_h, DiagnosticsReport, Germ, GermPoint, JunctionFunction, JunctionTable, PiecewiseLinear,
    Problem, RunOptions, TracePair, Trajectory,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::CliError;
use crate::output::{num, opt, OutputDir};

/// What a command produced.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub files: Vec<PathBuf>,
    /// One-line human summary.
    pub message: String,
}

/// Germ-related options from the command line.
#[derive(Debug, Clone, Default)]
pub struct GermArgs {
    pub classify: Option<(f64, f64)>,
    pub scan: bool,
    pub levels: Option<usize>,
    pub tol: Option<f64>,
}

/// Lowest level at which both fluxes have a non-empty level set.
fn base_level(hl: &PiecewiseLinear, hr: &PiecewiseLinear) -> f64 {
    hl.global_min().max(hr.global_min())
}

fn witness_levels(hl: &PiecewiseLinear, hr: &PiecewiseLinear, n: usize) -> Vec<f64> {
    let lo = base_level(hl, hr);
    uniform_grid(lo, lo + 4.0, n.max(2))
}

/// Up to `count` germ members spread over levels above the base level.
fn germ_constants(germ: &Germ, count: usize) -> Vec<GermPoint> {
    let lo = base_level(&germ.hl, &germ.hr);
    let members: Vec<GermPoint> = germ
        .rh_curve(&uniform_grid(lo, lo + 3.0, 13))
        .into_iter()
        .filter(|r| r.member)
        .map(|r| r.point)
        .collect();
    if members.len() <= count {
        return members;
    }
    (0..count).map(|k| members[k * members.len() / count]).collect()
}

fn trajectory_rows(traj: &Trajectory, every: usize, nodes: bool) -> Vec<String> {
    let layers = if nodes { &traj.u } else { &traj.v };
    let mut rows = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let n = traj.stored_steps[l];
        if !n.is_multiple_of(every) && n != traj.steps {
            continue;
        }
        let t = num(traj.time(n));
        for (k, val) in layer.iter().enumerate() {
            let x = if nodes { traj.grid.node_x(k) } else { traj.grid.cell_center(k) };
            rows.push(format!("{t},{},{}", num(x), num(*val)));
        }
    }
    rows
}

#[derive(Serialize)]
struct RunSummary {
    dt: f64,
    steps: usize,
    lipschitz: f64,
    warnings: Vec<String>,
    v0_sup: f64,
    v0_bv: f64,
    final_l1: f64,
    final_sup: f64,
    final_bv: f64,
    traces: Option<TracePair>,
    trace_check: Option<TraceCheck>,
    report: DiagnosticsReport,
}

pub fn cmd_run(cfg: &LoadedConfig, out: &OutputDir) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let d = &c.diagnostics;
    let fluxes = cfg.fluxes()?;
    let data = cfg.initial()?;
    let grid = cfg.grid()?;
    let dense = d.needs_dense();
    let options = RunOptions {
        snapshot_stride: if dense { 1 } else { c.output.snapshot_stride },
        evolve_hj: c.output.write_u || d.hj_stability || d.hj_scl_link,
        min_lipschitz: 0.0,
    };
    let problem = Problem::new(fluxes.clone(), data.clone(), grid).with_options(options);
    let traj = run(&problem).map_err(|e| CliError::solver("run", e))?;

    let mut report = DiagnosticsReport::default();
    report.metadata.insert("config_sha256".into(), out.meta.config_sha256.clone());
    report.metadata.insert("seed".into(), c.seed.to_string());
    report.metadata.insert("version".into(), out.meta.version.clone());
    let solver = |what: &str, e| CliError::solver(what, e);

    if d.max_principle {
        report.push(check_max_principle(&traj));
    }
    if d.entropy_constants > 0 {
        let germ = Germ::new(fluxes.hl.clone(), fluxes.hr.clone(), fluxes.f0.clone());
        for k in germ_constants(&germ, d.entropy_constants) {
            let mut r = check_discrete_entropy(&traj, &fluxes, k).map_err(|e| solver("discrete entropy", e))?;
            r.name = format!("{}({}, {})", r.name, num(k.p_l), num(k.p_r));
            report.push(r);
        }
    }
    if d.l1_contraction {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let other = compact_perturbation(&mut rng, &data, 0.5, 1.0);
        let partner = run(&Problem::new(fluxes.clone(), other, grid).with_options(options))
            .map_err(|e| solver("perturbed run", e))?;
        report.push(check_l1_contraction(&traj, &partner).map_err(|e| solver("l1 contraction", e))?.0);
    }
    if d.time_bv {
        report.push(check_time_bv(&traj).map_err(|e| solver("time bv", e))?);
    }
    if d.space_bv {
        report.push(check_space_bv(&traj, BvWindows::full(&grid)).map_err(|e| solver("space bv", e))?);
    }
    if d.hj_stability {
        report.push(check_hj_stability(&traj, &fluxes).map_err(|e| solver("hj stability", e))?);
    }
    if d.hj_scl_link {
        report.push(check_hj_scl_link(&traj).map_err(|e| solver("hj-scl link", e))?);
    }
    let (traces, trace_check) = match d.traces {
        Some([a, b]) => {
            let t = grid.t_final;
            let tr = extract_traces(&traj, a * t, b * t).map_err(|e| solver("traces", e))?;
            let germ = Germ::new(fluxes.hl.clone(), fluxes.hr.clone(), fluxes.f0.clone());
            let witnesses = default_witnesses(&germ, &witness_levels(&fluxes.hl, &fluxes.hr, 121));
            let tol = d
                .trace_tol
                .unwrap_or_else(|| default_trace_tolerance(traj.lipschitz, grid.dx));
            let check = germ_trace_check(tr.point(), &germ, &witnesses, tol);
            (Some(tr), Some(check))
        }
        None => (None, None),
    };
    let traces_ok = trace_check.as_ref().is_none_or(|t| t.passed);

    let mut files = vec![out.csv("v.csv", "t,x,v", trajectory_rows(&traj, c.output.snapshot_stride, false))?];
    if c.output.write_u && !traj.u.is_empty() {
        files.push(out.csv("u.csv", "t,x,u", trajectory_rows(&traj, c.output.snapshot_stride, true))?);
    }
    let last = traj.final_v();
    let dx = grid.dx;
    let summary = RunSummary {
        dt: traj.dt,
        steps: traj.steps,
        lipschitz: traj.lipschitz,
        warnings: traj.warnings.clone(),
        v0_sup: traj.v0_sup,
        v0_bv: traj.v0_bv,
        final_l1: last.iter().map(|x| x.abs()).sum::<f64>() * dx,
        final_sup: last.iter().fold(0.0, |m, x| m.max(x.abs())),
        final_bv: last.windows(2).map(|w| (w[1] - w[0]).abs()).sum(),
        traces,
        trace_check,
        report,
    };
    files.push(out.json("report.json", &summary)?);
    let failed: Vec<&str> = summary
        .report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let passed = failed.is_empty() && traces_ok;
    let message = if passed {
        format!("{} checks passed over {} steps", summary.report.checks.len(), traj.steps)
    } else if !traces_ok {
        "junction traces are not in the germ".to_string()
    } else {
        format!("failed checks: {}", failed.join(", "))
    };
    Ok(Outcome { passed, files, message })
}

#[derive(Serialize)]
struct RelaxSummary {
    points: usize,
    /// `max(underline_H - RF0)` over the table.
    below_underline: f64,
    /// `max |RF0 - F0|` over table nodes in the germ of `F0`.
    coincidence_gap: Option<f64>,
    coincidence_points: usize,
}

#[derive(Serialize)]
struct FamilySummary {
    eps: Vec<f64>,
    /// Sup distance between consecutive tabulations.
    successive_sup_diff: Vec<f64>,
}

fn relax_rows(
    f0: &JunctionFunction,
    hl: &PiecewiseLinear,
    hr: &PiecewiseLinear,
    table: &JunctionTable,
) -> Vec<String> {
    let mut rows = Vec::new();
    for (i, &a) in table.grid_l().iter().enumerate() {
        for (j, &b) in table.grid_r().iter().enumerate() {
            rows.push(format!(
                "{},{},{},{},{}",
                num(a),
                num(b),
                num(f0.eval(a, b)),
                num(table.samples()[i][j]),
                num(underline_h(hl, hr, a, b))
            ));
        }
    }
    rows
}

/// Axes that miss the flux breakpoints are a configuration problem.
fn relax_error(context: String, e: jscl_core::Error) -> CliError {
    match e {
        jscl_core::Error::InvalidGrid(m) => CliError::Config(format!("field `relax`: {m}")),
        e => CliError::solver(context, e),
    }
}

const RELAX_HEADER: &str = "p_L,p_R,F0,RF0,underlineH";

pub fn cmd_relax(cfg: &LoadedConfig, out: &OutputDir) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let (hl, hr) = (&c.hl, &c.hr);
    let (gl, gr) = (cfg.relax_axis(true), cfg.relax_axis(false));
    let tol = cfg.relax_tol();

    if !c.relax.eps_list.is_empty() {
        let mut tables = Vec::new();
        let mut files = Vec::new();
        for &eps in &c.relax.eps_list {
            let f0 = JunctionFunction::from_diehl_eps(eps).map_err(|e| CliError::Config(e.to_string()))?;
            let table = relax(&f0, hl, hr, &gl, &gr, tol).map_err(|e| relax_error(format!("relax eps={eps}"), e))?;
            files.push(out.csv(&format!("relax_eps_{eps}.csv"), RELAX_HEADER, relax_rows(&f0, hl, hr, &table))?);
            tables.push(table);
        }
        let diffs: Vec<f64> = tables
            .windows(2)
            .map(|w| {
                w[0].samples()
                    .iter()
                    .flatten()
                    .zip(w[1].samples().iter().flatten())
                    .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
            })
            .collect();
        files.push(out.json(
            "relax_summary.json",
            &FamilySummary {
                eps: c.relax.eps_list.clone(),
                successive_sup_diff: diffs.clone(),
            },
        )?);
        let message = format!(
            "{} tabulations; successive sup differences [{}]",
            tables.len(),
            diffs.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>().join(", ")
        );
        return Ok(Outcome {
            passed: true,
            files,
            message,
        });
    }

    let f0 = cfg.base_junction()?;
    let table = relax(&f0, hl, hr, &gl, &gr, tol).map_err(|e| relax_error("relax".into(), e))?;
    let below = gl
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| gr.iter().enumerate().map(move |(j, &b)| (i, j, a, b)))
        .fold(f64::NEG_INFINITY, |m, (i, j, a, b)| {
            m.max(underline_h(hl, hr, a, b) - table.samples()[i][j])
        });
    // table nodes that are germ points of F0, where RF0 must equal F0
    let germ = Germ::new(hl.clone(), hr.clone(), f0.clone());
    let mut coincidence: Option<f64> = None;
    let mut on_germ = 0;
    for (i, &a) in gl.iter().enumerate() {
        for (j, &b) in gr.iter().enumerate() {
            if germ.is_member(GermPoint::new(a, b)) {
                on_germ += 1;
                let gap = (table.samples()[i][j] - f0.eval(a, b)).abs();
                coincidence = Some(coincidence.map_or(gap, |m| m.max(gap)));
            }
        }
    }
    let summary = RelaxSummary {
        points: gl.len() * gr.len(),
        below_underline: below,
        coincidence_gap: coincidence,
        coincidence_points: on_germ,
    };
    let files = vec![
        out.csv("relax.csv", RELAX_HEADER, relax_rows(&f0, hl, hr, &table))?,
        out.json("relax_summary.json", &summary)?,
    ];
    let passed = below <= tol && coincidence.is_none_or(|g| g <= 1e-5);
    Ok(Outcome {
        passed,
        files,
        message: format!(
            "{} points; max(underlineH - RF0) {below:.3e}; |RF0 - F0| on {} germ nodes {}",
            summary.points,
            summary.coincidence_points,
            coincidence.map_or("n/a".into(), |g| format!("{g:.3e}"))
        ),
    })
}

#[derive(Serialize)]
struct Classification {
    p_l: f64,
    p_r: f64,
    member: bool,
    class: &'static str,
}

#[derive(Serialize)]
struct ScanSummary {
    assumption: String,
    levels: usize,
    entries: usize,
    non_members: usize,
    witness_tol: f64,
    counterexamples: Vec<GermPoint>,
}

pub fn cmd_germ(cfg: &LoadedConfig, out: &OutputDir, args: &GermArgs) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let germ = Germ::new(c.hl.clone(), c.hr.clone(), cfg.junction()?);
    let mut files = Vec::new();
    let mut messages = Vec::new();
    let mut passed = true;

    if let Some((p_l, p_r)) = args.classify {
        let p = GermPoint::new(p_l, p_r);
        let cls = Classification {
            p_l,
            p_r,
            member: germ.is_member(p),
            class: germ.classify_characteristic(p).as_str(),
        };
        messages.push(format!("({p_l}, {p_r}): {}", cls.class));
        files.push(out.json("germ_classify.json", &cls)?);
    }
    if args.scan || args.classify.is_none() {
        let spec = &c.germ;
        let levels = args.levels.unwrap_or(spec.levels);
        let tol = args.tol.unwrap_or(spec.tol);
        if levels == 0 || tol.is_nan() || tol < 0.0 {
            return Err(CliError::Config("--levels must be positive and --tol non-negative".into()));
        }
        let lo = spec.lambda_min.unwrap_or_else(|| base_level(&c.hl, &c.hr));
        let hi = spec.lambda_max.unwrap_or(lo + 3.0);
        let report = germ.maximality_scan(&uniform_grid(lo, hi, levels), spec.samples_per_level);
        let rows = report.entries.iter().map(|e| {
            let (wl, wr) = e.witness.map_or((None, None), |w| (Some(w.p_l), Some(w.p_r)));
            format!(
                "{},{},{},{},{},{},{},{}",
                num(e.point.p_l),
                num(e.point.p_r),
                num(e.lambda),
                e.member,
                e.class.as_str(),
                opt(wl),
                opt(wr),
                opt(e.dissipation)
            )
        });
        files.push(out.csv("germ.csv", "p_L,p_R,lambda,member,class,witness_pL,witness_pR,D", rows)?);
        let counterexamples: Vec<GermPoint> = report
            .entries
            .iter()
            .filter(|e| !e.member && !e.dissipation.is_some_and(|d| d < -tol))
            .map(|e| e.point)
            .collect();
        let summary = ScanSummary {
            assumption: report.assumption.clone(),
            levels,
            entries: report.entries.len(),
            non_members: report.non_members(),
            witness_tol: tol,
            counterexamples,
        };
        passed = summary.counterexamples.is_empty();
        messages.push(format!(
            "{} non-members scanned, {} without a witness",
            summary.non_members,
            summary.counterexamples.len()
        ));
        files.push(out.json("germ_summary.json", &summary)?);
    }
    Ok(Outcome {
        passed,
        files,
        message: messages.join("; "),
    })
}

pub fn cmd_sweep(cfg: &LoadedConfig, out: &OutputDir) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let spec = c
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("field `sweep`: required by this command".into()))?;
    let settings = SweepSettings {
        grid: cfg.grid()?,
        window: (spec.window[0], spec.window[1]),
        witness_levels: witness_levels(&c.hl, &c.hr, spec.witness_levels),
        tol: spec.tol,
    };
    let f = cfg.junction()?;
    let report = riemann_completeness_sweep(&c.hl, &c.hr, &f, &spec.values.points(), &settings);
    let rows = report.entries.iter().map(|e| match &e.check {
        Some(t) => format!(
            "{},{},{},{},{},{},{},{},",
            num(e.v_minus),
            num(e.v_plus),
            num(t.trace.p_l),
            num(t.trace.p_r),
            num(t.min_dissipation),
            num(t.membership_residual),
            num(t.tol),
            t.passed
        ),
        None => format!(
            "{},{},,,,,,false,{}",
            num(e.v_minus),
            num(e.v_plus),
            e.error.as_deref().unwrap_or("").replace(',', ";")
        ),
    });
    let files = vec![
        out.csv(
            "sweep.csv",
            "v_minus,v_plus,p_L,p_R,min_D,membership_residual,tol,passed,error",
            rows,
        )?,
        out.json("sweep_summary.json", &report)?,
    ];
    let failing = report
        .entries
        .iter()
        .filter(|e| !e.check.as_ref().is_some_and(|c| c.passed))
        .count();
    Ok(Outcome {
        passed: report.passed(),
        files,
        message: format!("{} Riemann problems, {failing} failing", report.entries.len()),
    })
}

pub fn cmd_converge(cfg: &LoadedConfig, out: &OutputDir) -> Result<Outcome, CliError> {
    let c = &cfg.config;
    let spec = c
        .converge
        .as_ref()
        .ok_or_else(|| CliError::Config("field `converge`: required by this command".into()))?;
    let problem = Problem::new(cfg.fluxes()?, cfg.initial()?, cfg.grid()?).with_options(RunOptions {
        snapshot_stride: usize::MAX,
        evolve_hj: true,
        min_lipschitz: 0.0,
    });
    let other = if spec.compare_relaxed {
        Some(cfg.base_junction()?.relaxed(&c.hl, &c.hr, cfg.relax_tol()))
    } else {
        None
    };
    let window = StudyWindow {
        x_min: spec.window[0],
        x_max: spec.window[1],
    };
    let rows: Vec<ConvergenceRow> = convergence_study(&problem, &spec.dx_list, other.as_ref(), window)
        .map_err(|e| match e {
            jscl_core::Error::InvalidGrid(m) => CliError::Config(format!("field `converge.dx_list`: {m}")),
            e => CliError::solver("convergence study", e),
        })?;
    // one row per refinement pair; the finest level's cross distance is in the summary
    let csv_rows = rows.iter().filter(|r| r.l1_diff.is_some()).map(|r| {
        format!("{},{},{},{}", num(r.dx), opt(r.l1_diff), opt(r.order), opt(r.cross_l1))
    });
    let files = vec![
        out.csv("converge.csv", "dx,L1_diff,order,cross_L1", csv_rows)?,
        out.json("converge_summary.json", &rows)?,
    ];
    let orders: Vec<String> = rows.iter().filter_map(|r| r.order).map(|o| format!("{o:.3}")).collect();
    Ok(Outcome {
        passed: true,
        files,
        message: format!("{} levels; observed orders [{}]", rows.len(), orders.join(", ")),
    })
}
