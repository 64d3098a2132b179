//! Junction functions `F0(p_L, p_R)` and the Godunov relaxation operator.
//!
//! The relaxed value `RF0(p)` is the level `lambda` at which
//! `g_L(p_L, q_L) = F(q_L, q_R) = g_R(q_R, p_R)` can be met for some `q`,
//! with `F = max(F0, underline_h)`. For fixed `p` the sets
//! `A_L(lambda) = {q_L : g_L(p_L, q_L) = lambda}` move left and
//! `A_R(lambda) = {q_R : g_R(q_R, p_R) = lambda}` move right as `lambda` grows,
//! so `F` over `A_L x A_R` is non-increasing in `lambda` while `lambda` itself
//! increases. The root is therefore unique and found by bisection on `lambda`,
//! with the level sets computed exactly from the piecewise-linear fluxes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pl_function::PiecewiseLinear;

/// Default membership/relaxation tolerance when every ingredient is evaluated exactly.
pub const EXACT_TOL: f64 = 1e-9;
/// Default tolerance when the junction function comes from a sampled table.
pub const TABULATED_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawJunctionTable {
    #[serde(rename = "grid_L")]
    grid_l: Vec<f64>,
    #[serde(rename = "grid_R")]
    grid_r: Vec<f64>,
    samples: Vec<Vec<f64>>,
    #[serde(rename = "ext_slope_L")]
    ext_slope_l: f64,
    #[serde(rename = "ext_slope_R")]
    ext_slope_r: f64,
}

/// Grid-sampled junction function: bilinear inside the grid, linear extension outside.
///
/// `samples[i][j]` is the value at `(grid_l[i], grid_r[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJunctionTable", into = "RawJunctionTable")]
pub struct JunctionTable {
    grid_l: Vec<f64>,
    grid_r: Vec<f64>,
    samples: Vec<Vec<f64>>,
    ext_slope_l: f64,
    ext_slope_r: f64,
}

impl TryFrom<RawJunctionTable> for JunctionTable {
    type Error = Error;

    fn try_from(raw: RawJunctionTable) -> Result<Self> {
        JunctionTable::new(
            raw.grid_l,
            raw.grid_r,
            raw.samples,
            raw.ext_slope_l,
            raw.ext_slope_r,
        )
    }
}

impl From<JunctionTable> for RawJunctionTable {
    fn from(t: JunctionTable) -> Self {
        RawJunctionTable {
            grid_l: t.grid_l,
            grid_r: t.grid_r,
            samples: t.samples,
            ext_slope_l: t.ext_slope_l,
            ext_slope_r: t.ext_slope_r,
        }
    }
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidJunction(format!("{name} needs at least two nodes")));
    }
    if grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidJunction(format!(
            "{name} must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// Cell index `k` and weight `t` with `x ~ grid[k] + t (grid[k+1] - grid[k])`,
/// plus the clamped coordinate.
fn locate(grid: &[f64], x: f64) -> (usize, f64, f64) {
    let n = grid.len();
    let c = x.clamp(grid[0], grid[n - 1]);
    let k = grid.partition_point(|&g| g <= c).clamp(1, n - 1) - 1;
    let t = (c - grid[k]) / (grid[k + 1] - grid[k]);
    (k, t, c)
}

impl JunctionTable {
    pub fn new(
        grid_l: Vec<f64>,
        grid_r: Vec<f64>,
        samples: Vec<Vec<f64>>,
        ext_slope_l: f64,
        ext_slope_r: f64,
    ) -> Result<Self> {
        check_grid("grid_L", &grid_l)?;
        check_grid("grid_R", &grid_r)?;
        if samples.len() != grid_l.len() || samples.iter().any(|row| row.len() != grid_r.len()) {
            return Err(Error::InvalidJunction(format!(
                "samples must be {} rows of {} values",
                grid_l.len(),
                grid_r.len()
            )));
        }
        if samples.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidJunction("non-finite sample".into()));
        }
        if !(ext_slope_l > 0.0 && ext_slope_r < 0.0) {
            return Err(Error::InvalidJunction(format!(
                "extension slopes must satisfy ext_slope_L > 0 > ext_slope_R, got {ext_slope_l}, {ext_slope_r}"
            )));
        }
        for i in 0..grid_l.len() {
            for j in 0..grid_r.len() {
                if i + 1 < grid_l.len() && samples[i + 1][j] < samples[i][j] {
                    return Err(Error::InvalidJunction(format!(
                        "samples decrease in p_L between rows {i} and {}",
                        i + 1
                    )));
                }
                if j + 1 < grid_r.len() && samples[i][j + 1] > samples[i][j] {
                    return Err(Error::InvalidJunction(format!(
                        "samples increase in p_R between columns {j} and {}",
                        j + 1
                    )));
                }
            }
        }
        Ok(Self {
            grid_l,
            grid_r,
            samples,
            ext_slope_l,
            ext_slope_r,
        })
    }

    pub fn grid_l(&self) -> &[f64] {
        &self.grid_l
    }

    pub fn grid_r(&self) -> &[f64] {
        &self.grid_r
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn eval(&self, p_l: f64, p_r: f64) -> f64 {
        let (i, s, cl) = locate(&self.grid_l, p_l);
        let (j, t, cr) = locate(&self.grid_r, p_r);
        let f = &self.samples;
        let inner = (1.0 - s) * ((1.0 - t) * f[i][j] + t * f[i][j + 1])
            + s * ((1.0 - t) * f[i + 1][j] + t * f[i + 1][j + 1]);
        inner + self.ext_slope_l * (p_l - cl) + self.ext_slope_r * (p_r - cr)
    }

    /// Largest per-variable slope of the interpolant, extensions included.
    pub fn lipschitz(&self) -> f64 {
        let f = &self.samples;
        let mut l = self.ext_slope_l.abs().max(self.ext_slope_r.abs());
        for i in 0..self.grid_l.len() {
            for j in 0..self.grid_r.len() {
                if i + 1 < self.grid_l.len() {
                    let d = (f[i + 1][j] - f[i][j]) / (self.grid_l[i + 1] - self.grid_l[i]);
                    l = l.max(d.abs());
                }
                if j + 1 < self.grid_r.len() {
                    let d = (f[i][j + 1] - f[i][j]) / (self.grid_r[j + 1] - self.grid_r[j]);
                    l = l.max(d.abs());
                }
            }
        }
        l
    }
}

/// `F0` evaluated lazily through the relaxation operator.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedJunction {
    pub base: JunctionFunction,
    pub hl: PiecewiseLinear,
    pub hr: PiecewiseLinear,
    pub tol: f64,
}

/// A monotone (non-decreasing in `p_L`, non-increasing in `p_R`), Lipschitz,
/// coercive junction function.
#[derive(Debug, Clone, PartialEq)]
pub enum JunctionFunction {
    Table(JunctionTable),
    /// `F(a, b) = g^H(a, b)`: the single-flux junction.
    GodunovPair(PiecewiseLinear),
    /// `F(a, b) = max(level, H_{L,+}(a), H_{R,-}(b))`.
    Limited {
        hl: PiecewiseLinear,
        hr: PiecewiseLinear,
        level: f64,
    },
    /// `F(a, b) = (a - b) / eps`.
    Diehl { eps: f64 },
    /// `RF0` evaluated exactly (up to `tol`) at every call.
    Relaxed(Box<RelaxedJunction>),
}

impl JunctionFunction {
    pub fn from_godunov_pair(h: PiecewiseLinear) -> Self {
        Self::GodunovPair(h)
    }

    pub fn from_limited(hl: PiecewiseLinear, hr: PiecewiseLinear, level: f64) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::InvalidJunction("limiter level must be finite".into()));
        }
        Ok(Self::Limited { hl, hr, level })
    }

    pub fn from_diehl_eps(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidJunction(format!("eps must be positive, got {eps}")));
        }
        Ok(Self::Diehl { eps })
    }

    /// The relaxation of `self`, evaluated on demand.
    pub fn relaxed(self, hl: &PiecewiseLinear, hr: &PiecewiseLinear, tol: f64) -> Self {
        Self::Relaxed(Box::new(RelaxedJunction {
            base: self,
            hl: hl.clone(),
            hr: hr.clone(),
            tol,
        }))
    }

    /// Evaluation. A relaxed junction whose relaxation fails yields NaN, which
    /// the solvers report as a non-finite state.
    pub fn eval(&self, p_l: f64, p_r: f64) -> f64 {
        match self {
            Self::Table(t) => t.eval(p_l, p_r),
            Self::GodunovPair(h) => h.godunov_flux(p_l, p_r),
            Self::Limited { hl, hr, level } => level
                .max(hl.monotone_envelope_plus(p_l))
                .max(hr.monotone_envelope_minus(p_r)),
            Self::Diehl { eps } => (p_l - p_r) / eps,
            Self::Relaxed(r) => relax_eval(&r.base, &r.hl, &r.hr, p_l, p_r, r.tol)
                .map_or(f64::NAN, |s| s.lambda),
        }
    }

    /// Per-variable Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Self::Table(t) => t.lipschitz(),
            Self::GodunovPair(h) => h.lipschitz(),
            Self::Limited { hl, hr, .. } => hl.lipschitz().max(hr.lipschitz()),
            Self::Diehl { eps } => 1.0 / eps,
            // RF0 is L_L-Lipschitz in p_L and L_R-Lipschitz in p_R
            Self::Relaxed(r) => r.hl.lipschitz().max(r.hr.lipschitz()),
        }
    }

    /// Samples `self` on a product grid.
    pub fn tabulate(
        &self,
        grid_l: &[f64],
        grid_r: &[f64],
        ext_slope_l: f64,
        ext_slope_r: f64,
    ) -> Result<JunctionTable> {
        let samples = grid_l
            .iter()
            .map(|&a| grid_r.iter().map(|&b| self.eval(a, b)).collect())
            .collect();
        JunctionTable::new(
            grid_l.to_vec(),
            grid_r.to_vec(),
            samples,
            ext_slope_l,
            ext_slope_r,
        )
    }
}

/// `max(H_{L,+}(p_L), H_{R,-}(p_R))`.
pub fn underline_h(hl: &PiecewiseLinear, hr: &PiecewiseLinear, p_l: f64, p_r: f64) -> f64 {
    hl.monotone_envelope_plus(p_l)
        .max(hr.monotone_envelope_minus(p_r))
}

/// Outcome of [`relax_eval`]: the relaxed value and one admissible `(q_L, q_R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub lambda: f64,
    pub q_l: f64,
    pub q_r: f64,
    /// Largest of the three deviations from `lambda` at `(q_L, q_R)`.
    pub residual: f64,
}

struct RelaxProblem<'a> {
    base: &'a JunctionFunction,
    hl: &'a PiecewiseLinear,
    hr: &'a PiecewiseLinear,
    p_l: f64,
    p_r: f64,
}

const MAX_BISECTIONS: usize = 200;
const MAX_DOUBLINGS: usize = 200;

fn bisect(mut good: f64, mut bad: f64, pred: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if pred(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

impl RelaxProblem<'_> {
    fn lifted(&self, q_l: f64, q_r: f64) -> f64 {
        self.base
            .eval(q_l, q_r)
            .max(underline_h(self.hl, self.hr, q_l, q_r))
    }

    fn sets(&self, lambda: f64) -> Option<((f64, f64), (f64, f64))> {
        let a_l = self.hl.godunov_level_in_second(self.p_l, lambda)?;
        let a_r = self.hr.godunov_level_in_first(self.p_r, lambda)?;
        Some((a_l, a_r))
    }

    /// Largest value of the lifted function over `A_L x A_R`.
    fn upper(&self, lambda: f64) -> f64 {
        match self.sets(lambda) {
            Some(((_, b_l), (a_r, _))) if b_l.is_finite() && a_r.is_finite() => {
                self.lifted(b_l, a_r)
            }
            Some(_) => f64::INFINITY,
            None => f64::NEG_INFINITY,
        }
    }

    /// Smallest value of the lifted function over `A_L x A_R`.
    fn lower(&self, lambda: f64) -> f64 {
        match self.sets(lambda) {
            Some(((a_l, _), (_, b_r))) => self.lifted(a_l, b_r),
            None => f64::NEG_INFINITY,
        }
    }

    fn residual(&self, lambda: f64, q_l: f64, q_r: f64) -> f64 {
        let gl = self.hl.godunov_flux(self.p_l, q_l);
        let gr = self.hr.godunov_flux(q_r, self.p_r);
        let f = self.lifted(q_l, q_r);
        (gl - lambda)
            .abs()
            .max((f - lambda).abs())
            .max((gr - lambda).abs())
    }

    /// Finite stand-in for an unbounded end of a level interval: move outward
    /// from `from` until the lifted function reaches `target`.
    fn cap(&self, from: f64, dir: f64, other: f64, left_side: bool, target: f64) -> Option<f64> {
        let mut step = 1.0;
        for _ in 0..MAX_DOUBLINGS {
            let q = from + dir * step;
            let v = if left_side {
                self.lifted(q, other)
            } else {
                self.lifted(other, q)
            };
            if v >= target {
                return Some(q);
            }
            step *= 2.0;
        }
        None
    }
}

/// Relaxed junction value `RF0(p_L, p_R)`.
///
/// Fails with [`Error::AmbiguousLambda`] when the admissible levels spread
/// over more than `10 tol`, and with [`Error::NoSolution`] when no
/// `(q_L, q_R)` reproduces the level within `tol`.
pub fn relax_eval(
    f0: &JunctionFunction,
    hl: &PiecewiseLinear,
    hr: &PiecewiseLinear,
    p_l: f64,
    p_r: f64,
    tol: f64,
) -> Result<Relaxation> {
    let no_solution = |residual: f64| Error::NoSolution { p_l, p_r, residual };
    if !(p_l.is_finite() && p_r.is_finite()) {
        return Err(no_solution(f64::INFINITY));
    }
    let prob = RelaxProblem {
        base: f0,
        hl,
        hr,
        p_l,
        p_r,
    };
    let floor = underline_h(hl, hr, p_l, p_r);

    // bracket: lower(top) < top
    let mut step = 1.0_f64.max(floor.abs());
    let mut top = floor + step;
    let mut doublings = 0;
    while prob.lower(top) >= top || prob.upper(top) >= top {
        step *= 2.0;
        top = floor + step;
        doublings += 1;
        if doublings > MAX_DOUBLINGS {
            return Err(no_solution(f64::INFINITY));
        }
    }

    let lam_a = if prob.lower(floor) <= floor {
        floor
    } else {
        // smallest level at which even the lowest attainable value drops to the level
        bisect(top, floor, |l| prob.lower(l) <= l)
    };
    // largest level at which the highest attainable value still reaches the level
    let lam_b = bisect(floor, top, |l| prob.upper(l) >= l);

    if lam_b - lam_a > 10.0 * tol {
        return Err(Error::AmbiguousLambda {
            p_l,
            p_r,
            lo: lam_a,
            hi: lam_b,
        });
    }
    let lambda = 0.5 * (lam_a + lam_b);

    let delta = 0.25 * tol;
    let lam_lo = (lambda - delta).max(floor);
    let lam_hi = lambda + delta;
    let ((a_l_hi, _), (_, b_r_hi)) = prob.sets(lam_hi).ok_or_else(|| no_solution(f64::INFINITY))?;
    let ((_, mut b_l_lo), (mut a_r_lo, _)) =
        prob.sets(lam_lo).ok_or_else(|| no_solution(f64::INFINITY))?;
    if !a_r_lo.is_finite() {
        a_r_lo = prob
            .cap(b_r_hi, -1.0, b_l_lo.min(a_l_hi + 1.0), false, lam_lo)
            .ok_or_else(|| no_solution(f64::INFINITY))?;
    }
    if !b_l_lo.is_finite() {
        b_l_lo = prob
            .cap(a_l_hi, 1.0, a_r_lo, true, lam_lo)
            .ok_or_else(|| no_solution(f64::INFINITY))?;
    }
    // along the segment the lifted function is non-decreasing in s
    let point = |s: f64| {
        (
            a_l_hi + s * (b_l_lo - a_l_hi),
            b_r_hi + s * (a_r_lo - b_r_hi),
        )
    };
    let value = |s: f64| {
        let (ql, qr) = point(s);
        prob.lifted(ql, qr)
    };
    let s = if value(0.0) >= lambda {
        0.0
    } else if value(1.0) <= lambda {
        1.0
    } else {
        let s_lo = bisect(0.0, 1.0, |s| value(s) <= lambda);
        let s_hi = (s_lo + f64::EPSILON).min(1.0);
        if (value(s_hi) - lambda).abs() < (value(s_lo) - lambda).abs() {
            s_hi
        } else {
            s_lo
        }
    };
    let (q_l, q_r) = point(s);
    let residual = prob.residual(lambda, q_l, q_r);
    if !(residual <= tol) {
        return Err(no_solution(residual));
    }
    Ok(Relaxation {
        lambda,
        q_l,
        q_r,
        residual,
    })
}

/// Tabulates `RF0` on `grid_l x grid_r`.
///
/// The grids must extend at least one unit beyond the breakpoints of the
/// corresponding flux. Tabulated values are checked for monotonicity up to
/// `tol` and then made exactly monotone.
pub fn relax(
    f0: &JunctionFunction,
    hl: &PiecewiseLinear,
    hr: &PiecewiseLinear,
    grid_l: &[f64],
    grid_r: &[f64],
    tol: f64,
) -> Result<JunctionTable> {
    check_grid("grid_L", grid_l).map_err(|e| Error::InvalidGrid(e.to_string()))?;
    check_grid("grid_R", grid_r).map_err(|e| Error::InvalidGrid(e.to_string()))?;
    check_cover("grid_L", grid_l, hl)?;
    check_cover("grid_R", grid_r, hr)?;

    let mut samples: Vec<Vec<f64>> = grid_l
        .par_iter()
        .map(|&a| {
            grid_r
                .iter()
                .map(|&b| {
                    relax_eval(f0, hl, hr, a, b, tol)
                        .map(|r| r.lambda)
                        .map_err(|e| Error::RelaxAt {
                            p_l: a,
                            p_r: b,
                            source: Box::new(e),
                        })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let (n_l, n_r) = (grid_l.len(), grid_r.len());
    for i in 0..n_l {
        for j in 0..n_r {
            let down_l = if i + 1 < n_l { samples[i][j] - samples[i + 1][j] } else { 0.0 };
            let up_r = if j + 1 < n_r { samples[i][j + 1] - samples[i][j] } else { 0.0 };
            let violation = down_l.max(up_r);
            if violation > tol {
                return Err(Error::MonotonicityViolation {
                    p_l: grid_l[i],
                    p_r: grid_r[j],
                    violation,
                });
            }
        }
    }
    // running max along p_L, then running min along p_R; the second pass keeps the first
    for i in 1..n_l {
        for j in 0..n_r {
            samples[i][j] = samples[i][j].max(samples[i - 1][j]);
        }
    }
    for row in samples.iter_mut() {
        for j in 1..n_r {
            row[j] = row[j].min(row[j - 1]);
        }
    }
    JunctionTable::new(
        grid_l.to_vec(),
        grid_r.to_vec(),
        samples,
        hl.lipschitz(),
        -hr.lipschitz(),
    )
}

fn check_cover(name: &str, grid: &[f64], h: &PiecewiseLinear) -> Result<()> {
    let bp = h.breakpoints();
    let (lo, hi) = (bp[0] - 1.0, bp[bp.len() - 1] + 1.0);
    if grid[0] > lo || grid[grid.len() - 1] < hi {
        return Err(Error::InvalidGrid(format!(
            "{name} must cover [{lo}, {hi}] (breakpoints plus one unit of margin)"
        )));
    }
    Ok(())
}

/// `n` equally spaced nodes on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![lo];
    }
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}
