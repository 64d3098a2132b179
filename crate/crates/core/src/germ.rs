//! Germs `G_F = {P : H_L(p_L) = H_R(p_R) = F(P)}`, their dissipation, and
//! sampling-based maximality evidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::junction::{JunctionFunction, EXACT_TOL};
use crate::pl_function::PiecewiseLinear;

/// A pair of interface traces `(p_L, p_R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GermPoint {
    pub p_l: f64,
    pub p_r: f64,
}

impl GermPoint {
    pub fn new(p_l: f64, p_r: f64) -> Self {
        Self { p_l, p_r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CharacteristicClass {
    Upper,
    Lower,
    Both,
    None,
    NotMember,
}

impl CharacteristicClass {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Upper => "upper",
            Self::Lower => "lower",
            Self::Both => "both",
            Self::None => "none",
            Self::NotMember => "not_member",
        }
    }
}

/// `sgn(a - b) (h(a) - h(b))`.
pub fn entropy_flux(h: &PiecewiseLinear, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let s = if a > b { 1.0 } else { -1.0 };
    s * (h.eval(a) - h.eval(b))
}

/// The germ of a junction function, with a fixed membership tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Germ {
    pub hl: PiecewiseLinear,
    pub hr: PiecewiseLinear,
    pub f: JunctionFunction,
    pub tol: f64,
}

/// One Rankine–Hugoniot candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhPoint {
    pub point: GermPoint,
    pub lambda: f64,
    pub member: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub point: GermPoint,
    pub lambda: f64,
    pub member: bool,
    pub class: CharacteristicClass,
    pub witness: Option<GermPoint>,
    /// `D(P, witness)`; for members, `None`.
    pub dissipation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaximalityReport {
    /// Maximality is only expected when the junction function is a relaxation.
    pub assumption: String,
    pub levels: usize,
    pub entries: Vec<ScanEntry>,
    /// Non-members for which no witness with `D < -tol` was found.
    pub counterexamples: Vec<GermPoint>,
}

impl MaximalityReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn non_members(&self) -> usize {
        self.entries.iter().filter(|e| !e.member).count()
    }
}

impl Germ {
    pub fn new(hl: PiecewiseLinear, hr: PiecewiseLinear, f: JunctionFunction) -> Self {
        Self::with_tol(hl, hr, f, EXACT_TOL)
    }

    pub fn with_tol(hl: PiecewiseLinear, hr: PiecewiseLinear, f: JunctionFunction, tol: f64) -> Self {
        Self { hl, hr, f, tol }
    }

    /// `D(P, P') = q_L(p_L, p_L') - q_R(p_R, p_R')`.
    pub fn dissipation(&self, p: GermPoint, pp: GermPoint) -> f64 {
        entropy_flux(&self.hl, p.p_l, pp.p_l) - entropy_flux(&self.hr, p.p_r, pp.p_r)
    }

    pub fn is_member(&self, p: GermPoint) -> bool {
        let lam = self.hl.eval(p.p_l);
        (lam - self.hr.eval(p.p_r)).abs() <= self.tol
            && (lam - self.f.eval(p.p_l, p.p_r)).abs() <= self.tol
    }

    /// All pairs on the level sets of `H_L` and `H_R` for each level.
    pub fn rh_curve(&self, lambda_grid: &[f64]) -> Vec<RhPoint> {
        lambda_grid
            .iter()
            .flat_map(|&lambda| self.rh_level(lambda))
            .collect()
    }

    fn rh_level(&self, lambda: f64) -> Vec<RhPoint> {
        let ls = self.hl.level_set(lambda);
        let rs = self.hr.level_set(lambda);
        let mut out = Vec::with_capacity(ls.len() * rs.len());
        for &a in &ls {
            for &b in &rs {
                let point = GermPoint::new(a, b);
                out.push(RhPoint {
                    point,
                    lambda,
                    member: self.is_member(point),
                });
            }
        }
        out
    }

    /// Characteristic type of a member, decided from the adjacent linear pieces.
    pub fn classify_characteristic(&self, p: GermPoint) -> CharacteristicClass {
        if !self.is_member(p) {
            return CharacteristicClass::NotMember;
        }
        let (l_left, l_right) = self.hl.one_sided_slopes(p.p_l);
        let (r_left, r_right) = self.hr.one_sided_slopes(p.p_r);
        // H_L above the level just left of p_L, H_R above it just right of p_R
        let upper = l_left < 0.0 && r_right > 0.0;
        let lower = l_right < 0.0 && r_left > 0.0;
        match (upper, lower) {
            (true, true) => CharacteristicClass::Both,
            (true, false) => CharacteristicClass::Upper,
            (false, true) => CharacteristicClass::Lower,
            (false, false) => CharacteristicClass::None,
        }
    }

    /// Member breakpoint pairs of characteristic type.
    pub fn characteristic_points(&self) -> Vec<GermPoint> {
        let mut out = Vec::new();
        for &a in self.hl.breakpoints() {
            for &b in self.hr.breakpoints() {
                let p = GermPoint::new(a, b);
                if !matches!(
                    self.classify_characteristic(p),
                    CharacteristicClass::NotMember | CharacteristicClass::None
                ) {
                    out.push(p);
                }
            }
        }
        out
    }

    /// Looks for a dissipation witness for every non-member on the
    /// Rankine–Hugoniot curve over `lambda_grid`.
    ///
    /// At most `samples_per_level` candidates are taken per level (evenly
    /// strided). Witnesses are drawn from the members of the scanned levels,
    /// the characteristic points, and the members at level `F(P)`.
    pub fn maximality_scan(&self, lambda_grid: &[f64], samples_per_level: usize) -> MaximalityReport {
        let levels: Vec<Vec<RhPoint>> = lambda_grid.par_iter().map(|&l| self.rh_level(l)).collect();
        let mut pool: Vec<GermPoint> = levels
            .iter()
            .flatten()
            .filter(|r| r.member)
            .map(|r| r.point)
            .collect();
        pool.extend(self.characteristic_points());

        let candidates: Vec<RhPoint> = levels
            .into_iter()
            .flat_map(|pts| stride_sample(pts, samples_per_level))
            .collect();

        let entries: Vec<ScanEntry> = candidates
            .par_iter()
            .map(|rh| {
                let class = self.classify_characteristic(rh.point);
                if rh.member {
                    return ScanEntry {
                        point: rh.point,
                        lambda: rh.lambda,
                        member: true,
                        class,
                        witness: None,
                        dissipation: None,
                    };
                }
                let own_level = self.f.eval(rh.point.p_l, rh.point.p_r);
                let extra: Vec<GermPoint> = if own_level.is_finite() {
                    self.rh_level(own_level)
                        .into_iter()
                        .filter(|r| r.member)
                        .map(|r| r.point)
                        .collect()
                } else {
                    Vec::new()
                };
                let best = pool
                    .iter()
                    .chain(extra.iter())
                    .map(|&q| (q, self.dissipation(rh.point, q)))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                ScanEntry {
                    point: rh.point,
                    lambda: rh.lambda,
                    member: false,
                    class,
                    witness: best.map(|b| b.0),
                    dissipation: best.map(|b| b.1),
                }
            })
            .collect();

        let counterexamples = entries
            .iter()
            .filter(|e| !e.member && !e.dissipation.is_some_and(|d| d < -self.tol))
            .map(|e| e.point)
            .collect();
        MaximalityReport {
            assumption: "junction function is a relaxation".into(),
            levels: lambda_grid.len(),
            entries,
            counterexamples,
        }
    }
}

fn stride_sample<T>(items: Vec<T>, cap: usize) -> Vec<T> {
    let n = items.len();
    if n <= cap {
        return items;
    }
    if cap == 0 {
        return Vec::new();
    }
    let picks: Vec<usize> = (0..cap).map(|k| k * n / cap).collect();
    items
        .into_iter()
        .enumerate()
        .filter(|(i, _)| picks.binary_search(i).is_ok())
        .map(|(_, t)| t)
        .collect()
}
