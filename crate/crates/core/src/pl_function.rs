//! Piecewise-linear coercive Hamiltonians (fluxes) and their exact calculus.
//!
//! A [`PiecewiseLinear`] is stored as knots `(p_k, y_k)` plus two extension
//! slopes. Because every piece is linear, extrema over intervals, level sets,
//! running-infimum envelopes and the inverses of the Godunov flux in one of
//! its arguments are all finite computations over the knots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knot representation shared by Hamiltonians, their mirror images and their
/// monotone envelopes. Zero slopes are allowed here.
#[derive(Debug, Clone, PartialEq)]
struct Profile {
    xs: Vec<f64>,
    ys: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

/// Region membership used when walking along a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Below,
    Above,
}

impl Profile {
    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.left_slope * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.right_slope * (x - self.xs[n - 1]);
        }
        // first index with xs[k] > x, so xs[k-1] <= x < xs[k]
        let k = self.xs.partition_point(|&b| b <= x);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        if x == x0 {
            return y0;
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `x -> f(-x)`.
    fn mirrored(&self) -> Profile {
        Profile {
            xs: self.xs.iter().rev().map(|x| -x).collect(),
            ys: self.ys.iter().rev().copied().collect(),
            left_slope: -self.right_slope,
            right_slope: -self.left_slope,
        }
    }

    fn slope_of_segment(&self, k: usize) -> f64 {
        (self.ys[k + 1] - self.ys[k]) / (self.xs[k + 1] - self.xs[k])
    }

    /// Linear pieces of `[start, +inf)` as `(a, b, f(a), slope)`.
    fn segments_from(&self, start: f64) -> Vec<(f64, f64, f64, f64)> {
        let n = self.xs.len();
        let mut out = Vec::with_capacity(n + 1);
        let mut k = self.xs.partition_point(|&b| b <= start);
        if k == 0 {
            out.push((start, self.xs[0], self.eval(start), self.left_slope));
        } else if k < n && start > self.xs[k - 1] {
            out.push((start, self.xs[k], self.eval(start), self.slope_of_segment(k - 1)));
        } else {
            k -= 1;
            if k == n - 1 {
                out.push((start, f64::INFINITY, self.eval(start), self.right_slope));
                return out;
            }
            out.push((start, self.xs[k + 1], self.ys[k], self.slope_of_segment(k)));
            k += 1;
        }
        while k + 1 < n {
            out.push((self.xs[k], self.xs[k + 1], self.ys[k], self.slope_of_segment(k)));
            k += 1;
        }
        out.push((self.xs[n - 1], f64::INFINITY, self.ys[n - 1], self.right_slope));
        out
    }

    /// Smallest `s >= start` with `f(s)` on `side` of `level` (inclusive).
    fn reach(&self, start: f64, level: f64, side: Side) -> Option<f64> {
        let sign = if side == Side::Below { 1.0 } else { -1.0 };
        for (a, b, fa, slope) in self.segments_from(start) {
            let (fa, slope, lv) = (sign * fa, sign * slope, sign * level);
            if fa <= lv {
                return Some(a);
            }
            if slope < 0.0 {
                let t = a + (lv - fa) / slope;
                if t <= b {
                    return Some(t.max(a));
                }
            }
        }
        None
    }

    /// Given `f(start)` on `side` of `level`, the supremum of `q` such that `f`
    /// stays on that side over `[start, q]`. `None` means it never leaves.
    fn exit(&self, start: f64, level: f64, side: Side) -> Option<f64> {
        let sign = if side == Side::Above { 1.0 } else { -1.0 };
        for (a, b, fa, slope) in self.segments_from(start) {
            let (fa, slope, lv) = (sign * fa, sign * slope, sign * level);
            if fa < lv {
                return Some(a);
            }
            if slope < 0.0 {
                let t = a + (lv - fa) / slope;
                if t < b {
                    return Some(t.max(a));
                }
            }
        }
        None
    }
}

/// `{q : g(p, q) = level}` for the Godunov flux of `fwd` (`back` is its mirror image).
fn godunov_second_level(fwd: &Profile, back: &Profile, p: f64, level: f64) -> Option<(f64, f64)> {
    let hp = fwd.eval(p);
    if level > hp {
        // q <= p, g(p, q) = max of H on [q, p]
        let hi = -back.reach(-p, level, Side::Above)?;
        let lo = back
            .exit(-hi, level, Side::Below)
            .map_or(f64::NEG_INFINITY, |y| -y);
        Some((lo, hi))
    } else if level == hp {
        let lo = back
            .exit(-p, level, Side::Below)
            .map_or(f64::NEG_INFINITY, |y| -y);
        let hi = fwd.exit(p, level, Side::Above).unwrap_or(f64::INFINITY);
        Some((lo, hi))
    } else {
        // q >= p, g(p, q) = min of H on [p, q]
        let lo = fwd.reach(p, level, Side::Below)?;
        let hi = fwd.exit(lo, level, Side::Above).unwrap_or(f64::INFINITY);
        Some((lo, hi))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPiecewiseLinear {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
    left_slope: f64,
    right_slope: f64,
}

/// A coercive, Lipschitz, nowhere-flat piecewise-linear function of the gradient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewiseLinear", into = "RawPiecewiseLinear")]
pub struct PiecewiseLinear {
    profile: Profile,
    mirror: Profile,
    envelope_plus: Profile,
    envelope_minus: Profile,
}

impl TryFrom<RawPiecewiseLinear> for PiecewiseLinear {
    type Error = Error;

    fn try_from(raw: RawPiecewiseLinear) -> Result<Self> {
        PiecewiseLinear::new(raw.breakpoints, raw.values, raw.left_slope, raw.right_slope)
    }
}

impl From<PiecewiseLinear> for RawPiecewiseLinear {
    fn from(h: PiecewiseLinear) -> Self {
        RawPiecewiseLinear {
            breakpoints: h.profile.xs,
            values: h.profile.ys,
            left_slope: h.profile.left_slope,
            right_slope: h.profile.right_slope,
        }
    }
}

impl PiecewiseLinear {
    pub fn new(
        breakpoints: Vec<f64>,
        values: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    ) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidFunction("need at least two breakpoints".into()));
        }
        if breakpoints.len() != values.len() {
            return Err(Error::InvalidFunction(format!(
                "{} breakpoints but {} values",
                breakpoints.len(),
                values.len()
            )));
        }
        let all_finite = breakpoints
            .iter()
            .chain(values.iter())
            .chain([left_slope, right_slope].iter())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidFunction("non-finite entry".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidFunction(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        if !(left_slope < 0.0 && right_slope > 0.0) {
            return Err(Error::InvalidFunction(format!(
                "not coercive: left slope {left_slope} must be < 0 and right slope {right_slope} > 0"
            )));
        }
        if let Some(k) = values.windows(2).position(|w| w[0] == w[1]) {
            return Err(Error::InvalidFunction(format!(
                "flat segment on [{}, {}]",
                breakpoints[k],
                breakpoints[k + 1]
            )));
        }
        let profile = Profile {
            xs: breakpoints,
            ys: values,
            left_slope,
            right_slope,
        };
        let mirror = profile.mirrored();
        let envelope_plus = running_inf_right(&profile);
        let envelope_minus = running_inf_right(&mirror).mirrored();
        Ok(Self {
            profile,
            mirror,
            envelope_plus,
            envelope_minus,
        })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.profile.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.profile.ys
    }

    pub fn left_slope(&self) -> f64 {
        self.profile.left_slope
    }

    pub fn right_slope(&self) -> f64 {
        self.profile.right_slope
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.profile.eval(p)
    }

    /// Largest absolute slope over all pieces and both extensions.
    pub fn lipschitz(&self) -> f64 {
        let n = self.profile.xs.len();
        (0..n - 1)
            .map(|k| self.profile.slope_of_segment(k).abs())
            .fold(self.left_slope().abs().max(self.right_slope().abs()), f64::max)
    }

    /// Slopes of the pieces immediately left and right of `p`.
    pub fn one_sided_slopes(&self, p: f64) -> (f64, f64) {
        let xs = &self.profile.xs;
        let n = xs.len();
        let slope_of_piece = |k: usize| -> f64 {
            // piece k lies between xs[k-1] and xs[k]; piece 0 and n are the rays
            if k == 0 {
                self.profile.left_slope
            } else if k == n {
                self.profile.right_slope
            } else {
                self.profile.slope_of_segment(k - 1)
            }
        };
        let k = xs.partition_point(|&b| b < p);
        if k < n && xs[k] == p {
            (slope_of_piece(k), slope_of_piece(k + 1))
        } else {
            let s = slope_of_piece(k);
            (s, s)
        }
    }

    /// Godunov numerical flux: min of `h` on `[p_minus, p_plus]` when
    /// `p_minus <= p_plus`, max on `[p_plus, p_minus]` otherwise.
    pub fn godunov_flux(&self, p_minus: f64, p_plus: f64) -> f64 {
        let (lo, hi) = if p_minus <= p_plus {
            (p_minus, p_plus)
        } else {
            (p_plus, p_minus)
        };
        let xs = &self.profile.xs;
        let first = xs.partition_point(|&b| b <= lo);
        let last = xs.partition_point(|&b| b < hi);
        let interior = self.profile.ys[first..last.max(first)].iter().copied();
        let ends = [self.eval(lo), self.eval(hi)];
        if p_minus <= p_plus {
            interior.chain(ends).fold(f64::INFINITY, f64::min)
        } else {
            interior.chain(ends).fold(f64::NEG_INFINITY, f64::max)
        }
    }

    /// `inf_{q >= p} h(q)`.
    pub fn monotone_envelope_plus(&self, p: f64) -> f64 {
        self.envelope_plus.eval(p)
    }

    /// `inf_{q <= p} h(q)`.
    pub fn monotone_envelope_minus(&self, p: f64) -> f64 {
        self.envelope_minus.eval(p)
    }

    pub fn global_min(&self) -> f64 {
        self.profile.ys.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// All `p` with `h(p) = level`, ascending.
    pub fn level_set(&self, level: f64) -> Vec<f64> {
        let Profile {
            xs,
            ys,
            left_slope,
            right_slope,
        } = &self.profile;
        let n = xs.len();
        let mut out = Vec::new();
        if level > ys[0] {
            out.push(xs[0] + (level - ys[0]) / left_slope);
        }
        for k in 0..n - 1 {
            let (y0, y1) = (ys[k], ys[k + 1]);
            if y0 == level {
                out.push(xs[k]);
            } else if (y0 - level) * (y1 - level) < 0.0 {
                let t = xs[k] + (level - y0) * (xs[k + 1] - xs[k]) / (y1 - y0);
                out.push(t.clamp(xs[k], xs[k + 1]));
            }
        }
        if ys[n - 1] == level {
            out.push(xs[n - 1]);
        }
        if level > ys[n - 1] {
            out.push(xs[n - 1] + (level - ys[n - 1]) / right_slope);
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `{q : g(p, q) = level}` as a closed interval; endpoints may be infinite.
    /// Empty when `level < monotone_envelope_plus(p)`.
    pub fn godunov_level_in_second(&self, p: f64, level: f64) -> Option<(f64, f64)> {
        godunov_second_level(&self.profile, &self.mirror, p, level)
    }

    /// `{q : g(q, p) = level}` as a closed interval; endpoints may be infinite.
    /// Empty when `level < monotone_envelope_minus(p)`.
    pub fn godunov_level_in_first(&self, p: f64, level: f64) -> Option<(f64, f64)> {
        // g^H(q, p) = g^{H(-.)}(-p, -q)
        godunov_second_level(&self.mirror, &self.profile, -p, level).map(|(lo, hi)| (-hi, -lo))
    }

    /// Max of `|h|` over `[lo, hi]`.
    pub fn max_abs_on(&self, lo: f64, hi: f64) -> f64 {
        self.godunov_flux(hi, lo)
            .abs()
            .max(self.godunov_flux(lo, hi).abs())
    }
}

/// Envelope `x -> inf_{q >= x} f(q)` of a profile whose right extension increases.
fn running_inf_right(f: &Profile) -> Profile {
    let n = f.xs.len();
    let mut xs = vec![f.xs[n - 1]];
    let mut ys = vec![f.ys[n - 1]];
    let mut current = f.ys[n - 1];
    for k in (0..n - 1).rev() {
        let (xa, ya, xb, yb) = (f.xs[k], f.ys[k], f.xs[k + 1], f.ys[k + 1]);
        if ya >= current {
            xs.push(xa);
            ys.push(current);
        } else {
            if yb > current {
                let c = xa + (current - ya) * (xb - xa) / (yb - ya);
                if c > xa && c < xb {
                    xs.push(c);
                    ys.push(current);
                }
            }
            xs.push(xa);
            ys.push(ya);
            current = ya;
        }
    }
    xs.reverse();
    ys.reverse();
    Profile {
        xs,
        ys,
        left_slope: 0.0,
        right_slope: f.right_slope,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::PiecewiseLinear;

    pub fn abs_flux() -> PiecewiseLinear {
        PiecewiseLinear::new(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], -1.0, 1.0).unwrap()
    }

    pub fn w_flux() -> PiecewiseLinear {
        PiecewiseLinear::new(
            vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            vec![2.0, 0.0, 1.0, 0.0, 2.0],
            -2.0,
            2.0,
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::{abs_flux, w_flux};
    use super::*;

    fn brute_extremum(h: &PiecewiseLinear, a: f64, b: f64, take_min: bool) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let n = 10_000;
        let vals = (0..=n).map(|i| h.eval(lo + (hi - lo) * i as f64 / n as f64));
        if take_min {
            vals.fold(f64::INFINITY, f64::min)
        } else {
            vals.fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn eval_interpolates_and_extends() {
        let h = abs_flux();
        assert_eq!(h.eval(0.0), 0.0);
        assert_eq!(h.eval(0.5), 0.5);
        assert_eq!(h.eval(-3.0), 3.0);
        assert_eq!(h.eval(4.0), 4.0);
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(PiecewiseLinear::new(vec![0.0], vec![0.0], -1.0, 1.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![0.0, 1.0], -1.0, 1.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0], 1.0, 1.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0], -1.0, 0.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 1.0], -1.0, 1.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0], -1.0, 1.0).is_err());
        assert!(PiecewiseLinear::new(vec![0.0, f64::NAN], vec![0.0, 1.0], -1.0, 1.0).is_err());
    }

    #[test]
    fn godunov_examples() {
        let h = abs_flux();
        assert_eq!(h.godunov_flux(1.0, 1.0), 1.0);
        assert_eq!(h.godunov_flux(-1.0, 1.0), 0.0);
        assert_eq!(w_flux().godunov_flux(0.0, -2.0), 2.0);
        assert_eq!(w_flux().godunov_flux(-2.0, 0.0), 0.0);
    }

    #[test]
    fn godunov_matches_sampling() {
        let h = w_flux();
        let l = h.lipschitz();
        let pts = [-3.3, -2.0, -1.7, -0.2, 0.0, 0.4, 1.0, 2.6];
        for &a in &pts {
            for &b in &pts {
                let exact = h.godunov_flux(a, b);
                let brute = brute_extremum(&h, a, b, a <= b);
                assert!(
                    (exact - brute).abs() <= l * (a - b).abs() / 1e4 + 1e-12,
                    "g({a},{b}) = {exact}, sampled {brute}"
                );
            }
        }
    }

    #[test]
    fn envelopes() {
        let h = abs_flux();
        assert_eq!(h.monotone_envelope_plus(-2.0), 0.0);
        assert_eq!(h.monotone_envelope_plus(1.0), 1.0);
        assert_eq!(h.monotone_envelope_minus(2.0), 0.0);
        assert_eq!(h.monotone_envelope_minus(-1.0), 1.0);
        let w = w_flux();
        assert_eq!(w.monotone_envelope_minus(-1.5), 1.0);
        assert_eq!(w.monotone_envelope_plus(-1.5), 0.0);
        assert_eq!(w.monotone_envelope_plus(1.5), 1.0);
    }

    #[test]
    fn level_sets() {
        let h = abs_flux();
        assert_eq!(h.level_set(1.0), vec![-1.0, 1.0]);
        assert!(h.level_set(-0.5).is_empty());
        assert_eq!(h.level_set(0.0), vec![0.0]);
        assert_eq!(w_flux().level_set(0.5), vec![-1.25, -0.5, 0.5, 1.25]);
        assert_eq!(w_flux().level_set(1.0), vec![-1.5, 0.0, 1.5]);
        assert_eq!(w_flux().level_set(3.0), vec![-2.5, 2.5]);
    }

    #[test]
    fn lipschitz_and_slopes() {
        assert_eq!(abs_flux().lipschitz(), 1.0);
        assert_eq!(w_flux().lipschitz(), 2.0);
        assert_eq!(abs_flux().one_sided_slopes(0.0), (-1.0, 1.0));
        assert_eq!(abs_flux().one_sided_slopes(0.5), (1.0, 1.0));
        assert_eq!(w_flux().one_sided_slopes(-2.0), (-2.0, -2.0));
        assert_eq!(w_flux().one_sided_slopes(-1.0), (-2.0, 1.0));
        assert_eq!(w_flux().one_sided_slopes(5.0), (2.0, 2.0));
    }

    #[test]
    fn godunov_inverse_in_second_argument() {
        let w = w_flux();
        // g(0, q) for q >= 0 is min of W on [0, q]: 1 down to 0 at q = 1, then 0.
        assert_eq!(w.godunov_level_in_second(0.0, 0.5), Some((0.5, 0.5)));
        assert_eq!(w.godunov_level_in_second(0.0, 0.0), Some((1.0, f64::INFINITY)));
        assert_eq!(w.godunov_level_in_second(0.0, -0.1), None);
        // level above W(0): q <= 0 with max of W on [q, 0]; W touches 1 at 0 and
        // stays below 1.5 on [-1.75, 0].
        assert_eq!(w.godunov_level_in_second(0.0, 1.5), Some((-1.75, -1.75)));
        // at level W(0) = 1 the set is [-1.5, 0]
        assert_eq!(w.godunov_level_in_second(0.0, 1.0), Some((-1.5, 0.0)));
    }

    #[test]
    fn godunov_inverse_in_first_argument() {
        let w = w_flux();
        assert_eq!(w.godunov_level_in_first(0.0, 0.0), Some((f64::NEG_INFINITY, -1.0)));
        assert_eq!(w.godunov_level_in_first(0.0, 1.0), Some((0.0, 1.5)));
        assert_eq!(w.godunov_level_in_first(0.0, 1.5), Some((1.75, 1.75)));
    }

    #[test]
    fn serde_round_trip_and_validation() {
        let h = w_flux();
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"breakpoints\""));
        let back: PiecewiseLinear = serde_json::from_str(&json).unwrap();
        assert_eq!(back, h);
        let flat = r#"{"breakpoints":[0,1],"values":[1,1],"left_slope":-1,"right_slope":1}"#;
        assert!(serde_json::from_str::<PiecewiseLinear>(flat).is_err());
    }
}
