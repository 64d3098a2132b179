#![allow(dead_code)]

use jscl_core::diagnostics::random_bv_data;
use jscl_core::junction::{underline_h, uniform_grid};
use jscl_core::{Fluxes, Germ, GermPoint, InitialData, JunctionFunction, PiecewiseLinear};
use rand_chacha::ChaCha8Rng;

/// `|p|`.
pub fn abs_flux() -> PiecewiseLinear {
    PiecewiseLinear::new(vec![-1.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], -1.0, 1.0).unwrap()
}

/// Double well: minima 0 at `+-1`, local max 1 at 0, slopes `+-2` outside `[-2, 2]`.
pub fn w_flux() -> PiecewiseLinear {
    PiecewiseLinear::new(
        vec![-2.0, -1.0, 0.0, 1.0, 2.0],
        vec![2.0, 0.0, 1.0, 0.0, 2.0],
        -2.0,
        2.0,
    )
    .unwrap()
}

/// Relaxed value from an exhaustive search over a uniform `(q_L, q_R)` grid:
/// the level with the smallest spread among `g_L(p_L, q_L)`, `F(q)`, `g_R(q_R, p_R)`.
///
/// `g_R(., p_R)` is non-decreasing, so for each `q_L` only the `q_R` whose
/// value lies within the current best spread of `g_L(p_L, q_L)` are visited.
pub fn brute_force_relax(
    f0: &JunctionFunction,
    hl: &PiecewiseLinear,
    hr: &PiecewiseLinear,
    p_l: f64,
    p_r: f64,
    half: f64,
    h: f64,
) -> f64 {
    let n = (2.0 * half / h).round() as usize + 1;
    let q: Vec<f64> = (0..n).map(|i| -half + i as f64 * h).collect();
    let gl: Vec<f64> = q.iter().map(|&x| hl.godunov_flux(p_l, x)).collect();
    let gr: Vec<f64> = q.iter().map(|&x| hr.godunov_flux(x, p_r)).collect();
    let lifted = |a: f64, b: f64| f0.eval(a, b).max(underline_h(hl, hr, a, b));
    let mut best = f64::INFINITY;
    let mut best_lambda = f64::NAN;
    for (i, &a) in gl.iter().enumerate() {
        let lo = gr.partition_point(|&v| v < a - best);
        let hi = gr.partition_point(|&v| v <= a + best);
        for k in lo..hi {
            let f = lifted(q[i], q[k]);
            let vals = [a, f, gr[k]];
            let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mn = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            if mx - mn < best {
                best = mx - mn;
                best_lambda = 0.5 * (mx + mn);
            }
        }
    }
    best_lambda
}

/// A flux configuration of the randomized suite.
pub struct Case {
    pub name: &'static str,
    pub fluxes: Fluxes,
    /// `F0(p, p) = H_L(p) = H_R(p)` for all `p`, so constants are stationary.
    pub constants_stationary: bool,
}

pub fn suite_cases() -> Vec<Case> {
    let (a, w) = (abs_flux(), w_flux());
    vec![
        Case {
            name: "abs|abs godunov",
            fluxes: Fluxes::new(a.clone(), a.clone(), JunctionFunction::from_godunov_pair(a.clone())),
            constants_stationary: true,
        },
        Case {
            name: "W|W godunov",
            fluxes: Fluxes::new(w.clone(), w.clone(), JunctionFunction::from_godunov_pair(w.clone())),
            constants_stationary: true,
        },
        Case {
            name: "W|W limited 0.5",
            fluxes: Fluxes::new(
                w.clone(),
                w.clone(),
                JunctionFunction::from_limited(w.clone(), w.clone(), 0.5).unwrap(),
            ),
            constants_stationary: false,
        },
        Case {
            name: "abs|W limited 0.5",
            fluxes: Fluxes::new(
                a.clone(),
                w.clone(),
                JunctionFunction::from_limited(a.clone(), w.clone(), 0.5).unwrap(),
            ),
            constants_stationary: false,
        },
    ]
}

pub fn random_data(rng: &mut ChaCha8Rng) -> InitialData {
    use rand::Rng;
    let jumps = rng.gen_range(1..8);
    random_bv_data(rng, jumps, 1.0, 2.0)
}

/// Up to `count` members of the germ of `f0`, spread over dyadic levels so
/// that the level sets are exact.
pub fn germ_constants(fluxes: &Fluxes, count: usize) -> Vec<GermPoint> {
    let g = Germ::with_tol(fluxes.hl.clone(), fluxes.hr.clone(), fluxes.f0.clone(), 0.0);
    let levels = uniform_grid(0.0, 3.0, 13);
    let members: Vec<GermPoint> = g
        .rh_curve(&levels)
        .into_iter()
        .filter(|r| r.member)
        .map(|r| r.point)
        .collect();
    if members.len() <= count {
        return members;
    }
    (0..count).map(|k| members[k * members.len() / count]).collect()
}
