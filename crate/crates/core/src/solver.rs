//! Explicit coupled Godunov schemes for the Hamilton–Jacobi equation (node
//! values `u^n_j`) and the conservation law (cell values `v^n_{j+1/2}`).
//!
//! Index conventions: node `j` in `[-J, J]` is stored at `j + J`; cell
//! `j + 1/2` for `j` in `[-J, J - 1]` is stored at `j + J`. The cells touching
//! the junction, `-1/2` and `+1/2`, are therefore at `J - 1` and `J`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::junction::JunctionFunction;
use crate::pl_function::PiecewiseLinear;

/// Default safety factor applied to the CFL bound.
pub const DEFAULT_CFL_FACTOR: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: f64,
    pub half_width: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl_factor: f64,
}

fn default_cfl() -> f64 {
    DEFAULT_CFL_FACTOR
}

impl GridSpec {
    pub fn new(dx: f64, half_width: f64, t_final: f64, cfl_factor: f64) -> Result<Self> {
        let g = Self {
            dx,
            half_width,
            t_final,
            cfl_factor,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("dx must be positive, got {}", self.dx)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidGrid(format!("T must be non-negative, got {}", self.t_final)));
        }
        if !(self.cfl_factor > 0.0 && self.cfl_factor <= 1.0) {
            return Err(Error::InvalidGrid(format!(
                "cfl_factor must lie in (0, 1], got {}",
                self.cfl_factor
            )));
        }
        if !self.half_width.is_finite() || self.j_max() < 2 {
            return Err(Error::InvalidGrid(format!(
                "half_width {} gives fewer than two nodes per side",
                self.half_width
            )));
        }
        Ok(())
    }

    /// `J = round(half_width / dx)`.
    pub fn j_max(&self) -> usize {
        let j = (self.half_width / self.dx).round();
        if j.is_finite() && j > 0.0 {
            j as usize
        } else {
            0
        }
    }

    pub fn nodes(&self) -> usize {
        2 * self.j_max() + 1
    }

    pub fn cells(&self) -> usize {
        2 * self.j_max()
    }

    /// Position of the node stored at index `i`.
    pub fn node_x(&self, i: usize) -> f64 {
        (i as f64 - self.j_max() as f64) * self.dx
    }

    /// Center of the cell stored at index `k`.
    pub fn cell_center(&self, k: usize) -> f64 {
        (k as f64 - self.j_max() as f64 + 0.5) * self.dx
    }

    /// Time step `theta dx / (2 L)`, shrunk so that an integer number of steps reaches `T`.
    pub fn time_steps(&self, lipschitz: f64) -> (f64, usize) {
        let nominal = self.cfl_factor * self.dx / (2.0 * lipschitz);
        if self.t_final == 0.0 {
            return (nominal, 0);
        }
        let steps = (self.t_final / nominal * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        (self.t_final / steps as f64, steps)
    }
}

/// The three numerical fluxes of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct Fluxes {
    pub hl: PiecewiseLinear,
    pub hr: PiecewiseLinear,
    pub f0: JunctionFunction,
}

impl Fluxes {
    pub fn new(hl: PiecewiseLinear, hr: PiecewiseLinear, f0: JunctionFunction) -> Self {
        Self { hl, hr, f0 }
    }

    /// `f_j`: Godunov of `H_L` left of the junction, `F0` at it, Godunov of `H_R` right.
    pub fn numerical_flux(&self, j: i64, a: f64, b: f64) -> f64 {
        match j {
            j if j < 0 => self.hl.godunov_flux(a, b),
            0 => self.f0.eval(a, b),
            _ => self.hr.godunov_flux(a, b),
        }
    }

    /// `max(L_L, L_R, L_F0)`.
    pub fn lipschitz(&self) -> f64 {
        self.hl
            .lipschitz()
            .max(self.hr.lipschitz())
            .max(self.f0.lipschitz())
    }

    /// Fastest wave speed away from the junction.
    pub fn wave_speed(&self) -> f64 {
        self.hl.lipschitz().max(self.hr.lipschitz())
    }

    /// The update `v_{j+1/2} -> b - r (f_{j+1}(b, c) - f_j(a, b))`, `r = dt / dx`.
    pub fn scheme_update(&self, j: i64, a: f64, b: f64, c: f64, ratio: f64) -> f64 {
        b - ratio * (self.numerical_flux(j + 1, b, c) - self.numerical_flux(j, a, b))
    }
}

/// Piecewise-constant gradient data `v0` with the anchor `u0(0)`.
///
/// `values[k]` holds on `[jumps[k-1], jumps[k])`, with `values[0]` extending
/// to `-inf` and the last value to `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    jumps: Vec<f64>,
    values: Vec<f64>,
    u_at_zero: f64,
}

impl InitialData {
    pub fn cells(jumps: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != jumps.len() + 1 {
            return Err(Error::InvalidInitialData(format!(
                "{} jumps need {} values, got {}",
                jumps.len(),
                jumps.len() + 1,
                values.len()
            )));
        }
        if jumps.iter().chain(&values).any(|x| !x.is_finite()) {
            return Err(Error::InvalidInitialData("non-finite entry".into()));
        }
        if jumps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInitialData("jump positions must increase".into()));
        }
        Ok(Self {
            jumps,
            values,
            u_at_zero: 0.0,
        })
    }

    /// `v0 = v_minus` for `x < 0`, `v_plus` for `x > 0`.
    pub fn riemann(v_minus: f64, v_plus: f64) -> Result<Self> {
        Self::cells(vec![0.0], vec![v_minus, v_plus])
    }

    pub fn constant(v: f64) -> Result<Self> {
        Self::cells(Vec::new(), vec![v])
    }

    /// `u0` interpolating `(xs, us)`, extended with the given slopes.
    pub fn piecewise_linear(xs: Vec<f64>, us: Vec<f64>, left_slope: f64, right_slope: f64) -> Result<Self> {
        if xs.is_empty() || xs.len() != us.len() {
            return Err(Error::InvalidInitialData(
                "u0 needs matching, non-empty node and value lists".into(),
            ));
        }
        let mut values = vec![left_slope];
        for k in 0..xs.len() - 1 {
            values.push((us[k + 1] - us[k]) / (xs[k + 1] - xs[k]));
        }
        values.push(right_slope);
        let mut data = Self::cells(xs.clone(), values)?;
        data.u_at_zero = 0.0;
        let shift = interp_u(&xs, &us, left_slope, right_slope, 0.0);
        if !shift.is_finite() {
            return Err(Error::InvalidInitialData("non-finite u0".into()));
        }
        data.u_at_zero = shift;
        Ok(data)
    }

    pub fn jumps(&self) -> &[f64] {
        &self.jumps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `v0(x)`, right-continuous.
    pub fn v_at(&self, x: f64) -> f64 {
        self.values[self.jumps.partition_point(|&s| s <= x)]
    }

    /// `u0(x) = u0(0) + int_0^x v0`.
    pub fn u_at(&self, x: f64) -> f64 {
        self.u_at_zero + self.integral(0.0, x)
    }

    /// `int_a^b v0`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integral(b, a);
        }
        let mut total = 0.0;
        let mut lo = a;
        let mut k = self.jumps.partition_point(|&s| s <= a);
        while k < self.jumps.len() && self.jumps[k] < b {
            total += self.values[k] * (self.jumps[k] - lo);
            lo = self.jumps[k];
            k += 1;
        }
        total + self.values[k] * (b - lo)
    }

    /// Mean of `v0` over `[a, b]`; exact value when no jump lies inside.
    pub fn cell_average(&self, a: f64, b: f64) -> f64 {
        let k = self.jumps.partition_point(|&s| s <= a);
        if k == self.jumps.len() || self.jumps[k] >= b {
            self.values[k]
        } else {
            self.integral(a, b) / (b - a)
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Largest `|x|` at which `v0` jumps.
    pub fn feature_extent(&self) -> f64 {
        self.jumps.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

fn interp_u(xs: &[f64], us: &[f64], left: f64, right: f64, x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return us[0] + left * (x - xs[0]);
    }
    if x >= xs[n - 1] {
        return us[n - 1] + right * (x - xs[n - 1]);
    }
    let k = xs.partition_point(|&s| s <= x) - 1;
    us[k] + (us[k + 1] - us[k]) * (x - xs[k]) / (xs[k + 1] - xs[k])
}

/// `u^0_j = u0(x_j)` and `v^0_{j+1/2}` = mean of `v0` over the cell.
pub fn discretize_initial(data: &InitialData, grid: &GridSpec) -> (Vec<f64>, Vec<f64>) {
    let u = (0..grid.nodes()).map(|i| data.u_at(grid.node_x(i))).collect();
    let v = (0..grid.cells())
        .map(|k| data.cell_average(grid.node_x(k), grid.node_x(k + 1)))
        .collect();
    (u, v)
}

/// One HJ step; gradients are recomputed from `u`, with copy ghosts at the ends.
pub fn step_hj(fluxes: &Fluxes, u: &[f64], dx: f64, dt: f64, out: &mut [f64]) {
    let n = u.len();
    let jm = (n / 2) as i64;
    let grad = |k: usize| (u[k + 1] - u[k]) / dx;
    for i in 0..n {
        let left = grad(i.max(1) - 1);
        let right = grad(i.min(n - 2));
        out[i] = u[i] - dt * fluxes.numerical_flux(i as i64 - jm, left, right);
    }
}

/// One conservative SCL step with copy ghost cells.
pub fn step_scl(fluxes: &Fluxes, v: &[f64], dx: f64, dt: f64, node_flux: &mut Vec<f64>, out: &mut [f64]) {
    let m = v.len();
    let jm = (m / 2) as i64;
    node_flux.clear();
    node_flux.extend((0..=m).map(|i| {
        let a = v[i.max(1) - 1];
        let b = v[i.min(m - 1)];
        fluxes.numerical_flux(i as i64 - jm, a, b)
    }));
    let r = dt / dx;
    for k in 0..m {
        out[k] = v[k] - r * (node_flux[k + 1] - node_flux[k]);
    }
}

fn check_finite(step: usize, xs: &[f64]) -> Result<()> {
    match xs.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFiniteState { step, index }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Store every k-th layer (the final layer is always stored).
    pub snapshot_stride: usize,
    /// Also advance the HJ scheme.
    pub evolve_hj: bool,
    /// Floor for the Lipschitz constant setting the time step, so runs with
    /// different junctions can share one time grid.
    pub min_lipschitz: f64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 1,
            evolve_hj: true,
            min_lipschitz: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub fluxes: Fluxes,
    pub data: InitialData,
    pub grid: GridSpec,
    pub options: RunOptions,
}

impl Problem {
    pub fn new(fluxes: Fluxes, data: InitialData, grid: GridSpec) -> Self {
        Self {
            fluxes,
            data,
            grid,
            options: RunOptions::default(),
        }
    }

    pub fn with_options(mut self, options: RunOptions) -> Self {
        self.options = options;
        self
    }

    /// A warning when waves can reach the truncation boundary before `T`.
    pub fn domain_warning(&self) -> Option<String> {
        let needed = self.data.feature_extent()
            + self.fluxes.wave_speed() * self.grid.t_final
            + 2.0 * self.grid.dx;
        let width = self.grid.j_max() as f64 * self.grid.dx;
        (width < needed).then(|| {
            format!("domain too small: half-width {width} < {needed} needed to keep waves off the boundary")
        })
    }
}

/// Stored layers of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: GridSpec,
    pub dt: f64,
    pub steps: usize,
    pub lipschitz: f64,
    pub stride: usize,
    /// Step numbers of the stored layers, ascending.
    pub stored_steps: Vec<usize>,
    /// Node values per stored layer; empty when the HJ scheme was not advanced.
    pub u: Vec<Vec<f64>>,
    /// Cell values per stored layer.
    pub v: Vec<Vec<f64>>,
    /// `(v^n_{-1/2}, v^n_{+1/2})` for every `n` in `0..=steps`.
    pub junction: Vec<(f64, f64)>,
    pub v0_sup: f64,
    pub v0_bv: f64,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.grid.t_final
        } else {
            n as f64 * self.dt
        }
    }

    pub fn is_dense(&self) -> bool {
        self.stored_steps.len() == self.steps + 1
    }

    fn layer(&self, n: usize) -> Result<usize> {
        self.stored_steps
            .binary_search(&n)
            .map_err(|_| Error::NotStored {
                step: n,
                stride: self.stride,
            })
    }

    pub fn v_at_step(&self, n: usize) -> Result<&[f64]> {
        Ok(&self.v[self.layer(n)?])
    }

    pub fn u_at_step(&self, n: usize) -> Result<&[f64]> {
        let l = self.layer(n)?;
        self.u.get(l).map(Vec::as_slice).ok_or(Error::NotStored {
            step: n,
            stride: self.stride,
        })
    }

    pub fn final_v(&self) -> &[f64] {
        self.v.last().expect("trajectory stores the initial layer")
    }

    /// Time layer containing `t`.
    fn step_of(&self, t: f64) -> Result<usize> {
        let bad = || Error::OutOfDomain { t, x: f64::NAN };
        if !(t >= 0.0 && t <= self.grid.t_final) {
            return Err(bad());
        }
        if self.steps == 0 {
            return Ok(0);
        }
        Ok(((t / self.dt).floor() as usize).min(self.steps))
    }

    fn width(&self) -> f64 {
        self.grid.j_max() as f64 * self.grid.dx
    }

    /// `v_Delta(t, x)`: constant on `[t_n, t_{n+1}) x [x_j, x_{j+1})`.
    pub fn sample_v(&self, t: f64, x: f64) -> Result<f64> {
        let w = self.width();
        if !(x >= -w && x <= w) {
            return Err(Error::OutOfDomain { t, x });
        }
        let n = self.step_of(t).map_err(|_| Error::OutOfDomain { t, x })?;
        let m = self.grid.cells();
        let k = (((x + w) / self.grid.dx).floor() as usize).min(m - 1);
        Ok(self.v_at_step(n)?[k])
    }

    /// `u_Delta(t, x)`: piecewise constant in time, linear between nodes.
    pub fn sample_u(&self, t: f64, x: f64) -> Result<f64> {
        let w = self.width();
        if !(x >= -w && x <= w) {
            return Err(Error::OutOfDomain { t, x });
        }
        let n = self.step_of(t).map_err(|_| Error::OutOfDomain { t, x })?;
        let u = self.u_at_step(n)?;
        let s = (x + w) / self.grid.dx;
        let i = (s.floor() as usize).min(u.len() - 2);
        let frac = s - i as f64;
        Ok(u[i] + frac * (u[i + 1] - u[i]))
    }
}

/// A run in progress, advanced one step at a time.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    problem: &'a Problem,
    pub dt: f64,
    pub steps: usize,
    pub lipschitz: f64,
    n: usize,
    u: Vec<f64>,
    v: Vec<f64>,
    u_next: Vec<f64>,
    v_next: Vec<f64>,
    node_flux: Vec<f64>,
}

impl<'a> Simulation<'a> {
    pub fn new(problem: &'a Problem) -> Result<Self> {
        problem.grid.validate()?;
        let lipschitz = problem.fluxes.lipschitz().max(problem.options.min_lipschitz);
        if !(lipschitz > 0.0 && lipschitz.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "flux Lipschitz constant must be positive and finite, got {lipschitz}"
            )));
        }
        let (dt, steps) = problem.grid.time_steps(lipschitz);
        let (u, v) = discretize_initial(&problem.data, &problem.grid);
        check_finite(0, &v)?;
        let u = if problem.options.evolve_hj { u } else { Vec::new() };
        Ok(Self {
            problem,
            dt,
            steps,
            lipschitz,
            n: 0,
            u_next: vec![0.0; u.len()],
            v_next: vec![0.0; v.len()],
            u,
            v,
            node_flux: Vec::new(),
        })
    }

    pub fn step_index(&self) -> usize {
        self.n
    }

    pub fn done(&self) -> bool {
        self.n >= self.steps
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn junction_pair(&self) -> (f64, f64) {
        let j = self.problem.grid.j_max();
        (self.v[j - 1], self.v[j])
    }

    pub fn step(&mut self) -> Result<()> {
        let fluxes = &self.problem.fluxes;
        let dx = self.problem.grid.dx;
        step_scl(fluxes, &self.v, dx, self.dt, &mut self.node_flux, &mut self.v_next);
        check_finite(self.n + 1, &self.v_next)?;
        if !self.u.is_empty() {
            step_hj(fluxes, &self.u, dx, self.dt, &mut self.u_next);
            check_finite(self.n + 1, &self.u_next)?;
            std::mem::swap(&mut self.u, &mut self.u_next);
        }
        std::mem::swap(&mut self.v, &mut self.v_next);
        self.n += 1;
        Ok(())
    }
}

/// Advances both schemes to `T`.
pub fn run(problem: &Problem) -> Result<Trajectory> {
    let stride = problem.options.snapshot_stride.max(1);
    let mut sim = Simulation::new(problem)?;
    let mut traj = Trajectory {
        grid: problem.grid,
        dt: sim.dt,
        steps: sim.steps,
        lipschitz: sim.lipschitz,
        stride,
        stored_steps: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        junction: Vec::with_capacity(sim.steps + 1),
        v0_sup: problem.data.sup_norm(),
        v0_bv: problem.data.total_variation(),
        warnings: problem.domain_warning().into_iter().collect(),
    };
    let store = |sim: &Simulation, traj: &mut Trajectory| {
        traj.stored_steps.push(sim.n);
        traj.v.push(sim.v.clone());
        if !sim.u.is_empty() {
            traj.u.push(sim.u.clone());
        }
    };
    traj.junction.push(sim.junction_pair());
    store(&sim, &mut traj);
    while !sim.done() {
        sim.step()?;
        traj.junction.push(sim.junction_pair());
        if sim.n % stride == 0 || sim.done() {
            store(&sim, &mut traj);
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pl_function::fixtures::{abs_flux, w_flux};

    fn abs_fluxes() -> Fluxes {
        let h = abs_flux();
        Fluxes::new(h.clone(), h.clone(), JunctionFunction::from_godunov_pair(h))
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.1, 1.0, 1.0, 0.9).is_ok());
        assert!(GridSpec::new(0.1, 1.0, 1.0, 1.5).is_err());
        assert!(GridSpec::new(0.1, 0.1, 1.0, 0.9).is_err());
        assert!(GridSpec::new(-0.1, 1.0, 1.0, 0.9).is_err());
        let g = GridSpec::new(0.25, 1.0, 1.0, 1.0).unwrap();
        assert_eq!((g.j_max(), g.nodes(), g.cells()), (4, 9, 8));
        assert_eq!(g.node_x(0), -1.0);
        assert_eq!(g.cell_center(4), 0.125);
        let (dt, steps) = g.time_steps(1.0);
        assert!(dt <= 0.125 && (dt * steps as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discretization_examples() {
        let g = GridSpec::new(0.5, 2.0, 1.0, 0.9).unwrap();
        let abs = InitialData::piecewise_linear(vec![0.0], vec![0.0], -1.0, 1.0).unwrap();
        let (u, v) = discretize_initial(&abs, &g);
        assert_eq!(v, vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(u, vec![2.0, 1.5, 1.0, 0.5, 0.0, 0.5, 1.0, 1.5, 2.0]);
        let zero = InitialData::constant(0.0).unwrap();
        let (u, v) = discretize_initial(&zero, &g);
        assert!(u.iter().chain(&v).all(|&x| x == 0.0));
        let r = InitialData::riemann(-1.0, 1.0).unwrap();
        assert_eq!(discretize_initial(&r, &g).1, vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0]);
        // a jump inside a cell gives the exact average
        let off = InitialData::cells(vec![0.125], vec![0.0, 4.0]).unwrap();
        assert_eq!(discretize_initial(&off, &g).1[4], 3.0);
        assert_eq!(off.total_variation(), 4.0);
        assert_eq!(off.sup_norm(), 4.0);
    }

    #[test]
    fn numerical_flux_examples() {
        let f = abs_fluxes();
        assert_eq!(f.numerical_flux(-3, -1.0, 1.0), 0.0);
        assert_eq!(f.numerical_flux(0, 1.0, 1.0), 1.0);
        let w = w_flux();
        let fw = Fluxes::new(w.clone(), w.clone(), JunctionFunction::from_godunov_pair(w));
        assert_eq!(fw.numerical_flux(2, 0.0, -2.0), 2.0);
    }

    #[test]
    fn plane_travels_exactly() {
        let h = w_flux();
        let fluxes = Fluxes::new(h.clone(), h.clone(), JunctionFunction::from_godunov_pair(h.clone()));
        let p = 0.75;
        let g = GridSpec::new(0.1, 1.0, 0.1, 0.9).unwrap();
        let prob = Problem::new(fluxes, InitialData::constant(p).unwrap(), g);
        let mut sim = Simulation::new(&prob).unwrap();
        let u0 = sim.u().to_vec();
        sim.step().unwrap();
        for (a, b) in u0.iter().zip(sim.u()) {
            assert!((b - (a - sim.dt * h.eval(p))).abs() < 1e-14);
        }
        assert!(sim.v().iter().all(|&x| x == p));
    }

    #[test]
    fn riemann_one_step_by_hand() {
        // abs fluxes, dx = 0.5, theta = 1: dt = 0.25
        let g = GridSpec::new(0.5, 2.0, 0.25, 1.0).unwrap();
        let prob = Problem::new(abs_fluxes(), InitialData::riemann(-1.0, 1.0).unwrap(), g);
        let mut sim = Simulation::new(&prob).unwrap();
        assert_eq!(sim.dt, 0.25);
        sim.step().unwrap();
        // node fluxes: g(-1,-1) = 1 left, g(-1,1) = 0 at the junction, g(1,1) = 1 right;
        // cells -1/2 and +1/2 lose 0.5 each toward zero
        assert_eq!(&sim.v()[2..6], &[-1.0, -0.5, 0.5, 1.0]);
        // u: nodes away from 0 drop by dt * 1, node 0 unchanged
        assert_eq!(&sim.u()[2..7], &[0.75, 0.25, 0.0, 0.25, 0.75]);
    }

    #[test]
    fn kappa_step_is_stationary_for_germ_members() {
        // (1, -1) is in the germ of the abs Godunov pair: H = 1 = g(1, -1)
        let g = GridSpec::new(0.1, 1.0, 0.5, 0.9).unwrap();
        let prob = Problem::new(abs_fluxes(), InitialData::riemann(1.0, -1.0).unwrap(), g);
        let traj = run(&prob).unwrap();
        assert_eq!(traj.final_v(), traj.v_at_step(0).unwrap());
    }

    #[test]
    fn zero_time_and_sampling() {
        let g = GridSpec::new(0.5, 2.0, 0.0, 0.9).unwrap();
        let data = InitialData::piecewise_linear(vec![0.0], vec![0.0], -1.0, 1.0).unwrap();
        let traj = run(&Problem::new(abs_fluxes(), data, g)).unwrap();
        assert_eq!(traj.steps, 0);
        assert_eq!(traj.sample_u(0.0, 1.0).unwrap(), 1.0);
        assert_eq!(traj.sample_u(0.0, 0.25).unwrap(), 0.25);
        assert_eq!(traj.sample_v(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(traj.sample_v(0.0, -0.1).unwrap(), -1.0);
        assert!(matches!(traj.sample_v(0.0, 3.0), Err(Error::OutOfDomain { .. })));
        assert!(matches!(traj.sample_u(1.0, 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn snapshot_stride_keeps_final_and_junction() {
        let g = GridSpec::new(0.1, 2.0, 0.5, 0.9).unwrap();
        let prob = Problem::new(abs_fluxes(), InitialData::riemann(-1.0, 1.0).unwrap(), g)
            .with_options(RunOptions {
                snapshot_stride: 4,
                ..RunOptions::default()
            });
        let traj = run(&prob).unwrap();
        assert_eq!(*traj.stored_steps.last().unwrap(), traj.steps);
        assert_eq!(traj.junction.len(), traj.steps + 1);
        assert!(traj.stored_steps.iter().rev().skip(1).all(|n| n % 4 == 0));
        assert!(matches!(traj.v_at_step(1), Err(Error::NotStored { .. })));
    }

    #[test]
    fn narrow_domain_warns() {
        let g = GridSpec::new(0.1, 0.5, 1.0, 0.9).unwrap();
        let prob = Problem::new(abs_fluxes(), InitialData::riemann(-1.0, 1.0).unwrap(), g);
        assert!(prob.domain_warning().is_some());
        assert_eq!(run(&prob).unwrap().warnings.len(), 1);
    }

    #[test]
    fn non_finite_junction_is_reported() {
        let h = abs_flux();
        let f0 = JunctionFunction::Table(
            crate::junction::JunctionTable::new(
                vec![0.0, 1.0],
                vec![0.0, 1.0],
                vec![vec![0.0, 0.0], vec![1.0, 1.0]],
                1.0,
                -1.0,
            )
            .unwrap(),
        );
        let fluxes = Fluxes::new(h.clone(), h, f0);
        let g = GridSpec::new(0.1, 1.0, 0.1, 0.9).unwrap();
        let prob = Problem::new(fluxes, InitialData::cells(vec![0.0], vec![f64::MAX, 0.0]).unwrap(), g);
        assert!(matches!(run(&prob), Err(Error::NonFiniteState { .. })));
    }
}
