//! Experiment configuration files (TOML, or JSON when the extension is `.json`).

use std::path::{Path, PathBuf};

use jscl_core::junction::{uniform_grid, EXACT_TOL, TABULATED_TOL};
use jscl_core::{Fluxes, GridSpec, InitialData, JunctionFunction, JunctionTable, PiecewiseLinear};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub hl: PiecewiseLinear,
    pub hr: PiecewiseLinear,
    pub f0: JunctionSpec,
    /// Replace `F0` by its relaxation before anything else is done.
    #[serde(default)]
    pub relax_before_run: bool,
    /// Tolerance of the relaxation root; defaults by junction kind.
    pub relax_tol: Option<f64>,
    pub initial: Option<InitialSpec>,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub relax: RelaxSpec,
    #[serde(default)]
    pub germ: GermSpec,
    pub sweep: Option<SweepSpec>,
    pub converge: Option<ConvergeSpec>,
}

/// Junction function: a named builder, an inline table, or a table file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum JunctionSpec {
    /// Single-flux junction of `hl` (requires `hl == hr`).
    GodunovPair,
    Limited { level: f64 },
    Diehl { eps: f64 },
    Table { table: JunctionTable },
    TableFile { path: PathBuf },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Riemann { v_minus: f64, v_plus: f64 },
    /// Piecewise-linear `u0` through `(xs, us)`.
    Pl {
        xs: Vec<f64>,
        us: Vec<f64>,
        left_slope: f64,
        right_slope: f64,
    },
    Cells { jumps: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "one")]
    pub snapshot_stride: usize,
    /// File name prefix inside the output directory.
    #[serde(default)]
    pub prefix: String,
    /// Write the `t,x,u` node file.
    #[serde(default = "yes")]
    pub write_u: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            snapshot_stride: 1,
            prefix: String::new(),
            write_u: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default = "yes")]
    pub max_principle: bool,
    /// Number of germ constants for the discrete entropy inequalities (0 disables).
    #[serde(default = "five")]
    pub entropy_constants: usize,
    /// Compare against a seeded compactly supported perturbation of the data.
    #[serde(default = "yes")]
    pub l1_contraction: bool,
    #[serde(default = "yes")]
    pub time_bv: bool,
    #[serde(default = "yes")]
    pub space_bv: bool,
    #[serde(default = "yes")]
    pub hj_stability: bool,
    #[serde(default = "yes")]
    pub hj_scl_link: bool,
    /// Check the junction traces averaged over this window (fractions of `T`).
    pub traces: Option<[f64; 2]>,
    /// Trace tolerance; `5 L sqrt(dx)` when absent.
    pub trace_tol: Option<f64>,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self {
            max_principle: true,
            entropy_constants: 5,
            l1_contraction: true,
            time_bv: true,
            space_bv: true,
            hj_stability: true,
            hj_scl_link: true,
            traces: None,
            trace_tol: None,
        }
    }
}

impl DiagnosticsSpec {
    pub fn needs_dense(&self) -> bool {
        self.entropy_constants > 0 || self.l1_contraction || self.time_bv || self.space_bv
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl AxisSpec {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.lo, self.hi, self.n)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxSpec {
    /// Tabulation axes; default to the flux breakpoints padded by 2.
    #[serde(rename = "grid_L")]
    pub grid_l: Option<AxisSpec>,
    #[serde(rename = "grid_R")]
    pub grid_r: Option<AxisSpec>,
    /// Tabulate the Diehl family at these `eps` instead of `f0`.
    #[serde(default)]
    pub eps_list: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GermSpec {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    #[serde(default = "fifty")]
    pub levels: usize,
    #[serde(default = "hundred")]
    pub samples_per_level: usize,
    /// Witness threshold: a non-member is refuted when `D < -tol`.
    #[serde(default = "witness_tol")]
    pub tol: f64,
}

impl Default for GermSpec {
    fn default() -> Self {
        Self {
            lambda_min: None,
            lambda_max: None,
            levels: 50,
            samples_per_level: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub values: AxisSpec,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
    #[serde(default = "witness_levels")]
    pub witness_levels: usize,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeSpec {
    pub dx_list: Vec<f64>,
    /// Also report the distance to the run with the relaxed junction.
    #[serde(default)]
    pub compare_relaxed: bool,
    #[serde(default = "default_x_window")]
    pub window: [f64; 2],
}

fn one() -> usize {
    1
}
fn five() -> usize {
    5
}
fn fifty() -> usize {
    50
}
fn hundred() -> usize {
    100
}
fn yes() -> bool {
    true
}
fn witness_tol() -> f64 {
    1e-6
}
fn witness_levels() -> usize {
    121
}
fn default_window() -> [f64; 2] {
    [0.5, 1.0]
}
fn default_x_window() -> [f64; 2] {
    [-1.0, 1.0]
}

/// A parsed configuration with its source bytes (for hashing) and location.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub raw: Vec<u8>,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    let raw = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(raw.clone())
        .map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
    let config: ExperimentConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: line {}, column {}: {e}", path.display(), e.line(), e.column()))
        })?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let loaded = LoadedConfig { config, raw, dir };
    loaded.validate()?;
    Ok(loaded)
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("field `{name}`: {msg}"))
}

impl LoadedConfig {
    fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        if let Some(g) = &c.grid {
            g.validate().map_err(|e| field("grid", e))?;
        }
        if c.output.snapshot_stride == 0 {
            return Err(field("output.snapshot_stride", "must be at least 1"));
        }
        if let Some(tol) = c.relax_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(field("relax_tol", "must be positive"));
            }
        }
        if let Some([a, b]) = c.diagnostics.traces {
            if !(0.0 <= a && a < b && b <= 1.0) {
                return Err(field("diagnostics.traces", "need 0 <= t0 < t1 <= 1"));
            }
        }
        if let Some(s) = &c.sweep {
            let [a, b] = s.window;
            if !(0.0 <= a && a < b && b <= 1.0) {
                return Err(field("sweep.window", "need 0 <= t0 < t1 <= 1"));
            }
            if s.values.n == 0 {
                return Err(field("sweep.values.n", "must be at least 1"));
            }
        }
        if c.germ.levels == 0 || c.germ.samples_per_level == 0 {
            return Err(field("germ", "levels and samples_per_level must be positive"));
        }
        if c.relax.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(field("relax.eps_list", "every eps must be positive"));
        }
        // builds the junction, reading and validating any table file
        self.base_junction()?;
        Ok(())
    }

    /// `F0` as configured, before any relaxation.
    pub fn base_junction(&self) -> Result<JunctionFunction, CliError> {
        let c = &self.config;
        Ok(match &c.f0 {
            JunctionSpec::GodunovPair => {
                if c.hl != c.hr {
                    return Err(field("f0.builder", "godunov_pair needs hl == hr"));
                }
                JunctionFunction::from_godunov_pair(c.hl.clone())
            }
            JunctionSpec::Limited { level } => {
                JunctionFunction::from_limited(c.hl.clone(), c.hr.clone(), *level).map_err(|e| field("f0.level", e))?
            }
            JunctionSpec::Diehl { eps } => JunctionFunction::from_diehl_eps(*eps).map_err(|e| field("f0.eps", e))?,
            JunctionSpec::Table { table } => JunctionFunction::Table(table.clone()),
            JunctionSpec::TableFile { path } => {
                let full = self.dir.join(path);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| field("f0.path", format!("{}: {e}", full.display())))?;
                let table: JunctionTable = serde_json::from_str(&text)
                    .map_err(|e| field("f0.path", format!("{}: {e}", full.display())))?;
                JunctionFunction::Table(table)
            }
        })
    }

    pub fn relax_tol(&self) -> f64 {
        self.config.relax_tol.unwrap_or(match self.config.f0 {
            JunctionSpec::Table { .. } | JunctionSpec::TableFile { .. } => TABULATED_TOL,
            _ => EXACT_TOL,
        })
    }

    /// The junction used by the experiments: `F0`, or `RF0` when requested.
    pub fn junction(&self) -> Result<JunctionFunction, CliError> {
        let f0 = self.base_junction()?;
        Ok(if self.config.relax_before_run {
            f0.relaxed(&self.config.hl, &self.config.hr, self.relax_tol())
        } else {
            f0
        })
    }

    pub fn fluxes(&self) -> Result<Fluxes, CliError> {
        Ok(Fluxes::new(self.config.hl.clone(), self.config.hr.clone(), self.junction()?))
    }

    pub fn grid(&self) -> Result<GridSpec, CliError> {
        self.config.grid.ok_or_else(|| field("grid", "required by this command"))
    }

    pub fn initial(&self) -> Result<InitialData, CliError> {
        let spec = self
            .config
            .initial
            .as_ref()
            .ok_or_else(|| field("initial", "required by this command"))?;
        match spec {
            InitialSpec::Riemann { v_minus, v_plus } => InitialData::riemann(*v_minus, *v_plus),
            InitialSpec::Pl {
                xs,
                us,
                left_slope,
                right_slope,
            } => InitialData::piecewise_linear(xs.clone(), us.clone(), *left_slope, *right_slope),
            InitialSpec::Cells { jumps, values } => InitialData::cells(jumps.clone(), values.clone()),
        }
        .map_err(|e| field("initial", e))
    }

    /// Default tabulation axis for one side: breakpoints padded by 2 at spacing 0.1.
    pub fn relax_axis(&self, left: bool) -> Vec<f64> {
        let (spec, h) = if left {
            (self.config.relax.grid_l, &self.config.hl)
        } else {
            (self.config.relax.grid_r, &self.config.hr)
        };
        if let Some(s) = spec {
            return s.points();
        }
        let bp = h.breakpoints();
        let lo = (bp[0] - 2.0).floor();
        let hi = (bp[bp.len() - 1] + 2.0).ceil();
        uniform_grid(lo, hi, ((hi - lo) / 0.1).round() as usize + 1)
    }
}
