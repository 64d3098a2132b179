//! Batch experiments on top of `jscl-core`: one config file per experiment,
//! CSV and JSON outputs stamped with the config hash, tool version and seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{GermArgs, Outcome};
pub use config::{load, ExperimentConfig, LoadedConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "jscl", version, about = "Junction solvers for conservation laws and Hamilton-Jacobi equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment configuration (TOML, or JSON by extension)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sweeps, studies and tabulations
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the seed in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the coupled schemes and the enabled diagnostics
    Run,
    /// Tabulate the relaxation of F0
    Relax,
    /// Classify a point or scan the germ for maximality evidence
    Germ {
        /// Classify the pair (p_L, p_R)
        #[arg(long, num_args = 2, value_names = ["P_L", "P_R"], allow_negative_numbers = true)]
        classify: Option<Vec<f64>>,
        /// Run the maximality scan
        #[arg(long)]
        scan: bool,
        /// Number of scanned levels
        #[arg(long)]
        levels: Option<usize>,
        /// Witness threshold
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Riemann sweep with junction-trace checks
    Sweep,
    /// Refinement study
    Converge,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Relax => "relax",
            Self::Germ { .. } => "germ",
            Self::Sweep => "sweep",
            Self::Converge => "converge",
        }
    }
}

/// Runs the parsed command line and returns the process exit code:
/// 0 pass, 1 check failure, 2 config error, 3 solver error.
pub fn execute(cli: &Cli) -> i32 {
    match dispatch(cli) {
        Ok(o) => {
            use std::io::Write;
            // a closed stdout must not turn a finished experiment into a crash
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{}: {}", if o.passed { "PASS" } else { "FAIL" }, o.message);
            for f in &o.files {
                let _ = writeln!(stdout, "  wrote {}", f.display());
            }
            if o.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let mut loaded = load(path)?;
    if let Some(s) = cli.seed {
        loaded.config.seed = s;
    }
    let meta = output::Metadata::new(cli.command.name(), &loaded.raw, loaded.config.seed);
    let out = output::OutputDir::create(&cli.out, &loaded.config.output.prefix, meta)?;

    let work = || match &cli.command {
        Command::Run => commands::cmd_run(&loaded, &out),
        Command::Relax => commands::cmd_relax(&loaded, &out),
        Command::Germ {
            classify,
            scan,
            levels,
            tol,
        } => {
            let args = GermArgs {
                classify: classify.as_ref().map(|v| (v[0], v[1])),
                scan: *scan,
                levels: *levels,
                tol: *tol,
            };
            commands::cmd_germ(&loaded, &out, &args)
        }
        Command::Sweep => commands::cmd_sweep(&loaded, &out),
        Command::Converge => commands::cmd_converge(&loaded, &out),
    };
    match cli.jobs {
        Some(0) => Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?
            .install(work),
        None => work(),
    }
}
