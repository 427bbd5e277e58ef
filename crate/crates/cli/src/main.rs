use std::path::PathBuf;
use std::process::ExitCode;

use admm_tune::mpc::ConstraintSets;
use admm_tune_cli::commands;
use admm_tune_cli::config::{ExperimentConfig, Grid, Method, MpcSource, ProblemSource, RhoSpec, Scaling};
use admm_tune_cli::error::{CliError, Result};
use clap::{Args, Parser, Subcommand};

/// Tuned ADMM for quadratic problems: step-size tuning, sweeps and comparisons.
#[derive(Parser)]
#[command(name = "admm-tune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analytic step size and convergence factor of each instance.
    Tune(Common),
    /// Solve one instance and write its convergence trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Instance id; defaults to the first.
        #[arg(long)]
        instance: Option<usize>,
    },
    /// Run every method, scaling and step size over every instance.
    Sweep(Common),
    /// Compare methods head to head at their default step sizes.
    Compare(Common),
    /// Compute the optimal diagonal constraint scaling.
    Scale(Common),
    /// Generate an MPC batch and write it as matrix files plus a manifest.
    Condense(CondenseArgs),
}

/// Flags override the values of `--config`.
#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Quadratic cost matrix `Q`.
    #[arg(long, requires = "q_vector")]
    q_matrix: Option<PathBuf>,
    /// Linear cost `q`.
    #[arg(long, requires = "q_matrix")]
    q_vector: Option<PathBuf>,
    /// Constraint matrix `A` of `Ax ≤ c`.
    #[arg(long, requires_all = ["q_matrix", "c_vector"], conflicts_with = "delta")]
    a_matrix: Option<PathBuf>,
    #[arg(long, requires = "a_matrix")]
    c_vector: Option<PathBuf>,
    /// File holding the ℓ2 weight δ; selects the unconstrained problem.
    #[arg(long, requires = "q_matrix")]
    delta: Option<PathBuf>,
    /// Batch manifest written by `condense`.
    #[arg(long, conflicts_with_all = ["q_matrix", "delta"])]
    manifest: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// `auto` or a log grid `lo:hi:points`.
    #[arg(long)]
    rho: Option<RhoSpec>,
    /// Relaxation for `admm-relaxed`.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    scaling: Option<Vec<Scaling>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; beats the environment and the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// ℓ2 δ grid `lo:hi:points` for the analytic factor table.
    #[arg(long)]
    delta_grid: Option<Grid>,
}

impl Common {
    fn into_config(self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let (Some(q_matrix), Some(q_vector)) = (self.q_matrix, self.q_vector) {
            cfg.problem = Some(match (self.a_matrix, self.c_vector, self.delta) {
                (Some(a_matrix), Some(c_vector), None) => ProblemSource::QpFiles {
                    q_matrix,
                    q_vector,
                    a_matrix,
                    c_vector,
                },
                (None, None, Some(delta)) => ProblemSource::L2Files {
                    q_matrix,
                    q_vector,
                    delta,
                },
                _ => {
                    return Err(CliError::Config(
                        "give either --a-matrix and --c-vector or --delta".into(),
                    ))
                }
            });
        }
        if let Some(m) = self.manifest {
            cfg.problem = Some(ProblemSource::Manifest(m));
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.scaling {
            cfg.scaling = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.delta_grid {
            cfg.delta_grid = Some(v);
        }
        cfg.resolve_out_dir(self.out);
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct CondenseArgs {
    /// Config whose problem is an `mpc` source; flags override its plant.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    nu: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    spectral_radius: Option<f64>,
    /// Reference offset from the operating level.
    #[arg(long)]
    ref_offset: Option<f64>,
    /// Also constrain the inputs.
    #[arg(long)]
    input_box: bool,
    /// Keep the raw constraint rows instead of normalizing them.
    #[arg(long)]
    no_normalize: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CondenseArgs {
    fn run(self) -> Result<PathBuf> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        let mut src = match cfg.problem.take() {
            Some(ProblemSource::Mpc(m)) => m,
            None => MpcSource::default(),
            Some(_) => return Err(CliError::Config("condense needs an `mpc` problem source".into())),
        };
        let plant = &mut src.plant;
        plant.nx = self.nx.unwrap_or(plant.nx);
        plant.nu = self.nu.unwrap_or(plant.nu);
        plant.horizon = self.horizon.unwrap_or(plant.horizon);
        plant.spectral_radius = self.spectral_radius.unwrap_or(plant.spectral_radius);
        plant.ref_offset = self.ref_offset.unwrap_or(plant.ref_offset);
        if self.input_box {
            src.constraints = ConstraintSets::default();
        }
        if self.no_normalize {
            src.normalize = false;
        }
        let seed = self.seed.unwrap_or(cfg.seed);
        cfg.resolve_out_dir(self.out);
        commands::condense(&src, seed, &cfg.out_dir)
    }
}

/// A closed pipe on stdout is not an error.
fn print(value: &impl serde::Serialize) -> Result<()> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io("<stdout>".into(), e)),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Tune(c) => print(&commands::tune(&c.into_config()?)?),
        Command::Solve { common, instance } => print(&commands::solve(&common.into_config()?, instance)?),
        Command::Sweep(c) => print(&commands::sweep(&c.into_config()?)?),
        Command::Compare(c) => print(&commands::compare(&c.into_config()?)?),
        Command::Scale(c) => print(&commands::scale(&c.into_config()?)?),
        Command::Condense(a) => print(&serde_json::json!({ "manifest": a.run()? })),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
