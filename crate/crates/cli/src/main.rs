//! `ioc`: generate optimal trajectories, recover their objective parameters
//! online or in batch, and run the timing and constraint-sweep studies.

mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ioc_core::batch::{batch_estimate, timing_comparison};
use ioc_core::experiments::{constraint_sweep, generate, SweepSettings};
use ioc_core::io::{format_float, read_trajectory, write_estimate_trace, write_table, write_trajectory};
use ioc_core::{first_unique, EstimateResult, OnlineEstimator, Trajectory, Vector};

use config::{ConfigFile, RunConfig};

#[derive(Parser)]
#[command(
    name = "ioc",
    version,
    about = "Online inverse optimal control for control-constrained systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the forward problem and write the optimal trajectory as CSV.
    Generate(Common),
    /// Run the online estimator over a trajectory file and write the per-step trace.
    Estimate(WithTrajectory),
    /// Solve the whole-trajectory least-squares problem at once.
    Batch(WithTrajectory),
    /// Time the online and batch estimators over a range of horizons.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Comma-separated horizons (overrides `horizons` in the config).
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
    },
    /// First unique step against constraint width, standard and ad-hoc variants.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated box half-widths (overrides `deltas` in the config).
        #[arg(long, value_delimiter = ',')]
        deltas: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct Common {
    /// Run configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named problem: single_integrator or aircraft_pitch.
    #[arg(long)]
    preset: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative cutoff for the rank of the trailing information block.
    #[arg(long)]
    rank_tol: Option<f64>,
    /// Report the minimum-norm solution when the estimate is not unique.
    #[arg(long)]
    fallback: bool,
}

#[derive(Args)]
struct WithTrajectory {
    #[command(flatten)]
    common: Common,
    /// Trajectory CSV with header k,x1..xn,u1..um.
    #[arg(long)]
    trajectory: PathBuf,
}

const NEVER_UNIQUE: u8 = 2;

impl Common {
    fn config(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None if self.preset.is_some() => ConfigFile::default(),
            None => bail!("give --config or --preset"),
        };
        let mut cfg = file.resolve(self.preset.as_deref())?;
        if let Some(tol) = self.rank_tol {
            if !(tol > 0.0) {
                bail!("--rank-tol must be positive, got {tol}");
            }
            cfg.estimator.rank_tol = tol;
        }
        if self.fallback {
            cfg.estimator.pseudoinverse_fallback = true;
        }
        Ok(cfg)
    }

    /// Writes to `--out` when given, otherwise to standard output.
    fn output(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            )),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Human-readable summaries go to stderr when the data goes to stdout.
    fn report(&self, line: &str) {
        if self.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn format_vector(v: &Vector) -> String {
    let cells: Vec<String> = v.iter().map(|x| format_float(*x)).collect();
    format!("[{}]", cells.join(", "))
}

/// Maximal runs of consecutive indices, as `[a, b]` pairs.
fn intervals(steps: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &k in steps {
        match out.last_mut() {
            Some((_, end)) if *end + 1 == k => *end = k,
            _ => out.push((k, k)),
        }
    }
    out
}

fn load_trajectory(path: &Path, cfg: &RunConfig) -> Result<Trajectory> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let traj = read_trajectory(file).with_context(|| format!("reading {}", path.display()))?;
    let (n, m) = (cfg.problem.state_dim(), cfg.problem.control_dim());
    if traj.state_dim() != n || traj.control_dim() != m {
        bail!(
            "{} has {} states and {} controls per row, the configured problem has {n} and {m}",
            path.display(),
            traj.state_dim(),
            traj.control_dim()
        );
    }
    Ok(traj)
}

fn cmd_generate(args: &Common) -> Result<ExitCode> {
    let cfg = args.config()?;
    let traj = generate(&cfg.problem, &cfg.solver)?;
    write_trajectory(args.output()?, &traj)?;
    let active = traj.active_steps(&cfg.problem.constraints)?;
    if active.is_empty() {
        args.report("active constraint steps: none");
    } else {
        let spans: Vec<String> = intervals(&active).iter().map(|(a, b)| format!("[{a}, {b}]")).collect();
        args.report(&format!(
            "active constraint steps: {} in {}",
            active.len(),
            spans.join(", ")
        ));
    }
    Ok(ExitCode::SUCCESS)
}

fn describe(args: &Common, basis_dim: usize, result: &EstimateResult) {
    match (&result.theta_hat, result.unique) {
        (Some(theta), true) => args.report(&format!("final theta: {}", format_vector(theta))),
        (Some(theta), false) => args.report(&format!(
            "final theta (minimum norm, not unique): {}",
            format_vector(theta)
        )),
        (None, _) => args.report(&format!("final theta: {}", format_vector(&Vector::zeros(basis_dim)))),
    }
    args.report(&format!("final residual: {}", format_float(result.residual)));
}

fn cmd_estimate(args: &WithTrajectory) -> Result<ExitCode> {
    let cfg = args.common.config()?;
    let traj = load_trajectory(&args.trajectory, &cfg)?;
    let model = cfg.problem.model()?;
    let (n, basis_dim) = (model.state_dim(), model.basis_dim());
    let est = OnlineEstimator::new(model, cfg.problem.constraints.clone(), cfg.normalization, cfg.estimator)?;
    let results = est.run(&traj)?;
    write_estimate_trace(args.common.output()?, &results, n, basis_dim)?;
    let first = first_unique(&results);
    match first {
        Some(k) => args.common.report(&format!("first unique estimate at k = {k}")),
        None => args.common.report("no unique estimate"),
    }
    describe(
        &args.common,
        basis_dim,
        results.last().expect("trajectory is non-empty"),
    );
    Ok(if first.is_some() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(NEVER_UNIQUE)
    })
}

fn cmd_batch(args: &WithTrajectory) -> Result<ExitCode> {
    let cfg = args.common.config()?;
    let traj = load_trajectory(&args.trajectory, &cfg)?;
    let model = cfg.problem.model()?;
    let (n, basis_dim) = (model.state_dim(), model.basis_dim());
    let result = batch_estimate(&model, &cfg.problem.constraints, &cfg.normalization, &traj)?;
    write_estimate_trace(args.common.output()?, std::slice::from_ref(&result), n, basis_dim)?;
    args.common
        .report(&format!("rank {}, unique: {}", result.qbar_rank, result.unique));
    describe(&args.common, basis_dim, &result);
    Ok(if result.unique {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(NEVER_UNIQUE)
    })
}

fn cmd_compare(args: &Common, horizons: Option<&[usize]>) -> Result<ExitCode> {
    let cfg = args.config()?;
    let horizons = horizons.unwrap_or(&cfg.horizons);
    let rows = timing_comparison(&cfg.problem, &cfg.normalization, horizons)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.horizon.to_string(),
                format_float(r.online_total_s),
                format_float(r.online_per_step_s),
                format_float(r.batch_s),
                r.online_state_elems.to_string(),
                r.batch_var_count.to_string(),
            ]
        })
        .collect();
    let header = [
        "K",
        "online_total_s",
        "online_per_step_s",
        "batch_s",
        "online_state_elems",
        "batch_var_count",
    ];
    write_table(args.output()?, &header, &table)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &Common, deltas: Option<&[f64]>) -> Result<ExitCode> {
    let cfg = args.config()?;
    let deltas = deltas.unwrap_or(&cfg.deltas);
    let settings = SweepSettings {
        normalization: cfg.normalization,
        estimator: cfg.estimator,
        solver: cfg.solver,
    };
    let rows = constraint_sweep(&cfg.problem, deltas, &settings)?;
    let cell = |k: Option<usize>| k.map(|k| k.to_string()).unwrap_or_default();
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                format_float(r.delta),
                r.active_steps.to_string(),
                cell(r.first_unique_standard),
                cell(r.first_unique_adhoc),
            ]
        })
        .collect();
    write_table(
        args.output()?,
        &["delta", "active_steps", "first_unique_standard", "first_unique_adhoc"],
        &table,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: &Cli) -> Result<ExitCode> {
    match &cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Estimate(args) => cmd_estimate(args),
        Command::Batch(args) => cmd_batch(args),
        Command::Compare { common, horizons } => cmd_compare(common, horizons.as_deref()),
        Command::Sweep { common, deltas } => cmd_sweep(common, deltas.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IOC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // clap would exit with 2, which here means "never unique"
            let _ = e.print();
            return ExitCode::FAILURE;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::intervals;

    #[test]
    fn intervals_group_consecutive_steps() {
        assert_eq!(intervals(&[]), vec![]);
        assert_eq!(intervals(&[6, 7, 8, 33]), vec![(6, 8), (33, 33)]);
    }
}
