use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use reputation_experiments::output::format_float;
use reputation_experiments::runner::to_integer;
use reputation_experiments::{
    compare, price_point, reproduce_table, run_experiment, write_csv, ConfigError,
    ExperimentConfig, ResultRow, RunError, RunOptions, SimOverride, TableId,
};

/// Reputation-system measures: analytic evaluation, simulation and sweeps.
#[derive(Debug, Parser)]
#[command(name = "repsim", version)]
struct Cli {
    /// CSV destination. Defaults to the config's `output.path`, else stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Directory for relative output paths.
    #[arg(long, global = true, env = "REPSIM_OUTPUT_DIR")]
    output_dir: Option<PathBuf>,
    /// Fill the runtime_s column (makes output run-dependent).
    #[arg(long, global = true)]
    timing: bool,
    /// Overrides the config's simulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recompute a reference table and check it against the printed values.
    Reproduce {
        /// table2, table3, table4 or table5
        table: TableId,
        /// Add Monte Carlo estimates.
        #[arg(long)]
        simulate: bool,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
    },
    /// Evaluate every point of a sweep config.
    Run { config: PathBuf },
    /// Simulate every point and flag measures more than 3 standard errors off.
    Compare { config: PathBuf },
    /// Print the insurance price, deposit and clearing-time bounds.
    Price {
        config: PathBuf,
        /// Overrides the config's `pricing.epsilon`.
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.downcast_ref::<ConfigError>().is_some()
                || e.downcast_ref::<RunError>()
                    .is_some_and(RunError::is_config);
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}

fn load(cli: &Cli, path: &Path) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.set("sim.seed", to_integer("sim.seed", seed)?)?;
    }
    Ok(config)
}

fn log_points(config: &ExperimentConfig) -> anyhow::Result<()> {
    for (i, point) in config.points()?.iter().enumerate() {
        log::info!("point {i}: {}", serde_json::to_string(point)?);
    }
    Ok(())
}

fn destination(cli: &Cli, fallback: Option<&Path>) -> Option<PathBuf> {
    let path = cli.output.as_deref().or(fallback)?;
    Some(match &cli.output_dir {
        Some(dir) if path.is_relative() => dir.join(path),
        _ => path.to_path_buf(),
    })
}

fn emit(
    cli: &Cli,
    fallback: Option<&Path>,
    names: &[String],
    rows: &[ResultRow],
) -> anyhow::Result<()> {
    match destination(cli, fallback) {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .with_context(|| format!("creating {}", parent.display()))?;
            }
            let file =
                File::create(&path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(BufWriter::new(file), names, rows)?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
        }
        None => write_csv(io::stdout().lock(), names, rows)?,
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let options = RunOptions {
        timing: cli.timing,
        force_sim: false,
    };
    match &cli.command {
        Command::Reproduce {
            table,
            simulate,
            runs,
        } => {
            let sim = simulate.then_some(SimOverride {
                runs: *runs,
                seed: cli.seed.unwrap_or(1),
            });
            let mut config = table.config()?;
            if let Some(s) = sim {
                config.set("sim.enabled", toml::Value::Boolean(true))?;
                config.set("sim.runs", to_integer("sim.runs", s.runs)?)?;
                config.set("sim.seed", to_integer("sim.seed", s.seed)?)?;
            }
            log_points(&config)?;
            let rep = reproduce_table(*table, sim, options)?;
            let name = PathBuf::from(format!("{table}.csv"));
            let fallback = cli.output_dir.is_some().then_some(name.as_path());
            emit(cli, fallback, &rep.names, &rep.rows)?;
            let mut err = io::stderr().lock();
            for c in &rep.checks {
                writeln!(
                    err,
                    "{} {} [{}] printed {} computed {:.6} deviation {:.3e} (tolerance {})",
                    if c.pass { "ok  " } else { "FAIL" },
                    c.measure,
                    c.values.join(", "),
                    c.printed,
                    c.analytic,
                    c.deviation,
                    c.tolerance,
                )?;
            }
            let failed = rep.failures().count();
            writeln!(
                err,
                "{table}: {} of {} cells within tolerance",
                rep.checks.len() - failed,
                rep.checks.len()
            )?;
            Ok(failed == 0)
        }
        Command::Run { config: path } => {
            let config = load(cli, path)?;
            log_points(&config)?;
            let rows = run_experiment(&config, options)?;
            emit(
                cli,
                config.output.path.as_deref(),
                &config.sweep_names(),
                &rows,
            )?;
            Ok(true)
        }
        Command::Compare { config: path } => {
            let config = load(cli, path)?;
            log_points(&config)?;
            let (rows, comparisons) = compare(&config, options)?;
            emit(
                cli,
                config.output.path.as_deref(),
                &config.sweep_names(),
                &rows,
            )?;
            let mut err = io::stderr().lock();
            for c in &comparisons {
                writeln!(
                    err,
                    "{} {} [{}] analytic {} simulated {} ± {} z = {:.2}{}",
                    if c.flagged { "FLAG" } else { "ok  " },
                    c.measure,
                    c.values.join(", "),
                    format_float(c.analytic),
                    format_float(c.sim.mean),
                    format_float(c.sim.stderr),
                    c.z,
                    c.note
                        .as_deref()
                        .map(|n| format!(" ({n})"))
                        .unwrap_or_default(),
                )?;
            }
            let flagged = comparisons.iter().filter(|c| c.flagged).count();
            writeln!(err, "{flagged} of {} measures flagged", comparisons.len())?;
            Ok(flagged == 0)
        }
        Command::Price {
            config: path,
            epsilon,
        } => {
            let mut config = load(cli, path)?;
            if let Some(eps) = epsilon {
                config.set("pricing.epsilon", toml::Value::Float(*eps))?;
            }
            log_points(&config)?;
            let mut out = io::stdout().lock();
            for point in config.points()? {
                let label: Vec<String> = point
                    .values
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                if !label.is_empty() {
                    writeln!(out, "[{}]", label.join(", "))?;
                }
                for (name, value) in price_point(&point)? {
                    writeln!(out, "{name} = {}", format_float(value))?;
                }
                writeln!(out, "epsilon = {}", point.pricing.epsilon)?;
            }
            Ok(true)
        }
    }
}
