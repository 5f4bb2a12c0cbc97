use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use cellswitch::experiment::{
    emit_report, load_config_with, parse_assignment, run_experiment, run_sweep, write_sweep,
    ExperimentConfig, SweepAxis,
};
use cellswitch::ingest::{
    profiles_from_cdr_dir, write_profiles_csv, GridGeometry, DEFAULT_CELL_SIZE_M,
};
use cellswitch::{Method, Scalar};

#[derive(Parser)]
#[command(
    name = "cellswitch",
    version,
    about = "Cell switching under partial traffic knowledge"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, Default, ValueEnum)]
enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Estimator name, e.g. `mlc` or `distance_weighted`.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long)]
    sbs_count: Option<usize>,
    /// Any other config value, as `dotted.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum, default_value_t)]
    precision: Precision,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its report.
    Simulate(RunArgs),
    /// Run the experiment over a grid of config values, one series file per
    /// combination of all but the last `--vary` axis.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// `dotted.key=v1,v2,...`. Repeatable; the last one is the x-axis.
        #[arg(long, value_name = "KEY=V1,V2,...", required = true)]
        vary: Vec<String>,
    },
    /// Aggregate a directory of CDR files into a profile cache CSV.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long, default_value_t = 100)]
        grid_side: u32,
        #[arg(long, default_value_t = DEFAULT_CELL_SIZE_M)]
        cell_size: f64,
        /// Days to average over; defaults to the days present in the records.
        #[arg(long)]
        days: Option<usize>,
    },
}

impl RunArgs {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut ov = self
            .set
            .iter()
            .map(|s| parse_assignment(s))
            .collect::<cellswitch::Result<Vec<_>>>()?;
        if let Some(seed) = self.seed {
            ov.push(("seed".into(), seed.to_string()));
        }
        if let Some(s) = self.sbs_count {
            ov.push(("sbs_count".into(), s.to_string()));
        }
        if let Some(name) = &self.estimator {
            if Method::from_name(name).is_none() {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                bail!(
                    "unknown estimator {name:?}; expected one of {}",
                    known.join(", ")
                );
            }
            ov.push(("estimator.method".into(), format!("\"{name}\"")));
        }
        Ok(ov)
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = load_config_with(&self.config, &self.overrides()?)?;
        if let Some(out) = &self.out {
            cfg.output = out.clone();
        }
        Ok(cfg)
    }
}

fn simulate<T: Scalar>(cfg: &ExperimentConfig) -> Result<()> {
    let report = run_experiment::<T>(cfg)?;
    let files = emit_report(&report, &cfg.output)?;
    let stats = report.summary().stats;
    let pct = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.3}%", x * 100.0));
    println!(
        "{} rows, solver {}, estimator {}",
        report.rows.len(),
        report.solver.name(),
        report.estimator
    );
    println!(
        "mean error {}, power gap {}, decision change {}",
        pct(stats.mean_eps.mean),
        pct(stats.power_gap.mean),
        pct(stats.decision_change.mean)
    );
    println!(
        "wrote {} and {}",
        files.rows.display(),
        files.summary.display()
    );
    Ok(())
}

fn sweep<T: Scalar>(run: &RunArgs, vary: &[String]) -> Result<()> {
    let axes = vary
        .iter()
        .map(|v| SweepAxis::parse(v))
        .collect::<cellswitch::Result<Vec<_>>>()?;
    let base = run.load()?;
    let text =
        std::fs::read_to_string(&run.config).with_context(|| run.config.display().to_string())?;
    let series = run_sweep::<T>(&text, &run.overrides()?, &axes)?;
    for path in write_sweep(&series, &base.output)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn ingest(
    dataset: &Path,
    cache: &Path,
    grid_side: u32,
    cell_size: f64,
    days: Option<usize>,
) -> Result<()> {
    let geometry = GridGeometry::new(grid_side, cell_size)?;
    let profiles = profiles_from_cdr_dir::<f64>(dataset, &geometry, days)
        .with_context(|| format!("ingesting {}", dataset.display()))?;
    if let Some(parent) = cache.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
    }
    write_profiles_csv(cache, &profiles)?;
    println!("wrote {} profiles to {}", profiles.len(), cache.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = args.load()?;
            match args.precision {
                Precision::F64 => simulate::<f64>(&cfg),
                Precision::F32 => simulate::<f32>(&cfg),
            }
        }
        Command::Sweep { run, vary } => match run.precision {
            Precision::F64 => sweep::<f64>(&run, &vary),
            Precision::F32 => sweep::<f32>(&run, &vary),
        },
        Command::Ingest {
            dataset,
            cache,
            grid_side,
            cell_size,
            days,
        } => ingest(&dataset, &cache, grid_side, cell_size, days),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
