//! `risee`: runs secure-EE experiments and writes CSV results with a
//! reproducibility manifest.

mod experiment;
mod manifest;
mod overrides;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use risee::RawConfig;

use experiment::{preset, ExperimentId, ExperimentSpec, Sweep};
use manifest::Manifest;
use overrides::apply_set;
use runner::{log_log_slope, run_experiment, write_output, RunOutput};

#[derive(Parser)]
#[command(name = "risee", version, about = "Secure energy-efficiency experiments for RIS-aided multicast")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, traces.csv and manifest.toml.
    Run(RunArgs),
    /// Print the effective config after every override.
    EchoConfig(ConfigArgs),
    /// Print the default config.
    Schema,
    /// Reproduce a previous run from its manifest.
    Rerun(RerunArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Scenario TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Preset whose config pins, sweeps and schemes are applied.
    #[arg(long, value_enum, default_value = "custom")]
    experiment: ExperimentId,
    /// `section.key=value`, applied after the preset; repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    p_max_dbm: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `section.key=v1,v2,...`; replaces the preset's sweeps; repeatable.
    #[arg(long = "sweep", value_name = "SECTION.KEY=V1,V2")]
    sweeps: Vec<String>,
    /// Comma-separated schemes; replaces the preset's list.
    #[arg(long, value_delimiter = ',')]
    schemes: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Write wall-clock columns as zero so outputs are byte-reproducible.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct RerunArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; does not change results.
    #[arg(long)]
    workers: Option<usize>,
}

/// Defaults, then the file, then the preset pins, then `--set`, then the
/// dedicated flags.
fn effective_config(args: &ConfigArgs) -> Result<RawConfig> {
    let mut raw = RawConfig::from_path(&args.config).with_context(|| format!("config {}", args.config.display()))?;
    for pin in preset(args.experiment).pins {
        raw = apply_set(&raw, &pin)?;
    }
    for s in &args.sets {
        raw = apply_set(&raw, s)?;
    }
    if let Some(t) = args.trials {
        raw.run.trials = t;
    }
    if let Some(s) = args.seed {
        raw.run.rng_seed = s;
    }
    if let Some(w) = args.workers {
        raw.run.workers = w;
    }
    if let Some(p) = args.p_max_dbm {
        raw.system.p_max_dbm = p;
    }
    raw.validate()?;
    Ok(raw)
}

fn experiment_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let p = preset(args.config.experiment);
    let sweeps = if args.sweeps.is_empty() {
        p.sweeps
    } else {
        args.sweeps.iter().map(|s| Sweep::parse(s)).collect::<Result<_>>()?
    };
    let schemes = if args.schemes.is_empty() {
        p.schemes.iter().map(ToString::to_string).collect()
    } else {
        args.schemes.iter().map(|s| s.trim().to_string()).collect()
    };
    let spec = ExperimentSpec {
        experiment: args.config.experiment,
        sweeps,
        schemes,
        timing: !args.no_timing,
    };
    spec.check()?;
    Ok(spec)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("build worker pool")
}

fn print_summary(spec: &ExperimentSpec, out: &RunOutput) {
    for r in &out.results {
        println!(
            "{}={} {}: EE {:.6e} bit/J (std {:.3e}, {} trials, {:.2} AM rounds)",
            r.sweep, r.value, r.scheme, r.mean_ee_bits_per_joule, r.std, r.trials, r.mean_am_iters
        );
    }
    if spec.experiment != ExperimentId::Scaling || !spec.timing {
        return;
    }
    for s in &spec.sweeps {
        let rows: Vec<_> = out.results.iter().filter(|r| r.sweep == s.key).collect();
        let pts = |f: fn(&runner::ResultRow) -> f64| -> Vec<(f64, f64)> {
            rows.iter().filter_map(|r| Some((r.value.parse().ok()?, f(r)))).collect()
        };
        let pg = log_log_slope(&pts(|r| r.mean_ms_per_pg_iter));
        let mf = log_log_slope(&pts(|r| r.mean_ms_per_manifold_iter));
        let fmt = |x: Option<f64>| x.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        println!("log-log slope vs {}: beamformer {} / phases {}", s.key, fmt(pg), fmt(mf));
    }
}

fn execute(raw: &RawConfig, spec: &ExperimentSpec, workers: usize, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("create {}", out_dir.display()))?;
    let manifest = Manifest::new(spec, raw);
    let out = pool(workers)?.install(|| run_experiment(raw, spec))?;
    write_output(&out, out_dir)?;
    manifest.write(&out_dir.join("manifest.toml"))?;
    print_summary(spec, &out);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let raw = effective_config(&args.config)?;
            let spec = experiment_spec(&args)?;
            execute(&raw, &spec, raw.run.workers, &args.out)
        }
        Command::EchoConfig(args) => {
            print!("{}", effective_config(&args)?.to_toml_string());
            Ok(())
        }
        Command::Schema => {
            print!("{}", RawConfig::default().to_toml_string());
            Ok(())
        }
        Command::Rerun(args) => {
            let m = Manifest::read(&args.manifest)?;
            m.config.validate()?;
            let workers = args.workers.unwrap_or(m.config.run.workers);
            execute(&m.config, &m.experiment, workers, &args.out)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
