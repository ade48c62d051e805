use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsense::harness::{self, ExperimentConfig, Verdict};
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "bsense", version, about = "Spectrum-blind sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recovery success, robustness and collision witnesses over an M sweep
    Phase(Common),
    /// Eigenvalue staircases of the canonical and allocation operators
    Landau(Common),
    /// Fractal slopes, doubling ratios, information dimension, sparsity fraction
    Dims(Common),
    /// Export the canonical prolate basis sampled on the time grid
    Pswf(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat key = value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key, e.g. `--set horizon=16` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    output: Option<String>,
    /// Print the effective configuration and exit
    #[arg(long)]
    dump_config: bool,
}

fn load(common: &Common) -> bsense::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for o in &common.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| bsense::Error::Config(format!("override {o:?} is not KEY=VALUE")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.output {
        cfg.output = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &str, name: &str) -> bsense::Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)?;
    let path = Path::new(dir).join(name);
    let file = File::create(&path)?;
    Ok((path, BufWriter::new(file)))
}

fn run(command: &Command) -> bsense::Result<(String, PathBuf, Vec<Verdict>)> {
    match command {
        Command::Phase(c) => {
            let cfg = load(c)?;
            let result = harness::run_phase_transition(&cfg)?;
            let (path, out) = create(&cfg.output, "phase.csv")?;
            result.write_csv(out)?;
            Ok(("phase".into(), path, result.verdicts()))
        }
        Command::Landau(c) => {
            let cfg = load(c)?;
            let result = harness::run_landau_widom(&cfg)?;
            let (path, out) = create(&cfg.output, "landau.csv")?;
            result.write_csv(out)?;
            Ok(("landau".into(), path, result.verdicts()))
        }
        Command::Dims(c) => {
            let cfg = load(c)?;
            let result = harness::run_dimension_suite(&cfg)?;
            let (path, out) = create(&cfg.output, "dims.csv")?;
            result.write_csv(out)?;
            Ok(("dims".into(), path, result.verdicts()))
        }
        Command::Pswf(c) => {
            let cfg = load(c)?;
            let (basis, verdicts) = harness::run_pswf_export(&cfg)?;
            let (path, out) = create(&cfg.output, "pswf.csv")?;
            basis.write_csv(out)?;
            Ok(("pswf".into(), path, verdicts))
        }
    }
}

fn common(command: &Command) -> &Common {
    match command {
        Command::Phase(c) | Command::Landau(c) | Command::Dims(c) | Command::Pswf(c) => c,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if common(&cli.command).dump_config {
        return match load(common(&cli.command)) {
            Ok(cfg) => {
                print!("{}", cfg.dump());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        };
    }
    match run(&cli.command) {
        Ok((name, path, verdicts)) => {
            for v in verdicts.iter().filter(|v| !v.pass) {
                eprintln!("FAIL {}: {}", v.name, v.detail);
            }
            let passed = verdicts.iter().filter(|v| v.pass).count();
            let ok = harness::all_pass(&verdicts);
            println!(
                "{name}: {} {passed}/{} checks, wrote {}",
                if ok { "PASS" } else { "FAIL" },
                verdicts.len(),
                path.display()
            );
            if ok { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
