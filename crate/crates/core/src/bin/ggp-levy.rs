use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ggp_levy::cli::{self, Command, RunConfig};
use ggp_levy::Error;

#[derive(Parser)]
#[command(name = "ggp-levy", version, about = "GGP / NGGP simulation and Lévy-driven SV model fitting")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    /// key = value config file, or a manifest.json from an earlier run
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory
    #[arg(long)]
    output: Option<PathBuf>,
    /// extra key=value overrides
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate returns and latent volatility
    Simulate(Common),
    /// Fit a model by particle marginal Metropolis-Hastings
    Fit(Common),
    /// Score a fit against held-out returns
    Evaluate(Common),
    /// Draw posterior-predictive return paths
    Predict(Common),
    /// Run quick invariant checks
    Selftest(Common),
}

fn build(command: Command, c: Common) -> Result<RunConfig, Error> {
    let base = match &c.config {
        Some(p) => cli::read_config_file(p)?,
        None => Default::default(),
    };
    let mut overrides = Vec::new();
    for kv in &c.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            field: kv.clone(),
            msg: "expected key=value".into(),
        })?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    if let Some(s) = c.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    if let Some(o) = &c.output {
        overrides.push(("output".into(), o.to_string_lossy().into_owned()));
    }
    RunConfig::from_map(command, base, &overrides)
}

fn run(args: Args) -> Result<(), Error> {
    let (command, common) = match args.cmd {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::Evaluate(c) => (Command::Evaluate, c),
        Cmd::Predict(c) => (Command::Predict, c),
        Cmd::Selftest(c) => (Command::Selftest, c),
    };
    let cfg = build(command, common)?;
    let files = match command {
        Command::Simulate => cli::cmd_simulate(&cfg)?,
        Command::Fit => cli::cmd_fit(&cfg)?,
        Command::Evaluate => cli::cmd_evaluate(&cfg)?,
        Command::Predict => cli::cmd_predict(&cfg)?,
        Command::Selftest => {
            let checks = cli::cmd_selftest(&cfg)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if failed > 0 {
                return Err(Error::Numeric(format!("{failed} self-test check(s) failed")));
            }
            return Ok(());
        }
    };
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let name = match &args.cmd {
        Cmd::Simulate(_) => "simulate",
        Cmd::Fit(_) => "fit",
        Cmd::Evaluate(_) => "evaluate",
        Cmd::Predict(_) => "predict",
        Cmd::Selftest(_) => "selftest",
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error in {name}: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
