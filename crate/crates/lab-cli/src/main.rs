use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use nls_lab::config::parse_override;
use nls_lab::{Command, ExperimentConfig, LabError};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Action {
    Ground,
    Evolve,
    Instability,
    Verify,
    Sweep,
    /// Whatever `command` the config names.
    Run,
}

/// Runs one experiment and writes its artifacts. Exit status: 0 success,
/// 1 failed certificate, check or run, 2 invalid config.
#[derive(Debug, Parser)]
#[command(name = "nls-lab", version)]
struct Args {
    action: Action,

    /// TOML config; omitted sections take their defaults.
    #[arg(short, long)]
    config: Option<PathBuf>,

    /// Override any config key, e.g. `--set evolve.dt0=5e-4` (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(short, long)]
    out: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    omega: Option<f64>,

    /// Ground-state amplitude factor for `instability`.
    #[arg(long)]
    lambda: Option<f64>,
}

fn resolve(args: &Args) -> Result<ExperimentConfig, LabError> {
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let command = match args.action {
        Action::Ground => Some(Command::Ground),
        Action::Evolve => Some(Command::Evolve),
        Action::Instability => Some(Command::Instability),
        Action::Verify => Some(Command::Verify),
        Action::Sweep => Some(Command::Sweep),
        Action::Run => None,
    };
    if let Some(c) = command {
        overrides.push(("command".into(), format!("\"{c}\"")));
    }
    if let Some(out) = &args.out {
        overrides.push(("output".into(), toml_string(&out.to_string_lossy())));
    }
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    if let Some(omega) = args.omega {
        overrides.push(("model.omega".into(), format!("{omega:?}")));
    }
    if let Some(lambda) = args.lambda {
        overrides.push(("instability.lambda".into(), format!("{lambda:?}")));
    }
    ExperimentConfig::resolve(args.config.as_deref(), &overrides)
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = resolve(&args).and_then(|cfg| nls_lab::run(&cfg));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.headline);
            println!("artifacts: {}", outcome.dir.display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
