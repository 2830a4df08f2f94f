mod commands;
mod experiment;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};
use serde_json::Value;

use commands::*;
use experiment::{execute, Experiment};

#[derive(Parser, Debug)]
#[command(
    name = "subharm",
    version,
    about = "Laminates, subharmonic potentials and their certificates"
)]
struct Cli {
    /// Output directory for CSV reports and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Single-step laminate items and moment tables.
    Laminate(LaminateArgs),
    /// Build a potential realizing a laminate and verify it.
    Realize(RealizeArgs),
    /// Staircase build, level checks and divergence table.
    Staircase(StaircaseArgs),
    /// Wave-cone membership agreement suite.
    Wavecone(WaveconeArgs),
    /// Finite-difference obstacle problem.
    Obstacle(ObstacleArgs),
    /// Run an experiment described by a JSON file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

fn experiment(cmd: Command) -> Box<dyn Experiment> {
    match cmd {
        Command::Laminate(a) => Box::new(LaminateExp(a)),
        Command::Realize(a) => Box::new(RealizeExp(a)),
        Command::Staircase(a) => Box::new(StaircaseExp(a)),
        Command::Wavecone(a) => Box::new(WaveconeExp(a)),
        Command::Obstacle(a) => Box::new(ObstacleExp(a)),
        Command::Run { .. } => unreachable!("config files are expanded before dispatch"),
    }
}

/// Turns `{"command": "staircase", "J": 4, "q": [1.5]}` into the equivalent
/// argument list.
fn config_to_args(cfg: &Value) -> anyhow::Result<Vec<String>> {
    let obj = cfg.as_object().context("config must be a JSON object")?;
    let command = obj
        .get("command")
        .and_then(Value::as_str)
        .context("config needs a string field 'command'")?;
    let mut args = vec!["subharm".to_string(), command.to_string()];
    if let Some(action) = obj.get("action") {
        args.push(
            action
                .as_str()
                .context("'action' must be a string")?
                .to_string(),
        );
    }
    for (key, value) in obj {
        if key == "command" || key == "action" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let scalar = |v: &Value| -> anyhow::Result<String> {
            Ok(match v {
                Value::String(s) => s.clone(),
                Value::Number(n) => n.to_string(),
                other => bail!("field '{key}' has unsupported value {other}"),
            })
        };
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => args.push(flag),
            Value::Array(items) => {
                for v in items {
                    args.push(flag.clone());
                    args.push(scalar(v)?);
                }
            }
            v => {
                args.push(flag);
                args.push(scalar(v)?);
            }
        }
    }
    Ok(args)
}

fn load_config(path: &Path, out: &Path) -> anyhow::Result<Cli> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut args = config_to_args(&cfg)?;
    args.push("--out".into());
    args.push(out.display().to_string());
    Ok(Cli::try_parse_from(args)?)
}

fn main() -> ExitCode {
    let mut cli = Cli::parse();
    if let Command::Run { config } = &cli.command {
        cli = match load_config(config, &cli.out) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e:#}");
                return ExitCode::from(2);
            }
        };
        if matches!(cli.command, Command::Run { .. }) {
            eprintln!("error: a config file cannot name the 'run' command");
            return ExitCode::from(2);
        }
    }
    let out = cli.out.clone();
    let code = execute(experiment(cli.command).as_ref(), &out);
    ExitCode::from(code as u8)
}
