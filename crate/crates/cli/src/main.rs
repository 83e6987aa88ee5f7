//! `bbm-lab <experiment> [--config PATH] [--seed S] [--replicas N] [--workers N] [--out DIR] [--format F]`

use std::path::PathBuf;
use std::process::ExitCode;

use bbm_lab::harness::{exit_code, run_experiment, ExperimentConfig, ExperimentId, OutputFormat};
use bbm_lab::Result;
use clap::{value_parser, Arg, ArgMatches, Command};

fn run_args(cmd: Command) -> Command {
    cmd.arg(Arg::new("config").long("config").value_name("PATH").value_parser(value_parser!(PathBuf)))
        .arg(Arg::new("seed").long("seed").value_name("U64").value_parser(value_parser!(u64)))
        .arg(Arg::new("replicas").long("replicas").value_name("N").value_parser(value_parser!(u64)))
        .arg(Arg::new("workers").long("workers").value_name("N").value_parser(value_parser!(usize)))
        .arg(Arg::new("out").long("out").value_name("DIR").value_parser(value_parser!(PathBuf)))
        .arg(Arg::new("format").long("format").value_parser(["csv", "json", "both"]))
}

fn cli() -> Command {
    let mut cmd = Command::new("bbm-lab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Seeded experiments on branching Brownian motion with selection")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for id in ExperimentId::ALL {
        cmd = cmd.subcommand(run_args(Command::new(id.as_str())));
    }
    cmd
}

fn config(id: ExperimentId, m: &ArgMatches) -> Result<ExperimentConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => ExperimentConfig::from_toml(&std::fs::read_to_string(path)?, Some(id))?,
        None => ExperimentConfig::new(id),
    };
    if let Some(v) = m.get_one::<u64>("seed") {
        cfg.seed = *v;
    }
    if let Some(v) = m.get_one::<u64>("replicas") {
        cfg.replicas = *v;
    }
    if let Some(v) = m.get_one::<usize>("workers") {
        cfg.workers = *v;
    }
    if let Some(v) = m.get_one::<PathBuf>("out") {
        cfg.out = v.clone();
    }
    if let Some(v) = m.get_one::<String>("format") {
        cfg.format = v.parse::<OutputFormat>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    let result = name.parse::<ExperimentId>().and_then(|id| config(id, sub)).and_then(|cfg| run_experiment(&cfg));
    match result {
        Ok(manifest) => {
            for f in &manifest.outputs {
                println!("{}  {}", f.sha256, manifest.out.join(&f.path).display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("bbm-lab {name}: {e}");
            ExitCode::from(u8::try_from(exit_code(&e)).unwrap_or(1))
        }
    }
}

