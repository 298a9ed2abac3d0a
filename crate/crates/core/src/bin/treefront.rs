use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use treefront::config::{parse_config, ExperimentKind};
use treefront::run::execute;

#[derive(Parser)]
#[command(
    name = "treefront",
    version,
    about = "KPP reaction-diffusion on regular metric trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    plots: bool,
    /// Worker threads for parallel scans.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    Spectrum(Common),
    Barriers(Common),
    ValidateBarriers(Common),
    Simulate(Common),
    SimulateTree(Common),
    Scan(Common),
    Speed(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Spectrum(a) => (ExperimentKind::Spectrum, a),
        Command::Barriers(a) => (ExperimentKind::Barriers, a),
        Command::ValidateBarriers(a) => (ExperimentKind::ValidateBarriers, a),
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::SimulateTree(a) => (ExperimentKind::SimulateTree, a),
        Command::Scan(a) => (ExperimentKind::Scan, a),
        Command::Speed(a) => (ExperimentKind::Speed, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!(
                "{}",
                serde_json::json!({"category": "config", "message": e.to_string(), "exit_code": 2})
            );
            return ExitCode::from(2);
        }
    }
    let outcome = match parse_config(&args.config) {
        Ok(cfg) => execute(cfg, kind, &args.out, args.plots),
        Err(e) => {
            let code = e.exit_code();
            eprintln!(
                "{}",
                serde_json::json!({"category": e.category(), "message": e.to_string(), "exit_code": code})
            );
            return ExitCode::from(code as u8);
        }
    };
    if let Some(e) = &outcome.error {
        eprintln!(
            "{}",
            serde_json::json!({"category": e.category(), "message": e.to_string(), "exit_code": outcome.exit_code})
        );
    }
    ExitCode::from(outcome.exit_code as u8)
}
