use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use smoothing_lab::experiment::{exit_code, run, RunOptions, Subcommand};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    CheckPotential,
    Multiplier,
    Solve,
    VerifyIdentities,
    Sweep,
    Evolve,
    Spectrum,
}

impl From<Command> for Subcommand {
    fn from(c: Command) -> Self {
        match c {
            Command::CheckPotential => Subcommand::CheckPotential,
            Command::Multiplier => Subcommand::Multiplier,
            Command::Solve => Subcommand::Solve,
            Command::VerifyIdentities => Subcommand::VerifyIdentities,
            Command::Sweep => Subcommand::Sweep,
            Command::Evolve => Subcommand::Evolve,
            Command::Spectrum => Subcommand::Spectrum,
        }
    }
}

/// Run a smoothing-lab experiment described by a TOML config.
#[derive(Debug, Parser)]
#[command(name = "smoothing-lab", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment config file.
    #[arg(long)]
    config: PathBuf,
    /// Report directory; overrides `output.path`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    threads: Option<usize>,
    /// Replaces `data.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    let options = RunOptions {
        seed: cli.seed,
        base_dir: cli.config.parent().map(PathBuf::from),
    };
    let report = match run(cli.command.into(), &text, &options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e) as u8);
        }
    };
    let dir = cli
        .out
        .or_else(|| report.output.path.clone())
        .unwrap_or_else(|| PathBuf::from("reports"));
    match report.write(&dir, report.output.format) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    println!("config hash {}", report.config_hash);
    let name = report.subcommand.name();
    if report.passed() {
        println!("{name}: pass");
        ExitCode::SUCCESS
    } else {
        for f in &report.failures {
            eprintln!("assertion failed: {f}");
        }
        println!("{name}: fail");
        ExitCode::from(2)
    }
}
