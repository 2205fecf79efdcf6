use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use tlbench::cli::{run, RunConfig};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Curate,
    Synth,
    Train,
    Tune,
    Evaluate,
    Explain,
    Report,
}

/// Transfer-learning benchmark harness.
///
/// Exit status: 0 on success, 1 on a domain error, 2 on a usage or
/// configuration error. TLBENCH_STAGING_DIR overrides the staging directory.
#[derive(Debug, Parser)]
#[command(name = "tlbench", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Top-level seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match RunConfig::load(&args.config) {
        Ok(c) => c.with_overrides(args.seed, args.out),
        Err(e) => {
            eprintln!("tlbench: {e}");
            return ExitCode::from(2);
        }
    };
    let name = args
        .command
        .to_possible_value()
        .expect("no skipped variants")
        .get_name()
        .to_string();
    match run(&name, &config) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tlbench: {e}");
            ExitCode::from(1)
        }
    }
}
