use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use torkin_cli::{run_path, CliError, RunOptions};

/// Run one experiment described by a JSON config.
#[derive(Parser, Debug)]
#[command(name = "torkin", version)]
struct Args {
    /// Config file (alternative to --config).
    config_file: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `sampling.num_samples=1000`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sampling seed (overrides `sampling.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; changes speed only.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let path = match (args.config_file, args.config) {
        (Some(p), None) | (None, Some(p)) => p,
        (Some(_), Some(_)) => return fail(CliError::Validation("give the config once".into())),
        (None, None) => return fail(CliError::Validation("no config given; use --config PATH".into())),
    };
    let opts = RunOptions { overrides: args.set, out: args.out, seed: args.seed, threads: args.threads };
    match run_path(&path, &opts) {
        Ok(outcome) => {
            println!("{}", outcome.summary_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("torkin: {e}");
    ExitCode::from(e.exit_code() as u8)
}
