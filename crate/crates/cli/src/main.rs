use std::process::ExitCode;

use clap::Parser;

use ksd_lab::config::{resolve, Cli};
use ksd_lab::error::CliError;
use ksd_lab::{configure_threads, run, THREADS_ENV};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads(std::env::var(THREADS_ENV).ok().as_deref())
        .and_then(|_| resolve(cli.command, &cli.overrides))
        .and_then(|cfg| run(&cfg));
    match outcome {
        Ok(m) => {
            for (stage, secs) in &m.stages {
                println!("{stage}: done in {secs:.3} s");
            }
            println!("{} artifacts in {}", m.artifacts.len(), m.config.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
