use std::process::ExitCode;

use clap::Parser;
use platform_qbd_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(run(&cli))
}
