use std::process::ExitCode;

use clap::Parser;

use phs_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses exit code 2 for usage errors; 2 is reserved for failed hypotheses
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli.command) {
        Ok((report, code)) => {
            print!("{report}");
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("phs {}: {e}", cli.command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
