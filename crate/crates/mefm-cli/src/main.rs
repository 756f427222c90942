mod args;
mod commands;
mod errors;
mod experiment;
mod io;
mod pipeline;

use args::{Cli, Command, FileFormat};
use clap::error::ErrorKind;
use clap::Parser;
use errors::{CliError, CliResult};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes when asked for; anything else
            // (bad flag, missing argument or subcommand) is a usage error.
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let code = match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    };
    std::process::exit(code);
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let format = cli.format.unwrap_or(FileFormat::Csv);

    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(a, cli.seed, &cli.output, format),
        Command::Fit(a) => commands::cmd_fit(a, &cli.output, format),
        Command::Evaluate(a) => commands::cmd_evaluate(a, &cli.output),
        Command::Experiment(a) => experiment::cmd_experiment(a, cli.seed, &cli.output),
        Command::Oracles(a) => commands::cmd_oracles(a, &cli.output),
    }
}
