use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

mod args;
mod commands;

use args::{Cli, Command, MeasureCommand};
use commands::Outcome;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version are successful exits, every other parse failure is a usage error
            return ExitCode::from(if e.exit_code() == 0 { 0 } else { 1 });
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();

    let out = commands::Output {
        json: cli.json,
        path: cli.out,
    };
    let result = match cli.command {
        Command::Model(a) => commands::model::run(&a, &out),
        Command::Simulate(a) => commands::simulate::run(&a, &out),
        Command::Measure { command } => match command {
            MeasureCommand::Serve(a) => commands::measure::serve(&a),
            MeasureCommand::Run(a) => commands::measure::run(&a, &out),
        },
        Command::Analyze(a) => commands::analyze::run(&a, &out),
        Command::Casestudy(a) => commands::casestudy::run(&a, &out),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
