use clap::Parser;
use nnbisim_cli::args::Cli;
use nnbisim_cli::commands::{execute, exit_code_for, summarize};

fn main() {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(report) => {
            println!("{}", report.to_json());
            for line in summarize(&report) {
                eprintln!("{line}");
            }
            std::process::exit(report.exit_status);
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code_for(&err));
        }
    }
}
