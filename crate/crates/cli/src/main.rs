mod cli;
mod commands;
mod output;
mod svg;

use clap::Parser;

fn main() {
    let args = cli::Cli::parse();
    if let Err(err) = commands::run(args.command) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
