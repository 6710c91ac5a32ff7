use clap::Parser;
use triseek::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
