use bloch_asymptotics::cli::{run, Args};
use clap::Parser;

fn main() {
    std::process::exit(run(&Args::parse()));
}
