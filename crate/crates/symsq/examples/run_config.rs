//! Driving a verification run from code: resolve a configuration the same
//! way the command line does, run it, and print the CSV rendering.
//!
//! cargo run --release --example run_config

use clap::Parser;
use symsq::cli::{render, run, Cli, RunConfig};

fn main() -> symsq::Result<()> {
    let cli = Cli::parse_from(["symsq", "verify-fe", "--q", "3,5", "--format", "csv"]);
    let config = RunConfig::resolve(&cli.command)?;
    println!("{}", serde_json::to_string_pretty(&config)?);
    let out = run(&config)?;
    print!("{}", render(&out)?);
    println!("all passed: {}", out.passed);
    Ok(())
}
