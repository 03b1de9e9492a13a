//! Runs a scenario file the same way the `spinnet` binary does.
//!
//! `cargo run --example run_scenario -- examples/chain_resonant.toml /tmp/out`

use std::path::PathBuf;

fn main() {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "examples/chain_resonant.toml".into()));
    let out = args.next().map(PathBuf::from);
    match spinnet::cli::run_file(&config, None, out) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.exit_code());
        }
    }
}
