use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use skewlab_cli::{parse_config, run, Subcommand};

/// Run skew-product experiments described by a configuration file.
#[derive(Debug, Parser)]
#[command(name = "skewlab", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV files and the manifest.
    #[arg(long)]
    out: PathBuf,
}

const THREADS_VAR: &str = "SKEWLAB_THREADS";

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let threads = match v.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => {
                eprintln!("error: {THREADS_VAR} must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        };
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    match run(args.subcommand, &cfg, &args.out) {
        Ok(manifest) => {
            for o in &manifest.outcomes {
                let verdicts: Vec<String> = o
                    .verdicts
                    .iter()
                    .map(|v| {
                        format!(
                            "{}={}",
                            v.threshold.key,
                            v.passed()
                                .map_or("n/a", |p| if p { "pass" } else { "fail" })
                        )
                    })
                    .collect();
                println!(
                    "{:<13} {:?} {}",
                    o.subcommand.name(),
                    o.status,
                    verdicts.join(" ")
                );
            }
            println!("manifest: {}", args.out.join("manifest.txt").display());
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
