use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use toral_gibbs::verify::{run, Command, RunConfig, EXIT_CONFIG};

/// Numerical verification of bracket geometry, Bowen balls and Gibbs
/// measures for hyperbolic toral maps.
#[derive(Debug, Parser)]
#[command(name = "toral-gibbs", version)]
struct Cli {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    command: Command,
    /// Output directory (overrides `out_dir` in the config; default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let out_dir =
        cli.out.clone().or_else(|| cfg.out_dir.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = run(cli.command, &cfg);
    for c in &outcome.report.checks {
        let tag = if c.record.pass { "PASS" } else { "FAIL" };
        let pot = c.potential.as_deref().map_or(String::new(), |p| format!(" [{p}]"));
        println!(
            "{tag} {}{pot}: {} (samples {}, violations {})",
            c.record.check, c.anchor, c.record.samples, c.record.violations
        );
    }
    for e in &outcome.report.errors {
        eprintln!("error: {e}");
    }
    for h in &outcome.hypothesis_failures {
        eprintln!("hypothesis-unsatisfied: {h}");
    }
    if let Err(e) = outcome.write(&out_dir) {
        eprintln!("cannot write {}: {e}", out_dir.display());
        return ExitCode::from(1);
    }
    println!("{} -> {}", if outcome.report.pass { "PASS" } else { "FAIL" }, out_dir.join("report.json").display());
    ExitCode::from(outcome.exit_code as u8)
}
