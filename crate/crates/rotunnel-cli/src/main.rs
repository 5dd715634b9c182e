use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rotunnel_cli::budget::{budget_report, budget_table, budget_text};
use rotunnel_cli::config::{load, Config};
use rotunnel_cli::output::Table;
use rotunnel_cli::sweeps::{run_decoherence_map, run_evolve, run_spectrum, run_visibility_map};
use rotunnel_cli::CliError;

#[derive(Parser)]
#[command(name = "rotunnel", version, about = "Rotational tunneling of a levitated magnetic dipole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration with dotted keys; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override a config key, e.g. --set model.n_max=30. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Lowest levels against v0.
    Spectrum,
    /// p+(t), purity and trace error for one parameter point.
    Evolve,
    /// Closed-system visibility over two of v0, hx, hz.
    VisMap,
    /// Visibility under the configured channel over gamma, temperature or lambda.
    DecMap,
    /// Decoherence rates of the configured channels, ranked.
    Budget,
    /// Resolve the configuration and print the manifest.
    Validate,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => String::new(),
    };
    let cfg: Config = load(&text, &cli.set)?;
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(k) = cli.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global();
    }
    let start = Instant::now();
    let table = match cli.command {
        Command::Spectrum => run_spectrum(&cfg)?,
        Command::Evolve => run_evolve(&cfg)?,
        Command::VisMap => run_visibility_map(&cfg)?,
        Command::DecMap => run_decoherence_map(&cfg)?,
        Command::Budget => {
            let report = budget_report(&cfg)?;
            eprint!("{}", budget_text(&report));
            budget_table(&cfg, &report)
        }
        Command::Validate => {
            let mut t = Table::new("validate", &cfg, &["key", "value"]);
            t.rows = cfg.resolved.iter().map(|(k, v)| vec![k.clone(), v.clone()]).collect();
            t
        }
    };
    // Wall time stays out of the CSV so identical runs give identical files.
    eprintln!("wall time: {:.3} s", start.elapsed().as_secs_f64());
    match &cli.out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            table.write(&mut w)?;
            w.flush()?;
        }
        None => table.write(io::stdout().lock())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
