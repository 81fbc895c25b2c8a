use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use gmsfem::coarse::displacement_raster;
use gmsfem::harness::{emit_paired_table, emit_table, parse_csv, run_experiment, run_reference, ExperimentConfig, CACHE_ENV};
use gmsfem::{Error, Result};

#[derive(Parser)]
#[command(name = "gmsfem", version, about = "Multiscale elasticity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a basis-size sweep and print the result table.
    Run { config: PathBuf },
    /// Compute (or load from the cache) the fine reference solution only.
    #[command(after_help = format!("The cache directory is taken from ${CACHE_ENV}."))]
    Fine { config: PathBuf },
    /// Print one result CSV as a table, or two side by side (without / with oversampling).
    Table {
        #[arg(required = true, num_args = 1..=2)]
        csv: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let rows = run_experiment(&cfg)?;
            let (csv, text) = emit_table(&rows)?;
            print!("{text}");
            if cfg.output.dir.is_none() {
                eprint!("{csv}");
            }
        }
        Command::Fine { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let t = Instant::now();
            let (g, u, mode) = run_reference(&cfg)?;
            println!("fine reference: {} dofs ({mode:?}) in {:.2?}", u.len(), t.elapsed());
            if let Some(dir) = &cfg.output.dir {
                fs::create_dir_all(dir)?;
                let path = dir.join(format!("{}_reference.raster", cfg.output.name));
                displacement_raster(&g, &u, mode)?.save(&path)?;
                println!("wrote {}", path.display());
            }
        }
        Command::Table { csv } => {
            let tables = csv
                .iter()
                .map(|p| {
                    let text = fs::read_to_string(p).map_err(|e| Error::Config {
                        field: "csv".into(),
                        reason: format!("{}: {e}", p.display()),
                    })?;
                    parse_csv(&text)
                })
                .collect::<Result<Vec<_>>>()?;
            match tables.as_slice() {
                [one] => print!("{}", emit_table(one)?.1),
                [without, with] => print!("{}", emit_paired_table(without, with)?),
                _ => unreachable!("clap limits the argument count"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
