//! Batch runner for moment quasimorphism experiments.

mod config;
mod output;
mod run;
mod scenarios;
mod suite;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "moment-qm", version, about = "Run moment quasimorphism experiments from TOML configs")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "MOMENT_QM_THREADS")]
    threads: Option<usize>,
    /// Override the seed of every config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario config.
    Run { config: PathBuf },
    /// Run every *.toml config in a directory and write summary.csv.
    Suite { dir: PathBuf },
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(run::EXIT_INVALID);
        }
    }
    let code = match cli.command {
        Command::Run { config } => {
            let o = run::run_file(&config, cli.seed, &cli.out);
            let line = format!("{} {}: {} ({}/{} assertions)", o.status(), o.name, o.detail, o.passed, o.total);
            if o.code == run::EXIT_OK {
                println!("{line}");
            } else {
                eprintln!("{line}");
            }
            o.code
        }
        Command::Suite { dir } => match suite::run_suite(&dir, cli.seed, &cli.out) {
            Ok(results) => {
                for (p, o) in &results {
                    println!("{:<16} {} [{}/{}] {}", o.status(), p.display(), o.passed, o.total, o.detail);
                }
                println!("{} configs, {} ok", results.len(), results.iter().filter(|(_, o)| o.code == run::EXIT_OK).count());
                if suite::all_ok(&results) {
                    run::EXIT_OK
                } else {
                    run::EXIT_ASSERTION
                }
            }
            Err(e) => {
                eprintln!("error: {}: {e}", dir.display());
                run::EXIT_INVALID
            }
        },
    };
    std::process::exit(code);
}
