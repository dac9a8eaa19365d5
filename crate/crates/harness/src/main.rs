use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use stateact::config::{BackendConfig, RunConfig};
use stateact::report::{report_dir, write_report};
use stateact::runner::{build_recording_backend, run, run_with_backend, RunOutcome};
use stateact::worldfile;
use stateact_core::textcraft::RecipeBook;

#[derive(Parser)]
#[command(name = "stateact", version, about = "Run and report chain-of-states agent experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvName {
    Household,
    Textcraft,
}

#[derive(Subcommand)]
enum Command {
    /// Run every variant on every world of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Extra attempts per HTTP request after a transport error or 5xx.
        #[arg(long)]
        retries: Option<u32>,
    },
    /// Recompute reports from the traces in a run directory.
    Report { dir: PathBuf },
    /// Run with the HTTP backend while recording every completion.
    ReplayRecord {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        retries: Option<u32>,
    },
    /// Write generated world files.
    GenWorlds {
        #[arg(long)]
        env: EnvName,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "worlds")]
        out: PathBuf,
        /// Recipe book for crafting tasks; the bundled book when absent.
        #[arg(long)]
        recipes: Option<PathBuf>,
    },
}

fn load_config(path: &Path, retries: Option<u32>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?;
    if let (Some(n), BackendConfig::Http(h)) = (retries, &mut cfg.backend) {
        h.retries = n;
    }
    Ok(cfg)
}

fn finish(outcome: RunOutcome) -> ExitCode {
    print!("{}", outcome.report.to_text());
    if outcome.total_failure() {
        eprintln!("every episode ended on a backend error");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Run { config, retries } => {
            let cfg = load_config(&config, retries)?;
            Ok(finish(run(&cfg)?))
        }
        Command::ReplayRecord { config, retries } => {
            let cfg = load_config(&config, retries)?;
            let backend = build_recording_backend(&cfg)?;
            Ok(finish(run_with_backend(&cfg, Some(backend))?))
        }
        Command::Report { dir } => {
            let out = report_dir(&dir)?;
            write_report(&dir, &out)?;
            print!("{}", out.to_text());
            if out.warnings > 0 {
                eprintln!("skipped {} unreadable trace lines", out.warnings);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::GenWorlds { env, count, seed, out, recipes } => {
            let paths = match env {
                EnvName::Household => {
                    let worlds = worldfile::gen_household(count, seed);
                    worldfile::write_all(&out, &worlds, |w| &w.id)?
                }
                EnvName::Textcraft => {
                    let book = match recipes {
                        Some(p) => RecipeBook::parse(&std::fs::read_to_string(&p)?)
                            .map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?,
                        None => stateact_core::assets::bundled_book(),
                    };
                    let tasks = worldfile::gen_textcraft(&book, count, seed)?;
                    worldfile::write_all(&out, &tasks, |t| &t.id)?
                }
            };
            for p in paths {
                println!("{}", p.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
