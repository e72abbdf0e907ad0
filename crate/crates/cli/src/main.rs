use backhaul_cli::experiment::TRIAL_HEADER;
use backhaul_cli::{emit_plot_data, exit_code, run_experiment, ExperimentConfig, Format, RunOptions};
use backhaul_cli::{EXIT_CONFIG, EXIT_FAILURE, EXIT_OK};
use clap::Parser;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run a backhaul rate experiment and write its result table.
#[derive(Debug, Parser)]
#[command(name = "backhaul", version)]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Base seed; overrides BACKHAUL_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the trial-0 network (or routes) of every grid point to stderr.
    #[arg(long)]
    dump_network: bool,
    /// Print the relay schedule of every (L, K) pair to stderr.
    #[arg(long)]
    dump_schedule: bool,
    /// Debug logging and per-trial, per-stage rates on stderr.
    #[arg(long)]
    verbose: bool,
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: Format,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: backhaul_cli::table::TableError| e.to_string())
}

fn run(cli: Cli) -> i32 {
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            log::error!("{e}");
            return EXIT_CONFIG;
        }
    };
    if let Ok(text) = std::env::var("BACKHAUL_SEED") {
        match text.trim().parse() {
            Ok(seed) => cfg.seed = seed,
            Err(_) => {
                log::error!("BACKHAUL_SEED `{text}` is not an unsigned 64-bit integer");
                return EXIT_CONFIG;
            }
        }
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.jobs == Some(0) {
        log::error!("--jobs must be at least 1");
        return EXIT_CONFIG;
    }
    let opts = RunOptions {
        jobs: cli.jobs,
        verbose: cli.verbose,
        dump_network: cli.dump_network,
        dump_schedule: cli.dump_schedule,
    };
    log::info!("running {} with seed {}", cfg.experiment, cfg.seed);
    let outcome = match run_experiment(&cfg, &opts) {
        Ok(o) => o,
        Err(e) => {
            log::error!("{e}");
            return exit_code(&e);
        }
    };
    let stderr = io::stderr();
    let mut err = stderr.lock();
    for dump in &outcome.dumps {
        let _ = writeln!(err, "{dump}");
    }
    if cli.verbose && !outcome.trials.is_empty() {
        let _ = writeln!(err, "{TRIAL_HEADER}");
        for t in &outcome.trials {
            let _ = writeln!(err, "{}", t.csv_line());
        }
    }
    let written = match &cfg.output {
        Some(path) => File::create(path)
            .map_err(|e| format!("cannot create {}: {e}", path.display()))
            .and_then(|f| emit_plot_data(&outcome.table, cli.format, BufWriter::new(f)).map_err(|e| format!("{}: {e}", path.display()))),
        None => emit_plot_data(&outcome.table, cli.format, io::stdout().lock()).map_err(|e| e.to_string()),
    };
    match written {
        Ok(n) => {
            log::info!("{n} series written");
            EXIT_OK
        }
        Err(e) => {
            log::error!("{e}");
            EXIT_FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    ExitCode::from(run(cli) as u8)
}
