use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ksf::harness::config::{parse_config, ExperimentConfig, ExperimentKind};
use ksf::harness::{experiments, output};
use ksf::{KsfError, RunStatus};

#[derive(Parser)]
#[command(name = "ksf", version, about = "Forced Keller–Segel solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `output_dir` from the config file.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `seed` from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and paired runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one trajectory and write diagnostics and snapshots.
    Run { config: PathBuf },
    /// Critical-mass sweep over `sweep.mass_factors`.
    Sweep { config: PathBuf },
    /// Small-data decay experiment.
    Smalldata { config: PathBuf },
    /// Randomized functional-inequality audit.
    VerifyIneq { config: PathBuf },
    /// Heat-semigroup identities and convolution bound.
    VerifySemigroup { config: PathBuf },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK: u8 = 3;

fn is_config_error(e: &KsfError) -> bool {
    matches!(
        e,
        KsfError::Config { .. } | KsfError::Parameter { .. } | KsfError::Grid(_) | KsfError::Io { .. }
    )
}

fn load(path: &Path, kind: ExperimentKind, cli: &Cli) -> Result<ExperimentConfig, KsfError> {
    let mut cfg = parse_config(path)?;
    cfg.kind = kind;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs the experiment; `Ok(false)` means it ran but a check failed.
fn execute(cfg: &ExperimentConfig) -> Result<bool, KsfError> {
    let dir = &cfg.output_dir;
    match cfg.kind {
        ExperimentKind::Run => {
            let out = experiments::run_experiment(cfg)?;
            output::write_trajectory(dir, &out.trajectory)?;
            match &out.trajectory.status {
                RunStatus::Completed => println!("completed at t = {}", out.trajectory.final_state.t),
                RunStatus::Blowup { t_detect, reason } => println!("blow-up detected at t = {t_detect}: {reason:?}"),
            }
            println!("steps: {}", out.trajectory.dt_history.len());
            for e in &out.ledger.entries {
                println!("{e}");
            }
            Ok(true)
        }
        ExperimentKind::MassSweep => {
            let rows = experiments::mass_sweep(cfg)?;
            output::write_text(&dir.join("sweep.csv"), &experiments::sweep_csv(&rows))?;
            print!("{}", experiments::sweep_csv(&rows));
            Ok(rows.iter().all(|r| r.error.is_none()))
        }
        ExperimentKind::SmallData => {
            let report = experiments::small_data_experiment(cfg)?;
            output::write_text(&dir.join("smalldata.csv"), &report.summary_csv())?;
            output::write_text(&dir.join("smalldata_series.csv"), &report.series_csv())?;
            print!("{}", report.summary_csv());
            if let Some(q) = report.c_u_ratio() {
                println!("C_u(eps)/C_u(eps/2) = {q}");
            }
            Ok(report.passed())
        }
        ExperimentKind::VerifyInequalities => {
            let suite = experiments::verify_inequalities(cfg)?;
            output::write_text(&dir.join("inequalities.csv"), &suite.csv())?;
            output::write_text(&dir.join("refinement.csv"), &suite.refinement_csv())?;
            print!("{}", suite.summary());
            Ok(suite.passed())
        }
        ExperimentKind::VerifySemigroup => {
            let checks = experiments::verify_semigroup(cfg)?;
            output::write_text(&dir.join("semigroup.csv"), &experiments::checks_csv(&checks))?;
            for c in &checks {
                let verdict = if c.pass { "PASS" } else { "FAIL" };
                println!("{verdict} {:<32} value={:e} limit={:e}", c.name, c.value, c.limit);
            }
            Ok(checks.iter().all(|c| c.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (path, kind) = match &cli.command {
        Command::Run { config } => (config, ExperimentKind::Run),
        Command::Sweep { config } => (config, ExperimentKind::MassSweep),
        Command::Smalldata { config } => (config, ExperimentKind::SmallData),
        Command::VerifyIneq { config } => (config, ExperimentKind::VerifyInequalities),
        Command::VerifySemigroup { config } => (config, ExperimentKind::VerifySemigroup),
    };
    let cfg = match load(path, kind, &cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match execute(&cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("one or more checks failed");
            ExitCode::from(EXIT_CHECK)
        }
        Err(e) if is_config_error(&e) => {
            eprintln!("config error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
