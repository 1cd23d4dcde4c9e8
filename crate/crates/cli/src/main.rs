//! `pdaccel` command-line harness.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pdaccel::bench::{self, BenchError, ExperimentConfig};
use pdaccel::parallel::Execution;
use pdaccel::solvers::AlgorithmId;

#[derive(Parser)]
#[command(name = "pdaccel", version, about = "Accelerated primal-dual splitting benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured algorithms and write one CSV trace per run.
    Run(RunArgs),
    /// Run and check the contraction envelopes and reduction identities.
    Verify(RunArgs),
    /// Iteration counts across the [rates] sweep against the predicted counts.
    Rates(RunArgs),
    /// Spectral summary of a matrix file ("rows cols" header, then rows).
    Spectra { matrix: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Base seed (overrides problem.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration budget (overrides run.max_iters).
    #[arg(long)]
    max_iters: Option<u64>,
    /// Output directory (overrides run.out).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated algorithm list, e.g. ACV1,APDTR2.
    #[arg(long, value_delimiter = ',')]
    algs: Option<Vec<String>>,
    /// Run the batch on one thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, BenchError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.problem.seed = seed;
        }
        if let Some(n) = self.max_iters {
            cfg.run.max_iters = n;
        }
        if let Some(out) = &self.out {
            cfg.run.out = Some(out.display().to_string());
        }
        if let Some(list) = &self.algs {
            cfg.run.algorithms = list
                .iter()
                .map(|s| s.parse::<AlgorithmId>())
                .collect::<Result<_, _>>()
                .map_err(BenchError::Config)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(cfg.run.out.as_deref().unwrap_or("out"))
}

fn write_file(path: &Path, text: &str) -> Result<(), BenchError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

/// Exit code 0 on success, 1 when a check failed.
fn dispatch(cli: Cli) -> Result<u8, BenchError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config()?;
            let dir = out_dir(&cfg);
            let traces = bench::cmd_run(&cfg, args.execution(), Some(&dir))?;
            for t in &traces {
                let m = &t.meta;
                let env = m.envelope_violations.map_or("-".to_string(), |v| v.to_string());
                println!(
                    "{} seed {} iters {} final kkt {:.3e} envelope violations {env}{}  -> {}",
                    m.algorithm,
                    m.seed,
                    m.iterations,
                    m.final_kkt,
                    if m.no_linear_rate { " (no linear rate)" } else { "" },
                    dir.join(format!("{}.csv", t.stem())).display()
                );
            }
            Ok(0)
        }
        Command::Verify(args) => {
            let cfg = args.config()?;
            let out = args.out.clone().or_else(|| cfg.run.out.as_ref().map(PathBuf::from));
            let report = bench::cmd_verify(&cfg, args.execution(), out.as_deref())?;
            print!("{}", report.render());
            match report.first_failure() {
                None => Ok(0),
                Some(msg) => {
                    eprintln!("verify failed: {msg}");
                    Ok(1)
                }
            }
        }
        Command::Rates(args) => {
            let cfg = args.config()?;
            let report = bench::cmd_rates(&cfg, args.execution())?;
            let path = out_dir(&cfg).join("rates.csv");
            write_file(&path, &report.to_csv()?)?;
            print!("{}", report.render());
            println!("csv: {}", path.display());
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Spectra { matrix } => {
            print!("{}", bench::cmd_spectra(&matrix)?.render());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
