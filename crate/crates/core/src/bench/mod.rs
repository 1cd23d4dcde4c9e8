//! Benchmark harness: generators, configuration, trace files and the
//! `run` / `verify` / `rates` / `spectra` commands.

pub mod commands;
pub mod config;
pub mod generate;
pub mod trace;

pub use commands::{
    build_instances, cmd_rates, cmd_run, cmd_spectra, cmd_verify, reduction_suite, resolve_steps, Instance,
    RatesReport, ReductionCheck, ResolvedSteps, VerifyReport,
};
pub use config::ExperimentConfig;

use thiserror::Error;

use crate::linops::LinopsError;
use crate::lyapunov::LyapunovError;
use crate::solvers::{AlgorithmId, SolverError};
use crate::tuning::TuningError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("generator error: {0}")]
    Generator(String),
    #[error("refusing to run {alg}: {source}")]
    Infeasible {
        alg: AlgorithmId,
        #[source]
        source: TuningError,
    },
    #[error("{alg} (seed {seed}): {source}")]
    Solver {
        alg: AlgorithmId,
        seed: u64,
        #[source]
        source: SolverError,
    },
    #[error("reference solution (seed {seed}): {source}")]
    Reference {
        seed: u64,
        #[source]
        source: LyapunovError,
    },
    #[error(transparent)]
    Linops(#[from] LinopsError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl BenchError {
    /// 2 for errors in the inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_)
            | BenchError::Generator(_)
            | BenchError::Infeasible { .. }
            | BenchError::Linops(_)
            | BenchError::Io(_) => 2,
            BenchError::Solver { .. } | BenchError::Reference { .. } => 1,
        }
    }
}
