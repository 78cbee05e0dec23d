use thiserror::Error;

use crate::bench::BenchError;
use crate::mpc::MpcError;
use crate::params::BundleError;
use crate::pipeline::PipelineError;
use crate::qep::QepError;
use crate::qsim::QsimError;
use crate::ring::RingError;
use crate::tn::TnError;

/// Crate-level error, one variant per subsystem.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ring(#[from] RingError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Tn(#[from] TnError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
    #[error(transparent)]
    Qep(#[from] QepError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
