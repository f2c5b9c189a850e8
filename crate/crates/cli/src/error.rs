use std::path::PathBuf;

use thiserror::Error;
use trlkit_core::covariates::CovariateError;
use trlkit_core::data_model::DataError;
use trlkit_core::glmm::GlmmError;
use trlkit_core::resilience::ResilienceError;
use trlkit_core::synth::SynthError;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INPUT: i32 = 4;
    pub const COVARIATE: i32 = 5;
    pub const NO_CONVERGENCE: i32 = 6;
    pub const SINGLE_GROUP: i32 = 7;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Resilience(#[from] ResilienceError),
    #[error(transparent)]
    Covariate(#[from] CovariateError),
    #[error(transparent)]
    Model(#[from] GlmmError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("only one county in the model rows; fitted a GLM without random intercepts")]
    SingleGroup,
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Data(DataError::Io { .. } | DataError::MissingFile { .. }) => exit::IO,
            CliError::Data(_) => exit::INPUT,
            CliError::Resilience(ResilienceError::InvalidThresholds(_)) => exit::USAGE,
            CliError::Resilience(_) => exit::INPUT,
            CliError::Covariate(_) => exit::COVARIATE,
            CliError::Model(e) => match e {
                GlmmError::NoConvergence { .. } => exit::NO_CONVERGENCE,
                GlmmError::NonPositiveResponse { .. } => exit::INPUT,
                GlmmError::Covariate(_)
                | GlmmError::RankDeficientDesign { .. }
                | GlmmError::TooFewObservations { .. } => exit::COVARIATE,
                _ => exit::INTERNAL,
            },
            CliError::Synth(SynthError::BadParams(_)) => exit::USAGE,
            CliError::Synth(_) => exit::INTERNAL,
            CliError::SingleGroup => exit::SINGLE_GROUP,
            CliError::Internal(_) => exit::INTERNAL,
        }
    }
}
