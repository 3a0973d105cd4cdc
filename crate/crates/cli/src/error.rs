use thiserror::Error;

/// A failed command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, configuration or input data.
    #[error("{0}")]
    Usage(String),
    /// The numerics failed on valid input.
    #[error("{0}")]
    Numerical(String),
    /// Writing outputs failed.
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Output(_) => 1,
        }
    }
}

impl From<calpit::Error> for CliError {
    fn from(e: calpit::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

macro_rules! from_library_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                calpit::Error::from(e).into()
            }
        })*
    };
}

from_library_error!(
    calpit::calibrate::CalibrateError,
    calpit::grid::GridError,
    calpit::diagnose::DiagnoseError,
    calpit::synth::SynthError,
    calpit::bench::BenchError
);

pub type CliResult<T> = Result<T, CliError>;
