use rmc_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("all {0} recoveries diverged")]
    AllDiverged(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(Error::Config(_)) => 2,
            CliError::Core(
                Error::Io(_)
                | Error::MalformedHeader(_)
                | Error::TruncatedPayload { .. }
                | Error::TrailingData { .. },
            ) => 3,
            CliError::AllDiverged(_) => 4,
            CliError::Core(_) => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
