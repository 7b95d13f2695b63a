use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Precondition(String),
    #[error("{0}")]
    Failed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 pass, 1 usage or config, 2 out of region or other precondition, 3 failed verification.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Precondition(_) => 2,
            CliError::Failed(_) => 3,
        }
    }
}

impl From<twophase::Error> for CliError {
    fn from(e: twophase::Error) -> Self {
        use twophase::Error::*;
        match e {
            InvalidParams(_) | NotPowerOfTwo(_) | Dimension(_) | Mismatch(_) => CliError::Usage(e.to_string()),
            ZeroLambda | InvalidDelta(_) | OutOfRegion(_) | BranchDefect { .. } | ZeroMode | SmallFrequency(_) | IllConditioned { .. } | Smallness(_) | Wraparound(_) | ZeroDataNorm => {
                CliError::Precondition(e.to_string())
            }
            Singular(_) | Domain(_) | NonFinite(_) | StepUnderflow(_) | Quadrature(_) => CliError::Failed(e.to_string()),
        }
    }
}
