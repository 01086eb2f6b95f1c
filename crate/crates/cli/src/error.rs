use std::fmt;

/// Process exit codes.
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_REGIME: u8 = 3;
pub const EXIT_VIOLATION: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    pub fn regime(message: impl Into<String>) -> Self {
        Self { code: EXIT_REGIME, message: message.into() }
    }

    pub fn violation(message: impl Into<String>) -> Self {
        Self { code: EXIT_VIOLATION, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<roughnet::Error> for CliError {
    fn from(e: roughnet::Error) -> Self {
        use roughnet::Error::*;
        match e {
            WrongRegime { .. } | NoDerivativeBounds(_) | Hypothesis { .. } => CliError::regime(e.to_string()),
            _ => CliError::input(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
