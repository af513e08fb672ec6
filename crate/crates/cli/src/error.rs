use std::fmt;

use rauzy_spectra::Error;

/// Failures of the driver, each mapped to a process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Stage { stage: &'static str, source: Error },
    Io { path: String, source: std::io::Error },
    Artifact(String),
}

impl CliError {
    /// `2` config, `3` numerical degeneracy, `4` insufficient data, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } if source.is_degeneracy() => 3,
            CliError::Stage { source: Error::InsufficientData(_), .. } => 4,
            _ => 1,
        }
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            CliError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Stage { stage, source } => write!(f, "stage {stage} failed: {source}"),
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Artifact(m) => write!(f, "artifact error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Attaches a stage name to library errors.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T> StageContext<T> for rauzy_spectra::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Stage { stage, source })
    }
}
