use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid argument: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] thermsearch::Error),
}

impl CliError {
    /// 2 for anything the user can fix on the command line, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Parse(_) | CliError::Numerical(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Usage(_) => "usage",
            CliError::Numerical(_) => "numerical",
        }
    }
}
