use std::path::PathBuf;

use nmqsd_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{0}")]
    Numerical(#[from] CoreError),

    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("malformed table file {}: {msg}", path.display())]
    TableFormat { path: PathBuf, msg: String },

    #[error("run produced no results")]
    Empty,
}

pub type RunResult<T> = Result<T, RunError>;

impl RunError {
    pub fn config(msg: impl Into<String>) -> Self {
        RunError::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        RunError::Io { path: path.into(), source }
    }

    /// Process exit status: 1 configuration, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Empty => 1,
            RunError::Numerical(e) => core_exit_code(e),
            RunError::Io { .. } | RunError::TableFormat { .. } => 3,
        }
    }
}

fn core_exit_code(e: &CoreError) -> i32 {
    match e {
        CoreError::InvalidParameter(_) | CoreError::Grid(_) | CoreError::BasisIndex(_) => 1,
        CoreError::Trajectory { source, .. } => core_exit_code(source),
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::config("x").exit_code(), 1);
        assert_eq!(RunError::Empty.exit_code(), 1);
        assert_eq!(RunError::io("a", std::io::Error::other("x")).exit_code(), 3);
        assert_eq!(RunError::Numerical(CoreError::Blowup { t: 1.0, s: None }).exit_code(), 2);
        assert_eq!(RunError::Numerical(CoreError::Grid("x".into())).exit_code(), 1);
        let nested = CoreError::Trajectory { stream: 3, source: Box::new(CoreError::Blowup { t: 0.5, s: None }) };
        assert_eq!(RunError::Numerical(nested).exit_code(), 2);
    }
}
