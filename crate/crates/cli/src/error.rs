use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error ({context}): {source}")]
    Solver {
        context: String,
        #[source]
        source: jscl_core::Error,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn solver(context: impl Into<String>, source: jscl_core::Error) -> Self {
        Self::Solver {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Solver { .. } | Self::Io { .. } => 3,
        }
    }
}
