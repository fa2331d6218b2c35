use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage, used to name the failing step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Formal,
    Profile,
    Scheme,
    Interp,
    Verify,
    Output,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Formal => "formal",
            Stage::Profile => "profile",
            Stage::Scheme => "scheme",
            Stage::Interp => "interp",
            Stage::Verify => "verify",
            Stage::Output => "output",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Syntax errors, unknown keys and type mismatches; the message carries
    /// the line and column.
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("invalid value for `{field}`: {source}")]
    Field {
        field: String,
        #[source]
        source: nls_core::Error,
    },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: nls_core::Error,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("series `{selector}` not found; available: {}", available.join(", "))]
    MissingSeries {
        selector: String,
        available: Vec<String>,
    },
}

impl CliError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
