use std::fmt;
use std::io::ErrorKind;
use std::path::Path;

/// Exit code for missing inputs and invalid invocations.
pub const EXIT_USAGE: u8 = 2;
/// Exit code for failures inside a pipeline stage.
pub const EXIT_STAGE: u8 = 1;

/// A stage-labelled error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub stage: String,
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &str, message: impl Into<String>) -> Self {
        Failure {
            stage: stage.to_owned(),
            code: EXIT_STAGE,
            message: message.into(),
        }
    }

    pub fn usage(stage: &str, message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            ..Failure::new(stage, message)
        }
    }

    pub fn io(stage: &str, path: &Path, err: &std::io::Error) -> Self {
        let message = format!("{}: {err}", path.display());
        if err.kind() == ErrorKind::NotFound {
            Failure::usage(stage, message)
        } else {
            Failure::new(stage, message)
        }
    }

    /// Wraps a library error; a missing file keeps the usage exit code.
    pub fn lib(stage: &str, err: nlskit::Error) -> Self {
        match &err {
            nlskit::Error::Io { path, source } => Failure::io(stage, path, source),
            _ => Failure::new(stage, err.to_string()),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error [{}]: {}", self.stage, self.message)
    }
}

/// Shorthand for `map_err(|e| Failure::lib(stage, e))`.
pub trait StageExt<T> {
    fn stage(self, stage: &str) -> Result<T, Failure>;
}

impl<T> StageExt<T> for nlskit::Result<T> {
    fn stage(self, stage: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::lib(stage, e))
    }
}

/// Fails with the usage exit code unless `path` exists.
pub fn require(stage: &str, what: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        None => Err(Failure::usage(stage, format!("no {what} given"))),
        Some(p) if !p.exists() => Err(Failure::usage(stage, format!("{what} not found: {}", p.display()))),
        Some(_) => Ok(()),
    }
}
