//! Error taxonomy for the command line. Two classes, because the exit code
//! contract only distinguishes two kinds of failure: the invocation was
//! wrong, or the run itself broke.

use std::fmt;
use std::io;
use std::path::Path;

/// Everything a command can fail with, split by exit code.
///
/// `Usage` covers bad flags, invalid or inconsistent configuration, and
/// incompatibilities between otherwise valid inputs (a checkpoint trained
/// for a different descriptor size, say). `Runtime` covers failures while
/// executing a well-formed run: I/O, corrupt or unusable file contents,
/// and numeric breakdown.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl fmt::Display) -> Self {
        CliError::Usage(msg.to_string())
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    /// Annotates an I/O failure with the path it happened on; the bare
    /// `io::Error` message rarely says which file was involved.
    pub fn io(path: &Path, err: io::Error) -> Self {
        CliError::Runtime(format!("{}: {err}", path.display()))
    }

    /// Process exit code per the interface contract: 1 for usage and
    /// configuration problems, 2 for runtime failures. 0 is reserved for
    /// success and is never produced here.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}
