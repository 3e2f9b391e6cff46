use std::io;
use std::path::{Path, PathBuf};

/// Errors from file handling, manifests and the pipeline commands.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] vulnlab_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("missing input {}: {hint}", path.display())]
    Missing { path: PathBuf, hint: String },
    #[error("{}:{line}: {message}", path.display())]
    Record { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("manifest field `{field}`: {message}")]
    Manifest { field: String, message: String },
    #[error("{what} fingerprint mismatch: expected {expected}, found {found}")]
    Fingerprint { what: String, expected: String, found: String },
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        let path = path.as_ref().to_path_buf();
        if source.kind() == io::ErrorKind::NotFound {
            Error::Missing { path, hint: "no such file or directory".into() }
        } else {
            Error::Io { path, source }
        }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Error::Format { path: path.as_ref().to_path_buf(), message: message.into() }
    }

    pub fn manifest(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Manifest { field: field.into(), message: message.into() }
    }

    /// `true` for problems with the inputs (bad files, configs, mismatched
    /// artifacts); `false` for failures while running.
    pub fn is_validation(&self) -> bool {
        use vulnlab_core::Error as C;
        !matches!(self, Error::Io { .. } | Error::Core(C::NonFiniteLoss { .. } | C::NonFinite(_) | C::Encoder(_)))
    }

    /// Process exit status: 1 for validation errors, 2 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        if self.is_validation() {
            1
        } else {
            2
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
