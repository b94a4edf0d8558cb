use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", .path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", .path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", .path.display())]
    Toml {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("{}: {message}", .path.display())]
    Schema { path: PathBuf, message: String },
    #[error("node {id} from {} has no row in {}", .found_in.display(), .missing_from.display())]
    OrphanNode {
        id: u64,
        found_in: PathBuf,
        missing_from: PathBuf,
    },
    #[error("no nodes remain after ingestion")]
    EmptyPanel,
    #[error("checkpoint {} was written for a different configuration", .path.display())]
    CheckpointMismatch { path: PathBuf },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] netdiff_core::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Whether the error stems from bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        use netdiff_core::Error as C;
        match self {
            Error::Csv { .. }
            | Error::Json { .. }
            | Error::Toml { .. }
            | Error::Schema { .. }
            | Error::OrphanNode { .. }
            | Error::EmptyPanel
            | Error::CheckpointMismatch { .. }
            | Error::Invalid(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Core(e) => matches!(
                e,
                C::IndexOutOfRange { .. }
                    | C::SelfLoop { .. }
                    | C::InvalidProbability { .. }
                    | C::InvalidSize { .. }
                    | C::LengthMismatch { .. }
                    | C::DimensionMismatch { .. }
                    | C::NonFinite
                    | C::InvalidAlpha { .. }
                    | C::InvalidArgument(_)
            ),
        }
    }
}
