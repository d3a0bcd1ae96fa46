use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Model(wcs_core::Error),
}

impl From<wcs_core::Error> for LabError {
    fn from(e: wcs_core::Error) -> Self {
        match e {
            wcs_core::Error::InvalidConfig { field, reason } => LabError::Config {
                field: field.to_string(),
                reason: reason.to_string(),
            },
            other => LabError::Model(other),
        }
    }
}

impl LabError {
    /// 2 for bad input, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config { .. } | LabError::Usage(_) => 2,
            LabError::Io { .. } | LabError::Model(_) => 1,
        }
    }
}
