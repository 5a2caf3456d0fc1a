use thiserror::Error;

pub type Result<T, E = ServiceError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("not found: {0}")]
    NotFound(String),
    /// The request is well formed but arrives out of protocol order.
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("replay diverged at event {index}: {reason}")]
    ReplayMismatch { index: usize, reason: String },
    #[error(transparent)]
    Core(#[from] ardent_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        use ardent_core::Error as C;
        match self {
            ServiceError::NotFound(_) => 404,
            ServiceError::Protocol(_) | ServiceError::Core(C::ProtocolViolation(_)) => 409,
            ServiceError::InvalidRequest(_) | ServiceError::Core(C::OutOfRange { .. }) => 400,
            _ => 500,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.status() {
            404 => "not-found",
            409 => "protocol-violation",
            400 => "invalid-request",
            _ => "internal",
        }
    }
}
