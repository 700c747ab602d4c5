use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpotifyError {
    #[error("missing environment variable {0}")]
    MissingCredentials(&'static str),

    /// Rejected client credentials or a token the API refused twice.
    #[error("credential error: {0}")]
    Credentials(String),

    #[error("network error after {attempts} attempts: {message}")]
    Network { attempts: usize, message: String },

    #[error("http {status} from {endpoint}: {message}")]
    Http { status: u16, endpoint: String, message: String },

    #[error("rate limited on {endpoint} after {waits} waits")]
    RateLimited { endpoint: String, waits: usize },

    #[error("cannot decode response from {endpoint}: {message}")]
    Decode { endpoint: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Store(#[from] mer_core::Error),
}

pub type Result<T, E = SpotifyError> = std::result::Result<T, E>;
