use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite sample encountered at flat index {0}")]
    NonFinite(usize),

    #[error("dilate 2^{scale} * diam(S) = {reach} exceeds box guard; side length >= {required} required")]
    DilateTooLarge {
        scale: i32,
        reach: f64,
        required: f64,
    },

    #[error("frequency band {band} not representable on a grid with Nyquist index {nyquist}")]
    BandOutsideNyquist { band: i64, nyquist: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed rational '{text}' at {position}")]
    MalformedRational { text: String, position: String },
}

pub type Result<T> = std::result::Result<T, Error>;
