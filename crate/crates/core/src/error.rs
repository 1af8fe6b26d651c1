use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error)]
pub enum UwasError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("band index {index} out of range 0..={max}")]
    BandIndex { index: usize, max: usize },

    #[error("sample length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("unsupported array size L={0}; pass explicit positions")]
    UnsupportedArray(usize),

    #[error("array positions {0:?} do not form a complete difference set")]
    IncompleteCoarray(Vec<usize>),

    #[error("no direction of arrival configured for active band {0}")]
    MissingDoa(usize),

    #[error("phase reference too weak for calibration (tone-to-noise ratio {ratio:.2})")]
    CalibrationUnavailable { ratio: f64 },

    #[error("sensing failure: {sources} sources with virtual aperture {aperture}")]
    SensingFailure { sources: usize, aperture: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}

pub type Result<T> = std::result::Result<T, UwasError>;
