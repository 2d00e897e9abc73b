use std::path::PathBuf;

use crate::config::Violation;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported maxval {0} (only 8-bit images are supported)")]
    UnsupportedMaxval(u32),

    #[error("truncated payload: expected {expected} samples, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("invalid pixel value {value} (maxval {maxval})")]
    InvalidPixel { value: u32, maxval: u32 },

    #[error("unsupported png: {0}")]
    UnsupportedPng(String),

    #[error("png decode: {0}")]
    PngDecode(#[from] png::DecodingError),

    #[error("png encode: {0}")]
    PngEncode(#[from] png::EncodingError),

    #[error("unknown image format in {0}")]
    UnknownFormat(PathBuf),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration:\n{}", format_violations(.0))]
    Config(Vec<Violation>),

    #[error("key file: {0}")]
    KeyParse(String),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("missing input files:\n{}", format_paths(.0))]
    MissingInputs(Vec<PathBuf>),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn format_paths(v: &[PathBuf]) -> String {
    v.iter()
        .map(|p| format!("  - {}", p.display()))
        .collect::<Vec<_>>()
        .join("\n")
}
