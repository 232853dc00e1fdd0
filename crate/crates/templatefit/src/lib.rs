//! File formats, toy studies and the command line for
//! [`templatefit_core`].

pub mod cli;
pub mod csv_out;
pub mod io;
pub mod study;

pub use templatefit_core as core;

/// Problems with user input: files, JSON, configuration.
#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Shape(String),
    #[error("{context}: {source}")]
    Model {
        context: String,
        source: templatefit_core::Error,
    },
    #[error("{0}")]
    Config(String),
}
