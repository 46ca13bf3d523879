use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] slowproj::Error),
    #[error("bad model: {0}")]
    BadModel(String),
    #[error("bad range: {0}")]
    BadRange(String),
    #[error("bad initial condition: {0}")]
    BadInitialCondition(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
