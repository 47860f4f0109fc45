//! File formats, command-line front end and simulation harness for
//! [`hdfe_core`].

pub mod bench;
pub mod estimate;
pub mod io;
pub mod report;
pub mod restrict;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("column `{0}` not found")]
    MissingColumn(String),
    #[error("column `{column}`, row {row}: cannot parse `{value}` as a number")]
    Parse { column: String, row: usize, value: String },
    #[error("restriction: {0}")]
    Restriction(String),
    #[error(transparent)]
    Model(#[from] hdfe_core::Error),
    #[error("{0}")]
    Invalid(String),
}
