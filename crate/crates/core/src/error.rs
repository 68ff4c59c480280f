use std::io;

use thiserror::Error;

use crate::brute::BruteError;
use crate::dsl::{DslError, ParseError};
use crate::enumerate::EnumError;
use crate::oracle::{OracleError, TaskError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("hypothesis space is empty")]
    EmptyHypothesisSpace,
    #[error("oracle exhausted after {drawn} examples")]
    OracleExhausted { drawn: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("stopping-function family is empty")]
    EmptyFamily,
    #[error("nesting {0} is beyond the configured maximum")]
    NestingBeyondMax(usize),
    #[error(transparent)]
    Enumeration(#[from] EnumError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Brute(#[from] BruteError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
