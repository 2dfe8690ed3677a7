use thiserror::Error;

use crate::chem::SmilesError;
use crate::io::msp::MspError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training error: {0}")]
    Training(String),
    #[error("spectrum error: {0}")]
    Spectrum(String),
    #[error("evaluation error: {0}")]
    Evaluation(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("candidate lookup error: {0}")]
    Candidates(String),
    #[error(transparent)]
    Smiles(#[from] SmilesError),
    #[error(transparent)]
    Msp(#[from] MspError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
