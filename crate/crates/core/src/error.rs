use thiserror::Error;

use crate::arbitrage::ArbitrageReport;

pub type Result<T> = std::result::Result<T, DntError>;

#[derive(Debug, Error)]
pub enum DntError {
    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no market model: {0}")]
    NoMarketModel(String),

    #[error("arbitrage detected ({}): {}", .0.label, .0.explanation)]
    Arbitrage(Box<ArbitrageReport>),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("strike not priced: {0}")]
    Unpriced(String),

    #[error("degenerate measure: {0}")]
    Degenerate(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DntError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DntError::InvalidInput(msg.into())
    }
}
