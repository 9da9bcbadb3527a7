use thiserror::Error;

use crate::panel::{Period, RegionKey};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unparseable {field} `{value}` at row {row}")]
    Parse {
        row: u64,
        field: &'static str,
        value: String,
    },

    #[error("invalid observation at row {row}: {reason}")]
    InvalidRow { row: u64, reason: String },

    #[error("E exceeds min(F,M) at row {row}")]
    EngagementsExceedSupply { row: u64 },

    #[error("duplicate observation for ({period}, {region}) at row {row}")]
    DuplicateKey {
        period: Period,
        region: RegionKey,
        row: u64,
    },

    #[error("unknown region `{0}`")]
    UnknownRegion(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no local support at (f={f}, m={m}): every kernel weight underflowed")]
    NoLocalSupport { f: f64, m: f64 },

    #[error("anchor {0} not present in series")]
    MissingAnchor(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("lasso did not converge after {sweeps} sweeps (objective {objective:e}, kkt residual {kkt:e})")]
    NonConvergence {
        sweeps: usize,
        objective: f64,
        kkt: f64,
    },

    #[error("undefined elasticity: fitted value {0} is not positive")]
    UndefinedElasticity(f64),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
