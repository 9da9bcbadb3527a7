pub mod estimate;
pub mod report;
pub mod simulate;
pub mod within_area;

use matchfn::Period;

use crate::error::CliError;
use crate::table::Cell;

/// Result of a command that ran to completion.
pub type Outcome = Result<u8, CliError>;

pub(crate) fn parse_period(flag: &str, raw: &str) -> Result<Period, CliError> {
    raw.parse()
        .map_err(|e: matchfn::Error| CliError::flag(flag, e))
}

pub(crate) fn region_cell(region: &Option<String>) -> Cell {
    Cell::opt_text(region.as_deref())
}
