use std::path::Path;

use thiserror::Error;

/// Failure of a subcommand, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Estimation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Estimation(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io(format!("{}: {err}", path.display()))
    }

    pub fn internal(err: impl std::fmt::Display) -> Self {
        CliError::Io(err.to_string())
    }

    pub fn flag(flag: &str, reason: impl std::fmt::Display) -> Self {
        CliError::Validation(format!("invalid value for {flag}: {reason}"))
    }

    /// Classifies a library error; `context` names the file or stage involved.
    pub fn from_core(err: matchfn::Error, context: &str) -> Self {
        use matchfn::Error as E;
        let msg = if context.is_empty() {
            err.to_string()
        } else {
            format!("{context}: {err}")
        };
        match err {
            E::Io(_) => CliError::Io(msg),
            E::Csv(ref e) if e.is_io_error() => CliError::Io(msg),
            E::InvalidParameter { name, reason } => match flag_for(name) {
                Some(flag) => CliError::flag(&flag, reason),
                None => CliError::Estimation(msg),
            },
            E::Csv(_)
            | E::MissingColumn(_)
            | E::Parse { .. }
            | E::InvalidRow { .. }
            | E::EngagementsExceedSupply { .. }
            | E::DuplicateKey { .. }
            | E::UnknownRegion(_)
            | E::Empty(_)
            | E::MissingAnchor(_) => CliError::Validation(msg),
            E::Degenerate(_)
            | E::NoLocalSupport { .. }
            | E::Estimation(_)
            | E::NonConvergence { .. }
            | E::UndefinedElasticity(_) => CliError::Estimation(msg),
        }
    }
}

/// Command-line flag behind a library parameter name; `None` for values
/// computed during estimation rather than supplied by the user.
fn flag_for(param: &str) -> Option<String> {
    match param {
        "design" | "target" | "elasticity inputs" | "a" | "f" | "m" | "p" => None,
        "grid size" => Some("--psi-grid/--lambda-grid".into()),
        "cv folds" | "cv grid" => Some("--cv-folds".into()),
        "period" | "month" => Some("--anchor".into()),
        other => Some(format!("--{}", other.replace(' ', "-"))),
    }
}
