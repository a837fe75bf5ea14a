//! CLI error taxonomy with stable exit codes and a machine-parsable
//! one-line diagnostic format.

use mimo_capacity::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrKind {
    /// Config file unreadable or not valid TOML / schema (exit 2).
    Parse,
    /// Config parsed but describes an invalid scenario (exit 3).
    Validation,
    /// A solver exhausted its budget without certifying (exit 4).
    NonConvergence,
    /// Internal numerical failure: non-finite results, factorization
    /// breakdown (exit 5).
    Numerical,
}

impl ErrKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrKind::Parse => 2,
            ErrKind::Validation => 3,
            ErrKind::NonConvergence => 4,
            ErrKind::Numerical => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrKind::Parse => "parse",
            ErrKind::Validation => "validation",
            ErrKind::NonConvergence => "non-convergence",
            ErrKind::Numerical => "numerical",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrKind,
    pub msg: String,
}

impl CliError {
    pub fn new(kind: ErrKind, msg: impl Into<String>) -> Self {
        Self { kind, msg: msg.into() }
    }

    /// Single diagnostic line: `error kind=<kind> msg="<reason>"`.
    pub fn diagnostic(&self) -> String {
        format!("error kind={} msg={:?}", self.kind.name(), self.msg)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.diagnostic())
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = match &e {
            CoreError::DimMismatch(_) | CoreError::Invalid(_) | CoreError::ZeroChannel => {
                ErrKind::Validation
            }
            CoreError::Factorization(_) | CoreError::Numerical(_) => ErrKind::Numerical,
        };
        CliError::new(kind, e.to_string())
    }
}
