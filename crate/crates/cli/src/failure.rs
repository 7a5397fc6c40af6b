//! Error classification into process exit codes.

use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Usage,
    Numeric,
    Io,
}

impl FailureKind {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureKind::Usage => 1,
            FailureKind::Numeric => 2,
            FailureKind::Io => 3,
        }
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: FailureKind,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn usage(message: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Usage,
        message: message.into(),
    }
}

pub fn io(message: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Io,
        message: message.into(),
    }
}

pub fn numeric(message: impl Into<String>) -> Failure {
    Failure {
        kind: FailureKind::Numeric,
        message: message.into(),
    }
}

impl From<chi2dens::Error> for Failure {
    fn from(e: chi2dens::Error) -> Self {
        let kind = if e.is_numeric() {
            FailureKind::Numeric
        } else if e.is_io() || matches!(e, chi2dens::Error::Parse { .. }) {
            FailureKind::Io
        } else {
            FailureKind::Usage
        };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            kind: FailureKind::Io,
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure {
            kind: FailureKind::Io,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        let kind = if e.is_io() { FailureKind::Io } else { FailureKind::Usage };
        Failure {
            kind,
            message: e.to_string(),
        }
    }
}

/// Machine-readable form printed on stderr.
#[derive(Serialize)]
pub struct FailureReport<'a> {
    pub error: FailureKind,
    pub exit_code: i32,
    pub message: &'a str,
}

impl Failure {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&FailureReport {
            error: self.kind,
            exit_code: self.kind.exit_code(),
            message: &self.message,
        })
        .expect("report serializes")
    }
}
