//! Library side of the `llt` binary: configuration resolution, the
//! experiment pipeline, and the run manifest.

pub mod config;
pub mod manifest;
pub mod pipeline;

use llt::Error;

/// Machine-readable error envelope printed to stderr on failure.
#[derive(Debug, serde::Serialize)]
pub struct ErrorReport {
    pub kind: &'static str,
    pub message: String,
}

impl ErrorReport {
    pub fn from_error(e: &Error) -> ErrorReport {
        let kind = match e {
            Error::Io(_) => "io",
            Error::Parse { .. } | Error::EmptyInput(_) | Error::TooManyRejected { .. } => "parse",
            Error::Format(_) => "format",
            Error::Domain(_)
            | Error::WindowIncomplete(_)
            | Error::Balance(_)
            | Error::Split(_)
            | Error::Synth(_) => "domain",
        };
        ErrorReport {
            kind,
            message: e.to_string(),
        }
    }

    /// Exit code 2 for usage/input problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "io" | "parse" | "usage" => 2,
            _ => 1,
        }
    }

    pub fn usage(message: String) -> ErrorReport {
        ErrorReport {
            kind: "usage",
            message,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"kind\":\"{}\"}}", self.kind))
    }
}
