use std::path::Path;
use std::process::ExitCode;

use serde_json::json;

use readout_core::config::FieldError;
use readout_core::Error;

/// A failed run: machine-readable error plus process exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
    pub details: Vec<FieldError>,
    pub exit: u8,
}

impl Failure {
    pub fn usage(message: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            code: "usage",
            message: message.into(),
            field: field.map(str::to_string),
            details: vec![],
            exit: 2,
        }
    }

    pub fn invalid_config(errors: Vec<FieldError>) -> Self {
        let message = errors
            .iter()
            .map(|e| format!("{}: {}", e.field, e.message))
            .collect::<Vec<_>>()
            .join("; ");
        Self {
            code: "invalid_config",
            message,
            field: errors.first().map(|e| e.field.clone()),
            details: errors,
            exit: 2,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    }

    pub fn report(&self) -> ExitCode {
        let mut v = json!({ "code": self.code, "message": self.message });
        if let Some(f) = &self.field {
            v["field"] = json!(f);
        }
        if !self.details.is_empty() {
            v["errors"] = json!(self.details);
        }
        println!("{}", json!({ "error": v }));
        ExitCode::from(self.exit)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        let (code, field, exit) = match &e {
            Error::Config { field, .. } => ("invalid_config", Some(field.clone()), 2),
            Error::NotCompletelyPositive { .. } => {
                ("invalid_config", Some("qec.coherence.t2".into()), 2)
            }
            Error::Probability { name, .. } => ("invalid_config", Some(name.clone()), 2),
            Error::Missing(_) => ("missing_artifact", None, 3),
            Error::Corrupt { .. } | Error::Version { .. } => ("corrupt_artifact", None, 1),
            _ => ("runtime", None, 1),
        };
        Self {
            code,
            message,
            field,
            details: vec![],
            exit,
        }
    }
}

/// Help and version requests exit 0; every other parse failure prints the
/// usage text on stderr and the JSON error on stdout with exit 2.
pub fn from_clap(e: clap::Error) -> ExitCode {
    use clap::error::ErrorKind;
    if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
        let _ = e.print();
        return ExitCode::SUCCESS;
    }
    eprintln!("{}", e.render());
    let first = e
        .to_string()
        .lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches("error: ")
        .to_string();
    Failure::usage(first, None).report()
}
