use serde::Serialize;
use thiserror::Error;

use crate::Format;

#[derive(Debug, Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Library(#[from] betti::Error),
    #[error("invariant violated: {0}")]
    Violation(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Library(betti::Error::InvariantViolation(_)) | Failure::Violation(_) => 3,
            _ => 2,
        }
    }
}

/// A command's result in every supported rendering.
pub struct Output {
    pub json: serde_json::Value,
    pub csv: Option<String>,
    pub text: String,
    /// Set when a property the theory guarantees failed; printed, then exit 3.
    pub violation: Option<String>,
}

impl Output {
    pub fn new(value: &impl Serialize, text: String) -> Self {
        Output {
            json: serde_json::to_value(value).expect("outputs serialize"),
            csv: None,
            text,
            violation: None,
        }
    }

    pub fn with_csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }

    pub fn violation_if(mut self, failed: bool, what: impl Into<String>) -> Self {
        if failed && self.violation.is_none() {
            self.violation = Some(what.into());
        }
        self
    }

    pub fn render(&self, format: Format) -> Result<String, Failure> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(&self.json).expect("json renders") + "\n"),
            Format::Text => Ok(self.text.clone()),
            Format::Csv => self
                .csv
                .clone()
                .ok_or_else(|| Failure::Input("this command has no csv rendering; use json or text".into())),
        }
    }
}
