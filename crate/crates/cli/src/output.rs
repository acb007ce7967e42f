//! Report envelopes, CSV documents, and atomic file writing.

use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::errors::CliError;

/// Wrapper around every JSON report: tool identity, the verb that produced
/// it, and a content hash of the input config.
#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub tool: ToolInfo,
    pub command: String,
    pub config_sha256: String,
    pub report: T,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl<T: Serialize> Envelope<T> {
    pub fn new(command: impl Into<String>, config_sha256: impl Into<String>, report: T) -> Self {
        Envelope {
            tool: ToolInfo {
                name: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
            },
            command: command.into(),
            config_sha256: config_sha256.into(),
            report,
        }
    }

    pub fn to_json_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)
            .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

/// A CSV report: leading `#` metadata comments, a header row, and string
/// rows already formatted for emission.
#[derive(Debug, Default)]
pub struct CsvDoc {
    pub comments: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn comment(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.comments.push((key.into(), value.into()));
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut buffer = Vec::new();
        for (key, value) in &self.comments {
            writeln!(buffer, "# {key}: {value}")
                .map_err(|e| CliError::Io(format!("cannot write CSV comments: {e}")))?;
        }
        let mut writer = csv::Writer::from_writer(buffer);
        writer
            .write_record(&self.header)
            .and_then(|()| {
                self.rows
                    .iter()
                    .try_for_each(|row| writer.write_record(row))
            })
            .map_err(|e| CliError::Io(format!("cannot write CSV: {e}")))?;
        writer
            .into_inner()
            .map_err(|e| CliError::Io(format!("cannot flush CSV: {e}")))
    }
}

/// Formats a float at 12 significant digits with a `.` decimal separator.
pub fn sig12(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let rounded: f64 = format!("{value:.11e}")
        .parse()
        .expect("scientific notation round-trips");
    format!("{rounded}")
}

/// Where outputs go: a directory for atomic file writes, or stdout.
#[derive(Debug)]
pub enum OutputTarget {
    Directory(PathBuf),
    Stdout,
}

impl OutputTarget {
    /// Writes one named output, returning its path for directory targets.
    ///
    /// File writes go through a temporary file in the target directory and a
    /// final rename, so concurrent readers never observe partial output.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<Option<PathBuf>, CliError> {
        match self {
            OutputTarget::Directory(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| {
                    CliError::Io(format!("cannot create {}: {e}", dir.display()))
                })?;
                let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| {
                    CliError::Io(format!("cannot create temp file in {}: {e}", dir.display()))
                })?;
                tmp.write_all(bytes)
                    .map_err(|e| CliError::Io(format!("cannot write output: {e}")))?;
                let path = dir.join(name);
                tmp.persist(&path)
                    .map_err(|e| CliError::Io(format!("cannot rename into {}: {e}", path.display())))?;
                Ok(Some(path))
            }
            OutputTarget::Stdout => {
                std::io::stdout()
                    .write_all(bytes)
                    .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}")))?;
                Ok(None)
            }
        }
    }
}
