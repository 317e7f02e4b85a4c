//! Output headers, sinks and the error record written on stderr.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};
use thiserror::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column layouts, shared by `--help` and the writers.
pub const CURVE_COLUMNS: &str = "abscissa,value,multiplier,gap";
pub const BOUNDS_COLUMNS: &str =
    "parameter_kind,parameter,transport_value,integral_value,ratio,gaps";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    UnknownCommand(String),
    #[error("{0}")]
    BadFlag(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    BadMeasure { path: String, message: String },
    #[error(transparent)]
    Core(#[from] rdot_core::Error),
}

impl CliError {
    pub fn kind(&self) -> String {
        match self {
            CliError::UnknownCommand(_) => "UnknownCommand".into(),
            CliError::BadFlag(_) => "BadFlag".into(),
            CliError::Io { .. } => "IoError".into(),
            CliError::BadMeasure { .. } => "BadMeasure".into(),
            // variant name of the core error
            CliError::Core(e) => format!("{e:?}")
                .chars()
                .take_while(|c| c.is_ascii_alphanumeric())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "error": self.kind(), "message": self.to_string() })
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Provenance embedded in every artifact: tool version, the arguments after
/// the program name, and the seed.
#[derive(Debug, Clone)]
pub struct Header {
    pub args: Vec<String>,
    pub seed: u64,
}

impl Header {
    pub fn to_json(&self) -> Value {
        json!({ "tool": "rdot", "version": VERSION, "args": self.args, "seed": self.seed })
    }
}

pub struct Sink {
    path: Option<PathBuf>,
}

impl Sink {
    pub fn new(path: Option<PathBuf>) -> Self {
        Sink { path }
    }

    fn write(&self, text: &str) -> CliResult<()> {
        match &self.path {
            Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
                path: p.clone(),
                source,
            }),
            None => io::stdout()
                .write_all(text.as_bytes())
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                }),
        }
    }

    /// `{"header": ..., <payload fields>}`, pretty-printed.
    pub fn json(&self, header: &Header, payload: Value) -> CliResult<()> {
        let mut obj = Map::new();
        obj.insert("header".into(), header.to_json());
        match payload {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("result".into(), other);
            }
        }
        let mut text =
            serde_json::to_string_pretty(&Value::Object(obj)).expect("json values serialize");
        text.push('\n');
        self.write(&text)
    }

    /// One `# {header json}` comment line, the column row, then `rows`.
    pub fn csv(&self, header: &Header, columns: &str, rows: &[Vec<String>]) -> CliResult<()> {
        let mut text = format!("# {}\n{columns}\n", header.to_json());
        for r in rows {
            text.push_str(&r.join(","));
            text.push('\n');
        }
        self.write(&text)
    }
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
