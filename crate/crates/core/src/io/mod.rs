//! File formats: model documents, background databases, characterization tables, and results.

mod background;
mod dcf;
mod model_file;
pub mod number;
mod results;

pub use background::{load_background_db, parse_background_db, DuplicateFlow, UnitValueRow, UnitValueTable};
pub use dcf::{load_dcf_tables, parse_dcf_tables, DCF_HEADER};
pub use model_file::{load_model, parse_model};
pub use results::{
    export_results, import_results, read_results, write_results, ExportError, Format, Payload, ResultSet,
    RunMetadata, CSV_HEADER,
};

use crate::model::ValidationReport;
use std::fmt;
use std::path::{Path, PathBuf};

/// Line (1-based) and optional column (1-based) in a source file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourcePos {
    pub line: usize,
    pub column: Option<usize>,
}

impl SourcePos {
    pub fn start() -> Self {
        Self {
            line: 1,
            column: Some(1),
        }
    }

    pub fn line(line: usize) -> Self {
        Self { line, column: None }
    }

    /// Position of byte `offset` in `text`.
    pub fn from_offset(text: &str, offset: usize) -> Self {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
        Self {
            line,
            column: Some(column),
        }
    }
}

impl fmt::Display for SourcePos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.column {
            Some(c) => write!(f, "{}:{}", self.line, c),
            None => write!(f, "{}", self.line),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadError {
    Io {
        path: PathBuf,
        message: String,
    },
    Parse {
        path: Option<PathBuf>,
        pos: SourcePos,
        message: String,
    },
    Schema {
        path: Option<PathBuf>,
        pos: Option<SourcePos>,
        message: String,
    },
    Invalid {
        path: Option<PathBuf>,
        report: ValidationReport,
    },
}

impl LoadError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            message: e.to_string(),
        }
    }

    pub(crate) fn parse(pos: SourcePos, message: impl Into<String>) -> Self {
        Self::Parse {
            path: None,
            pos,
            message: message.into(),
        }
    }

    pub(crate) fn schema(pos: Option<SourcePos>, message: impl Into<String>) -> Self {
        Self::Schema {
            path: None,
            pos,
            message: message.into(),
        }
    }

    pub(crate) fn from_csv(e: &csv::Error) -> Self {
        let line = e.position().map_or(1, |p| p.line() as usize);
        Self::parse(SourcePos::line(line), e.to_string())
    }

    /// Attaches the file path, unless one is already set.
    pub fn at(mut self, file: &Path) -> Self {
        match &mut self {
            Self::Parse { path, .. } | Self::Schema { path, .. } | Self::Invalid { path, .. } => {
                path.get_or_insert_with(|| file.to_owned());
            }
            Self::Io { .. } => {}
        }
        self
    }

    /// I/O and syntax failures, as opposed to a model that parsed but is invalid.
    pub fn is_input_failure(&self) -> bool {
        !matches!(self, Self::Invalid { .. })
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = |path: &Option<PathBuf>| {
            path.as_ref()
                .map(|p| format!("{}:", p.display()))
                .unwrap_or_default()
        };
        match self {
            Self::Io { path, message } => write!(f, "{}: {message}", path.display()),
            Self::Parse { path, pos, message } => write!(f, "{}{pos}: parse error: {message}", prefix(path)),
            Self::Schema { path, pos, message } => match pos {
                Some(pos) => write!(f, "{}{pos}: {message}", prefix(path)),
                None => write!(f, "{} {message}", prefix(path)),
            },
            Self::Invalid { path, report } => {
                writeln!(f, "{} invalid model", prefix(path))?;
                write!(f, "{report}")
            }
        }
    }
}

impl std::error::Error for LoadError {}
