//! Language personalities: concrete description formats to and from
//! [`Configuration`](crate::model::Configuration).

mod adl;
mod native;

pub use adl::{parse_adl, parse_adl_from};
pub use native::{emit_native, parse_native, parse_native_from};

use std::collections::HashMap;
use std::fmt;
use std::path::PathBuf;

use crate::model::{validate, Configuration, ElementRef, ViolationCode};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceLocation {
    pub file: PathBuf,
    /// 1-based.
    pub line: usize,
    /// 1-based.
    pub column: usize,
}

impl SourceLocation {
    pub fn new(file: impl Into<PathBuf>, line: usize, column: usize) -> Self {
        SourceLocation {
            file: file.into(),
            line: line.max(1),
            column: column.max(1),
        }
    }
}

impl fmt::Display for SourceLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file.display(), self.line, self.column)
    }
}

/// Closed set of diagnostic codes produced by the frontends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagnosticCode {
    /// Lexical or syntactic error, including malformed XML.
    Syntax,
    /// XML element outside the supported ADL subset.
    UnsupportedElement,
    /// A name that does not resolve to a declaration.
    Unresolved,
    /// An identifier declared twice.
    Duplicate,
    /// Any other model invariant violation; the message carries the
    /// underlying validation code.
    Invalid,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::Syntax => "SYNTAX",
            DiagnosticCode::UnsupportedElement => "UNSUPPORTED_ELEMENT",
            DiagnosticCode::Unresolved => "UNRESOLVED",
            DiagnosticCode::Duplicate => "DUPLICATE",
            DiagnosticCode::Invalid => "INVALID",
        }
    }

    /// Syntax-level codes; the rest are semantic.
    pub fn is_syntactic(self) -> bool {
        matches!(
            self,
            DiagnosticCode::Syntax | DiagnosticCode::UnsupportedElement
        )
    }
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDiagnostic {
    pub location: SourceLocation,
    pub code: DiagnosticCode,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.location, self.code, self.message)
    }
}

impl std::error::Error for ParseDiagnostic {}

pub type ParseResult = Result<Configuration, Vec<ParseDiagnostic>>;

/// Source positions of model elements, recorded while parsing so that
/// validation violations can be reported against the input text.
#[derive(Debug, Default)]
pub(crate) struct LocationMap {
    file: PathBuf,
    positions: HashMap<ElementRef, (usize, usize)>,
}

impl LocationMap {
    pub(crate) fn new(file: PathBuf) -> Self {
        LocationMap {
            file,
            positions: HashMap::new(),
        }
    }

    /// Records the first position seen for `element`.
    pub(crate) fn record(&mut self, element: ElementRef, line: usize, column: usize) {
        self.positions.entry(element).or_insert((line, column));
    }

    pub(crate) fn at(&self, line: usize, column: usize) -> SourceLocation {
        SourceLocation::new(self.file.clone(), line, column)
    }

    fn locate(&self, element: &ElementRef) -> SourceLocation {
        let pos = match element {
            ElementRef::Instances(ids) => ids
                .iter()
                .filter_map(|id| self.positions.get(&ElementRef::Instance(id.clone())))
                .min()
                .copied(),
            other => self.positions.get(other).copied(),
        };
        let (line, column) = pos.unwrap_or((1, 1));
        self.at(line, column)
    }

    /// Validates `config` and converts every violation into a diagnostic.
    pub(crate) fn check(&self, config: Configuration) -> ParseResult {
        let report = validate(&config);
        if report.is_empty() {
            return Ok(config);
        }
        Err(report
            .into_iter()
            .map(|v| {
                let code = if v.code.is_unresolved() {
                    DiagnosticCode::Unresolved
                } else if v.code.is_duplicate() || v.code == ViolationCode::AmbiguousBinding {
                    DiagnosticCode::Duplicate
                } else {
                    DiagnosticCode::Invalid
                };
                ParseDiagnostic {
                    location: self.locate(&v.element),
                    code,
                    message: format!("{}: {}", v.code, v.message),
                }
            })
            .collect())
    }
}
