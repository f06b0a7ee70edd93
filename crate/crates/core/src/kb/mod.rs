//! Knowledge-base ingestion: canonical assertions, relation textualization,
//! variable renaming and specificity filling.

mod assertion;
mod fill;
mod lexicon;
mod parse;
mod variables;

use std::path::Path;

pub use assertion::{
    has_variable, read_assertions, write_assertions, Assertion, Source, Specificity,
};
pub use fill::{fill_specificity, glucose_name, ExternalFills, MaskFiller, RuleFiller, Slot};
pub use lexicon::RelationLexicon;
pub use parse::{normalize_text, parse_source, split_glucose_nl, ParseReport};
pub use variables::{glucose_letter, rename_text, rename_variables};

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {malformed} of {rows} rows malformed; file does not look like a {kb} dump")]
    SchemaMismatch {
        path: String,
        kb: Source,
        malformed: usize,
        rows: usize,
    },
    #[error("unknown relation symbol `{0}`")]
    UnknownRelation(String),
    #[error("unknown knowledge-base source `{0}`")]
    UnknownSource(String),
    #[error("assertion {id}: {reason}")]
    InvalidAssertion { id: String, reason: String },
    #[error("assertion {assertion_id}: could not fill slot `{slot}`")]
    UnfilledSlot { assertion_id: String, slot: String },
}

impl KbError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        KbError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
