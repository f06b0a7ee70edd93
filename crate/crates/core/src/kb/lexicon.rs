use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KbError;

const BUILTIN: &str = include_str!("../../data/relations.v1.json");

/// Symbolic relation -> textual phrase, e.g. `IsA` -> `is a`.
///
/// Lookups of unknown symbols are errors; there is no identity fallback.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationLexicon {
    pub version: u32,
    #[serde(rename = "relations")]
    pub entries: BTreeMap<String, String>,
}

impl RelationLexicon {
    /// The lexicon shipped with the crate (`data/relations.v1.json`).
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("bundled relation lexicon is valid JSON")
    }

    pub fn from_path(path: &Path) -> Result<Self, KbError> {
        let raw = std::fs::read_to_string(path).map_err(|e| KbError::io(path, e))?;
        serde_json::from_str(&raw).map_err(|e| KbError::Json {
            path: path.display().to_string(),
            line: 0,
            source: e,
        })
    }

    pub fn text(&self, symbol: &str) -> Result<&str, KbError> {
        self.entries
            .get(symbol)
            .map(String::as_str)
            .ok_or_else(|| KbError::UnknownRelation(symbol.to_string()))
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.entries.contains_key(symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}
