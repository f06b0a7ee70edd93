use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::KbError;

/// Knowledge base an assertion was read from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Conceptnet,
    Atomic2020,
    Glucose,
}

impl Source {
    pub const ALL: [Source; 3] = [Source::Conceptnet, Source::Atomic2020, Source::Glucose];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Conceptnet => "conceptnet",
            Source::Atomic2020 => "atomic2020",
            Source::Glucose => "glucose",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = KbError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conceptnet" => Ok(Source::Conceptnet),
            "atomic2020" | "atomic" => Ok(Source::Atomic2020),
            "glucose" => Ok(Source::Glucose),
            other => Err(KbError::UnknownSource(other.to_string())),
        }
    }
}

/// Whether an assertion instantiates story entities or is a variable-bearing template.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Specificity {
    Specific,
    General,
}

impl Specificity {
    pub fn as_str(self) -> &'static str {
        match self {
            Specificity::Specific => "specific",
            Specificity::General => "general",
        }
    }

    /// Symbol used inside hints, e.g. `<|specific|>`.
    pub fn hint_symbol(self) -> &'static str {
        match self {
            Specificity::Specific => "<|specific|>",
            Specificity::General => "<|general|>",
        }
    }

    /// Symbol used in joint-format targets, e.g. `<specific>`.
    pub fn joint_symbol(self) -> &'static str {
        match self {
            Specificity::Specific => "<specific>",
            Specificity::General => "<general>",
        }
    }
}

impl fmt::Display for Specificity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A canonical (subject, relation, object, specificity) tuple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assertion {
    pub id: String,
    pub source: Source,
    pub subject: String,
    pub relation: String,
    pub relation_text: String,
    pub object: String,
    pub specificity: Specificity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub glucose_dimension: Option<u8>,
}

// ATOMIC-style PersonX/Y/Z, GLUCOSE-style Someone_A / People_B / Something_A, and blanks.
static VARIABLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bPerson[XYZ]\b|\b[A-Z][A-Za-z]*_[A-Z]\b|_{2,}").expect("variable regex")
});

/// True when `text` holds at least one variable token or blank.
pub fn has_variable(text: &str) -> bool {
    VARIABLE.is_match(text)
}

impl Assertion {
    /// Textual form "subject relation_text object", used for embedding.
    pub fn text(&self) -> String {
        format!("{} {} {}", self.subject, self.relation_text, self.object)
    }

    pub fn has_variables(&self) -> bool {
        has_variable(&self.subject) || has_variable(&self.object)
    }

    pub fn validate(&self) -> Result<(), KbError> {
        let bad = |why: &str| {
            Err(KbError::InvalidAssertion {
                id: self.id.clone(),
                reason: why.to_string(),
            })
        };
        if self.subject.trim().is_empty()
            || self.relation.trim().is_empty()
            || self.object.trim().is_empty()
        {
            return bad("subject, relation and object must be non-empty");
        }
        if self.specificity == Specificity::General && !self.has_variables() {
            return bad("general assertion without a variable token");
        }
        match (self.source, self.glucose_dimension) {
            (Source::Glucose, Some(d)) if (1..=10).contains(&d) => {}
            (Source::Glucose, Some(_)) => return bad("glucose dimension outside 1..=10"),
            (Source::Glucose, None) => return bad("glucose assertion without dimension"),
            (_, Some(_)) => return bad("dimension on a non-glucose assertion"),
            (_, None) => {}
        }
        Ok(())
    }
}

/// Reads a JSON-lines assertion file.
pub fn read_assertions(path: &Path) -> Result<Vec<Assertion>, KbError> {
    let file = File::open(path).map_err(|e| KbError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| KbError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let a: Assertion = serde_json::from_str(&line).map_err(|e| KbError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source: e,
        })?;
        out.push(a);
    }
    Ok(out)
}

/// Writes assertions as JSON lines, one per line.
pub fn write_assertions<'a>(
    path: &Path,
    assertions: impl IntoIterator<Item = &'a Assertion>,
) -> Result<(), KbError> {
    let file = File::create(path).map_err(|e| KbError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in assertions {
        let line = serde_json::to_string(a).expect("assertion serializes");
        writeln!(w, "{line}").map_err(|e| KbError::io(path, e))?;
    }
    w.flush().map_err(|e| KbError::io(path, e))
}
