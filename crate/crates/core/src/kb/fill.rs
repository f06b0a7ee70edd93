//! Generating the specific counterpart of a general ATOMIC assertion.
//!
//! Every person variable and every blank becomes a slot. A [`MaskFiller`]
//! proposes the text for each slot given the aligned story sentence. The
//! default [`RuleFiller`] is deterministic; [`ExternalFills`] ingests fills
//! produced elsewhere, e.g. by a masked language model.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use serde::Deserialize;

use super::{glucose_letter, Assertion, KbError, Source, Specificity};

/// A position that must be filled to make an assertion specific.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    /// Person variable by ATOMIC letter (`X`, `Y`, `Z`); `Person_A` maps to `X`.
    Person(char),
    /// The n-th blank (`____`) counted across subject then object.
    Blank(usize),
}

impl Slot {
    /// Key used by external fill files: `PersonX` or `____#0`.
    pub fn key(&self) -> String {
        match self {
            Slot::Person(c) => format!("Person{c}"),
            Slot::Blank(i) => format!("____#{i}"),
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Person(c) => write!(f, "Person{c}"),
            Slot::Blank(_) => f.write_str("____"),
        }
    }
}

pub trait MaskFiller {
    /// Text for `slot`, or `None` when the filler cannot produce one.
    fn fill(&self, assertion: &Assertion, slot: &Slot, context: &str) -> Option<String>;
}

const FUNCTION_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "before", "being", "but", "by", "can", "could", "did", "do", "does", "doing", "done",
    "during", "each", "every", "for", "from", "had", "has", "have", "he", "her", "here", "hers",
    "him", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "me", "my", "no",
    "not", "now", "of", "off", "on", "once", "one", "only", "or", "our", "out", "over", "she",
    "so", "some", "such", "than", "that", "the", "their", "them", "then", "there", "these", "they",
    "this", "those", "to", "too", "up", "us", "very", "was", "we", "were", "what", "when", "where",
    "which", "while", "who", "why", "will", "with", "would", "yes", "you", "your",
];

fn is_function_word(w: &str) -> bool {
    FUNCTION_WORDS
        .binary_search(&w.to_ascii_lowercase().as_str())
        .is_ok()
}

static WORD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z]+").expect("word regex"));

/// Deterministic stand-in for a masked language model.
///
/// - `PersonX`, `PersonY`, `PersonZ` take the first, second and third
///   distinct capitalized context tokens that are not function words.
/// - Blanks become `something` when the context has a lowercase content word.
/// - In non-strict mode missing persons fall back to `someone` and blanks
///   always fill.
#[derive(Clone, Copy, Debug, Default)]
pub struct RuleFiller {
    pub strict: bool,
}

impl RuleFiller {
    pub fn strict() -> Self {
        RuleFiller { strict: true }
    }

    pub fn lenient() -> Self {
        RuleFiller { strict: false }
    }

    /// Capitalized, non-function-word tokens of `context` in order of first appearance.
    pub fn entity_candidates(context: &str) -> Vec<String> {
        let mut seen = Vec::<String>::new();
        for m in WORD.find_iter(context) {
            let w = m.as_str();
            let capitalized = w.chars().next().is_some_and(|c| c.is_ascii_uppercase());
            if capitalized && !is_function_word(w) && !seen.iter().any(|s| s == w) {
                seen.push(w.to_string());
            }
        }
        seen
    }

    fn has_content_word(context: &str) -> bool {
        WORD.find_iter(context).any(|m| {
            let w = m.as_str();
            w.chars().next().is_some_and(|c| c.is_ascii_lowercase()) && !is_function_word(w)
        })
    }
}

impl MaskFiller for RuleFiller {
    fn fill(&self, _assertion: &Assertion, slot: &Slot, context: &str) -> Option<String> {
        match slot {
            Slot::Person(letter) => {
                let rank = match letter {
                    'X' => 0,
                    'Y' => 1,
                    'Z' => 2,
                    _ => return None,
                };
                let candidates = Self::entity_candidates(context);
                match candidates.into_iter().nth(rank) {
                    Some(c) => Some(c),
                    None if !self.strict => Some("someone".to_string()),
                    None => None,
                }
            }
            Slot::Blank(_) => {
                if !self.strict || Self::has_content_word(context) {
                    Some("something".to_string())
                } else {
                    None
                }
            }
        }
    }
}

#[derive(Deserialize)]
struct FillLine {
    assertion_id: String,
    slot: String,
    fill: String,
}

/// Fills produced outside the crate, keyed by (assertion id, slot key).
///
/// File format: JSON lines `{"assertion_id": ..., "slot": "PersonX" | "____#0", "fill": ...}`.
#[derive(Clone, Debug, Default)]
pub struct ExternalFills {
    fills: HashMap<(String, String), String>,
}

impl ExternalFills {
    pub fn insert(&mut self, assertion_id: &str, slot: &Slot, fill: &str) {
        self.fills
            .insert((assertion_id.to_string(), slot.key()), fill.to_string());
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, KbError> {
        let file = File::open(path).map_err(|e| KbError::io(path, e))?;
        let mut out = ExternalFills::default();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| KbError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: FillLine = serde_json::from_str(&line).map_err(|e| KbError::Json {
                path: path.display().to_string(),
                line: i + 1,
                source: e,
            })?;
            out.fills.insert((l.assertion_id, l.slot), l.fill);
        }
        Ok(out)
    }
}

impl MaskFiller for ExternalFills {
    fn fill(&self, assertion: &Assertion, slot: &Slot, _context: &str) -> Option<String> {
        self.fills.get(&(assertion.id.clone(), slot.key())).cloned()
    }
}

static SLOT: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\bPerson([XYZ])\b|\bPerson_([ABC])\b|_{2,}").expect("slot regex")
});

fn atomic_letter(glucose: char) -> char {
    match glucose {
        'A' => 'X',
        'B' => 'Y',
        _ => 'Z',
    }
}

/// Slots of `text` in order, numbering blanks from `first_blank`.
fn slots_in(text: &str, first_blank: &mut usize) -> Vec<(std::ops::Range<usize>, Slot)> {
    SLOT.captures_iter(text)
        .map(|c| {
            let m = c.get(0).expect("whole match");
            let slot = if let Some(x) = c.get(1) {
                Slot::Person(x.as_str().chars().next().expect("letter"))
            } else if let Some(g) = c.get(2) {
                Slot::Person(atomic_letter(g.as_str().chars().next().expect("letter")))
            } else {
                let s = Slot::Blank(*first_blank);
                *first_blank += 1;
                s
            };
            (m.range(), slot)
        })
        .collect()
}

/// Returns a new specific assertion with every slot filled from `context_sentence`.
///
/// The general input is left untouched; callers keep both.
pub fn fill_specificity(
    a: &Assertion,
    context_sentence: &str,
    filler: &dyn MaskFiller,
) -> Result<Assertion, KbError> {
    if a.source != Source::Atomic2020 || a.specificity != Specificity::General {
        return Err(KbError::InvalidAssertion {
            id: a.id.clone(),
            reason: "specificity filling applies to general ATOMIC 2020 assertions".into(),
        });
    }
    let mut blanks = 0;
    let subject_slots = slots_in(&a.subject, &mut blanks);
    let object_slots = slots_in(&a.object, &mut blanks);

    let mut chosen: BTreeMap<Slot, String> = BTreeMap::new();
    for (_, slot) in subject_slots.iter().chain(&object_slots) {
        if chosen.contains_key(slot) {
            continue;
        }
        let text = filler
            .fill(a, slot, context_sentence)
            .filter(|t| !t.trim().is_empty())
            .ok_or_else(|| KbError::UnfilledSlot {
                assertion_id: a.id.clone(),
                slot: slot.to_string(),
            })?;
        chosen.insert(slot.clone(), text);
    }
    let apply = |text: &str, slots: &[(std::ops::Range<usize>, Slot)]| {
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for (range, slot) in slots {
            out.push_str(&text[last..range.start]);
            out.push_str(&chosen[slot]);
            last = range.end;
        }
        out.push_str(&text[last..]);
        out
    };
    Ok(Assertion {
        id: format!("{}:specific", a.id),
        subject: apply(&a.subject, &subject_slots),
        object: apply(&a.object, &object_slots),
        specificity: Specificity::Specific,
        ..a.clone()
    })
}

/// The GLUCOSE person variable a filled ATOMIC slot corresponds to, for reporting.
pub fn glucose_name(slot: &Slot) -> Option<String> {
    match slot {
        Slot::Person(c) => glucose_letter(*c).map(|g| format!("Person_{g}")),
        Slot::Blank(_) => None,
    }
}
