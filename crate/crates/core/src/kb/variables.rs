use std::sync::LazyLock;

use regex::{Captures, Regex};

use super::Assertion;

static ATOMIC_PERSON: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\bPerson([XYZ])\b").expect("person regex"));

/// GLUCOSE letter for an ATOMIC person variable: X→A, Y→B, Z→C.
pub fn glucose_letter(atomic: char) -> Option<char> {
    match atomic {
        'X' => Some('A'),
        'Y' => Some('B'),
        'Z' => Some('C'),
        _ => None,
    }
}

/// Rewrites PersonX/PersonY/PersonZ to Person_A/Person_B/Person_C.
pub fn rename_text(text: &str) -> String {
    ATOMIC_PERSON
        .replace_all(text, |c: &Captures<'_>| {
            let letter = c[1]
                .chars()
                .next()
                .and_then(glucose_letter)
                .expect("regex admits X|Y|Z only");
            format!("Person_{letter}")
        })
        .into_owned()
}

/// Maps ATOMIC variable names onto the GLUCOSE scheme by canonical letter.
///
/// Only X, Y and Z exist in ATOMIC; any other `Person?` token is left alone.
pub fn rename_variables(a: &Assertion) -> Assertion {
    Assertion {
        subject: rename_text(&a.subject),
        object: rename_text(&a.object),
        ..a.clone()
    }
}
