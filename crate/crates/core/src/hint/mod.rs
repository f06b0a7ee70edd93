//! Hint sampling, example rendering in the three serialization formats, and
//! dataset assembly.
//!
//! A hint is a strict subset of an assertion's parts, each tagged with a part
//! symbol, appended to the model input so a user can steer what gets
//! generated. Parts always render in the canonical order
//! specificity, subject, relation, object.

mod dataset;
mod render;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::kb::Assertion;

pub use dataset::{
    build_dataset, epoch_rng, manifest_path, read_dataset, resample_hints, write_dataset, Dataset,
    FormatMap, Manifest,
};
pub use render::{
    joint_target, parse_joint, relation_symbol, render_example, render_hint, render_source,
    JointTuple, RenderInput, TrainingExample, HINT_MARKER, JOINT_SYMBOLS, STRUCTURAL_SYMBOLS,
};

#[derive(Debug, thiserror::Error)]
pub enum HintError {
    #[error("hint part {kind} `{text}` does not come from assertion {id}")]
    ForeignHint {
        id: String,
        kind: PartKind,
        text: String,
    },
    #[error("hint has {parts} parts; allowed 1..={max}")]
    HintSize { parts: usize, max: usize },
    #[error("hint repeats part {0}")]
    DuplicatePart(PartKind),
    #[error("{0} is not a hint part in this format")]
    PartNotAvailable(PartKind),
    #[error("sentence index {index} outside story of {len} sentences")]
    SentenceIndex { index: usize, len: usize },
    #[error("assertion {0} has no GLUCOSE dimension")]
    MissingDimension(String),
    #[error("assertion {0} has no specific/general counterpart")]
    MissingCounterpart(String),
    #[error("story `{0}` not found")]
    MissingStory(String),
    #[error("joint target does not parse: {0}")]
    JointGrammar(String),
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
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
}

impl HintError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        HintError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Serialization format of a training example.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Paracomet,
    Glucose,
    Joint,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Paracomet, Format::Glucose, Format::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            Format::Paracomet => "paracomet",
            Format::Glucose => "glucose",
            Format::Joint => "joint",
        }
    }

    /// Parts a hint may draw from. ParaCOMET targets carry no specificity.
    pub fn hint_parts(self) -> &'static [PartKind] {
        match self {
            Format::Paracomet => &[PartKind::Subject, PartKind::Relation, PartKind::Object],
            Format::Glucose | Format::Joint => &PartKind::ALL,
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = HintError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "paracomet" => Ok(Format::Paracomet),
            "glucose" => Ok(Format::Glucose),
            "joint" => Ok(Format::Joint),
            other => Err(HintError::UnknownFormat(other.to_string())),
        }
    }
}

/// Part of an assertion, in canonical rendering order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartKind {
    Specificity,
    Subject,
    Relation,
    Object,
}

impl PartKind {
    pub const ALL: [PartKind; 4] = [
        PartKind::Specificity,
        PartKind::Subject,
        PartKind::Relation,
        PartKind::Object,
    ];

    /// Canonical text of this part of `a`. Relations use their textual form.
    pub fn text_of(self, a: &Assertion) -> String {
        match self {
            PartKind::Specificity => a.specificity.to_string(),
            PartKind::Subject => a.subject.clone(),
            PartKind::Relation => a.relation_text.clone(),
            PartKind::Object => a.object.clone(),
        }
    }
}

impl fmt::Display for PartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartKind::Specificity => "specificity",
            PartKind::Subject => "subject",
            PartKind::Relation => "relation",
            PartKind::Object => "object",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HintPart {
    pub kind: PartKind,
    pub text: String,
}

/// A non-empty strict subset of an assertion's parts, in canonical order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hint {
    pub parts: Vec<HintPart>,
}

impl Hint {
    /// Builds the hint holding exactly `kinds` of `a`, out of `available` parts.
    pub fn from_kinds(
        a: &Assertion,
        kinds: &[PartKind],
        available: &[PartKind],
    ) -> Result<Hint, HintError> {
        let mut sorted = kinds.to_vec();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(HintError::DuplicatePart(w[0]));
        }
        let max = available.len().saturating_sub(1);
        if sorted.is_empty() || sorted.len() > max {
            return Err(HintError::HintSize {
                parts: sorted.len(),
                max,
            });
        }
        if let Some(k) = sorted.iter().find(|k| !available.contains(k)) {
            return Err(HintError::PartNotAvailable(*k));
        }
        Ok(Hint {
            parts: sorted
                .into_iter()
                .map(|kind| HintPart {
                    kind,
                    text: kind.text_of(a),
                })
                .collect(),
        })
    }

    pub fn kinds(&self) -> Vec<PartKind> {
        self.parts.iter().map(|p| p.kind).collect()
    }

    /// Checks that every part was taken from `a`, without repeats, and that
    /// the hint is a strict subset of the `available` parts.
    pub fn check_against(&self, a: &Assertion, available: &[PartKind]) -> Result<(), HintError> {
        let max = available.len().saturating_sub(1);
        if self.parts.is_empty() || self.parts.len() > max {
            return Err(HintError::HintSize {
                parts: self.parts.len(),
                max,
            });
        }
        let mut seen = Vec::new();
        for p in &self.parts {
            if seen.contains(&p.kind) {
                return Err(HintError::DuplicatePart(p.kind));
            }
            seen.push(p.kind);
            if !available.contains(&p.kind) {
                return Err(HintError::PartNotAvailable(p.kind));
            }
            if p.text != p.kind.text_of(a) {
                return Err(HintError::ForeignHint {
                    id: a.id.clone(),
                    kind: p.kind,
                    text: p.text.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Draws a hint: none with probability `1 - p`, otherwise `k ~ U{1..P-1}`
/// parts sampled without replacement from `available` (P = its length).
pub fn sample_hint<R: Rng + ?Sized>(
    a: &Assertion,
    available: &[PartKind],
    p: f64,
    rng: &mut R,
) -> Option<Hint> {
    let total = available.len();
    if total < 2 || !rng.random_bool(p.clamp(0.0, 1.0)) {
        return None;
    }
    let k = rng.random_range(1..total);
    let kinds: Vec<PartKind> = index::sample(rng, total, k)
        .into_iter()
        .map(|i| available[i])
        .collect();
    Some(Hint::from_kinds(a, &kinds, available).expect("sampled hint is a strict subset"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Source, Specificity};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn hockey() -> Assertion {
        Assertion {
            id: "conceptnet:0".into(),
            source: Source::Conceptnet,
            subject: "the red team".into(),
            relation: "CapableOf".into(),
            relation_text: "capable of".into(),
            object: "winning the game".into(),
            specificity: Specificity::Specific,
            glucose_dimension: None,
        }
    }

    #[test]
    fn forced_subject_hint() {
        let h = Hint::from_kinds(
            &hockey(),
            &[PartKind::Subject],
            Format::Paracomet.hint_parts(),
        )
        .unwrap();
        assert_eq!(
            h.parts,
            vec![HintPart {
                kind: PartKind::Subject,
                text: "the red team".into()
            }]
        );
    }

    #[test]
    fn full_tuple_is_rejected() {
        let err = Hint::from_kinds(
            &hockey(),
            &[PartKind::Object, PartKind::Subject, PartKind::Relation],
            Format::Paracomet.hint_parts(),
        )
        .unwrap_err();
        assert!(matches!(err, HintError::HintSize { parts: 3, max: 2 }));
    }

    #[test]
    fn parts_come_out_in_canonical_order() {
        let h = Hint::from_kinds(
            &hockey(),
            &[PartKind::Object, PartKind::Relation],
            Format::Paracomet.hint_parts(),
        )
        .unwrap();
        assert_eq!(h.kinds(), vec![PartKind::Relation, PartKind::Object]);
    }

    #[test]
    fn foreign_hint_is_caught() {
        let mut h = Hint::from_kinds(
            &hockey(),
            &[PartKind::Subject],
            Format::Paracomet.hint_parts(),
        )
        .unwrap();
        h.parts[0].text = "the blue team".into();
        assert!(matches!(
            h.check_against(&hockey(), Format::Paracomet.hint_parts()),
            Err(HintError::ForeignHint { .. })
        ));
    }

    #[test]
    fn zero_probability_never_hints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!((0..1000).all(|_| sample_hint(&hockey(), &PartKind::ALL, 0.0, &mut rng).is_none()));
    }

    proptest! {
        #[test]
        fn sampled_hints_are_strict_subsets(seed in any::<u64>(), joint in any::<bool>()) {
            let available = if joint { Format::Joint.hint_parts() } else { Format::Paracomet.hint_parts() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                if let Some(h) = sample_hint(&hockey(), available, 0.5, &mut rng) {
                    prop_assert!(!h.parts.is_empty() && h.parts.len() < available.len());
                    prop_assert!(h.check_against(&hockey(), available).is_ok());
                    let kinds = h.kinds();
                    prop_assert!(kinds.windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }
}
