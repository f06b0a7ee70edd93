use serde::{Deserialize, Serialize};

use super::{Format, Hint, HintError, PartKind};
use crate::align::AlignedAssertion;
use crate::kb::{Assertion, Specificity};

/// Every hinted source contains this substring.
pub const HINT_MARKER: &str = "hint: (";

/// Symbols shared by hints and the ParaCOMET/joint sources.
pub const STRUCTURAL_SYMBOLS: [&str; 6] = [
    "<|subj|>",
    "<|rel|>",
    "<|obj|>",
    "<|specific|>",
    "<|general|>",
    "<|target|>",
];

/// The joint-format target grammar.
pub const JOINT_SYMBOLS: [&str; 5] = [
    "<specific>",
    "<general>",
    "<subject>",
    "<relation>",
    "<object>",
];

/// `<|xEffect|>`; spaces inside a relation name become underscores.
pub fn relation_symbol(relation: &str) -> String {
    format!("<|{}|>", relation.replace(' ', "_"))
}

pub fn sentence_symbol(index: usize) -> String {
    format!("<|sent{index}|>")
}

/// What a rendered example is built from.
#[derive(Clone, Copy, Debug)]
pub struct RenderInput<'a> {
    pub aligned: &'a AlignedAssertion,
    pub sentences: &'a [String],
    /// The other half of a GLUCOSE specific/general pair.
    pub counterpart: Option<&'a Assertion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub source_text: String,
    pub target_text: String,
    pub format: Format,
    pub hinted: bool,
    pub provenance: AlignedAssertion,
    /// Sentences of the aligned story, kept so hints can be resampled.
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterpart: Option<Assertion>,
}

impl TrainingExample {
    pub fn input(&self) -> RenderInput<'_> {
        RenderInput {
            aligned: &self.provenance,
            sentences: &self.sentences,
            counterpart: self.counterpart.as_ref(),
        }
    }

    pub fn story_text(&self) -> String {
        self.sentences.join(" ")
    }

    pub fn target_sentence(&self) -> &str {
        &self.sentences[self.provenance.sentence_index - 1]
    }
}

fn check_index(input: &RenderInput<'_>) -> Result<usize, HintError> {
    let k = input.aligned.sentence_index;
    if k == 0 || k > input.sentences.len() {
        return Err(HintError::SentenceIndex {
            index: k,
            len: input.sentences.len(),
        });
    }
    Ok(k)
}

/// The hint body including parentheses, e.g. `(<|subj|> the red team)`.
pub fn render_hint(a: &Assertion, hint: &Hint, format: Format) -> Result<String, HintError> {
    hint.check_against(a, format.hint_parts())?;
    let body = match format {
        Format::Joint => hint
            .parts
            .iter()
            .map(|p| match p.kind {
                PartKind::Specificity => a.specificity.joint_symbol().to_string(),
                PartKind::Subject => format!("<subject> {}", p.text),
                PartKind::Relation => format!("<relation> {}", p.text),
                PartKind::Object => format!("<object> {}", p.text),
            })
            .collect::<Vec<_>>()
            .join(" "),
        Format::Paracomet | Format::Glucose => {
            // A specificity symbol is glued to the part after it.
            let mut pending = "";
            let mut pieces = Vec::new();
            for p in &hint.parts {
                let rendered = match p.kind {
                    PartKind::Specificity => {
                        pending = a.specificity.hint_symbol();
                        continue;
                    }
                    PartKind::Subject => format!("<|subj|> {}", p.text),
                    PartKind::Relation if format == Format::Paracomet => {
                        format!("<|rel|> {}", relation_symbol(&a.relation))
                    }
                    PartKind::Relation => format!("<|rel|> {}", a.relation),
                    PartKind::Object => format!("<|obj|> {}", p.text),
                };
                pieces.push(format!("{pending}{rendered}"));
                pending = "";
            }
            if !pending.is_empty() {
                pieces.push(pending.to_string());
            }
            pieces.join(", ")
        }
    };
    Ok(format!("({body})"))
}

/// The model input, with `hint_body` (parenthesized) appended verbatim.
pub fn render_source(
    input: &RenderInput<'_>,
    format: Format,
    hint_body: Option<&str>,
) -> Result<String, HintError> {
    let k = check_index(input)?;
    let a = &input.aligned.assertion;
    let mut out = match format {
        Format::Paracomet => {
            format!(
                "{} {} {}",
                input.sentences.join(" "),
                sentence_symbol(k),
                relation_symbol(&a.relation)
            )
        }
        Format::Glucose => {
            let d = a
                .glucose_dimension
                .ok_or_else(|| HintError::MissingDimension(a.id.clone()))?;
            let story: Vec<String> = input
                .sentences
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    if i + 1 == k {
                        format!("*{s}*")
                    } else {
                        s.clone()
                    }
                })
                .collect();
            format!("{d}: {}", story.join(" "))
        }
        Format::Joint => format!(
            "{} <|target|> {}",
            input.sentences.join(" "),
            input.sentences[k - 1]
        ),
    };
    if let Some(h) = hint_body {
        out.push_str(" hint: ");
        out.push_str(h);
    }
    Ok(out)
}

/// `<specificity> <subject> s <relation> r <object> o`.
pub fn joint_target(a: &Assertion) -> String {
    format!(
        "{} <subject> {} <relation> {} <object> {}",
        a.specificity.joint_symbol(),
        a.subject,
        a.relation_text,
        a.object
    )
}

fn glucose_triple(a: &Assertion) -> String {
    format!("{} >{}> {}", a.subject, a.relation, a.object)
}

fn render_target(input: &RenderInput<'_>, format: Format) -> Result<String, HintError> {
    let a = &input.aligned.assertion;
    Ok(match format {
        Format::Paracomet => a.object.clone(),
        Format::Joint => joint_target(a),
        Format::Glucose => {
            let missing = || HintError::MissingCounterpart(a.id.clone());
            let other = input.counterpart.ok_or_else(missing)?;
            let (spec, gen) = match (a.specificity, other.specificity) {
                (Specificity::Specific, Specificity::General) => (a, other),
                (Specificity::General, Specificity::Specific) => (other, a),
                _ => return Err(missing()),
            };
            format!("{} ** {}", glucose_triple(spec), glucose_triple(gen))
        }
    })
}

pub fn render_example(
    input: RenderInput<'_>,
    hint: Option<&Hint>,
    format: Format,
) -> Result<TrainingExample, HintError> {
    let a = &input.aligned.assertion;
    let hint_body = hint.map(|h| render_hint(a, h, format)).transpose()?;
    Ok(TrainingExample {
        source_text: render_source(&input, format, hint_body.as_deref())?,
        target_text: render_target(&input, format)?,
        format,
        hinted: hint.is_some(),
        provenance: input.aligned.clone(),
        sentences: input.sentences.to_vec(),
        counterpart: input.counterpart.cloned(),
    })
}

/// A tuple recovered from a joint-format target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JointTuple {
    pub specificity: Specificity,
    pub subject: String,
    pub relation_text: String,
    pub object: String,
}

impl JointTuple {
    pub fn of(a: &Assertion) -> JointTuple {
        JointTuple {
            specificity: a.specificity,
            subject: a.subject.clone(),
            relation_text: a.relation_text.clone(),
            object: a.object.clone(),
        }
    }
}

/// Parses `<specificity> <subject> .. <relation> .. <object> ..`.
pub fn parse_joint(text: &str) -> Result<JointTuple, HintError> {
    let bad = |why: &str| HintError::JointGrammar(format!("{why} in `{text}`"));
    let mut words = text.split_whitespace();
    let specificity = match words.next() {
        Some("<specific>") => Specificity::Specific,
        Some("<general>") => Specificity::General,
        _ => return Err(bad("missing specificity symbol")),
    };
    if words.next() != Some("<subject>") {
        return Err(bad("missing <subject>"));
    }
    let mut fields: [Vec<&str>; 3] = Default::default();
    let mut slot = 0;
    for w in words {
        match (w, slot) {
            ("<relation>", 0) => slot = 1,
            ("<object>", 1) => slot = 2,
            (w, _) if JOINT_SYMBOLS.contains(&w) => return Err(bad(&format!("unexpected {w}"))),
            (w, s) => fields[s].push(w),
        }
    }
    if slot != 2 || fields.iter().any(Vec::is_empty) {
        return Err(bad("incomplete tuple"));
    }
    let [subject, relation_text, object] = fields.map(|f| f.join(" "));
    Ok(JointTuple {
        specificity,
        subject,
        relation_text,
        object,
    })
}
