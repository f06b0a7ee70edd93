//! Templated stories with topic-determined inferences, small enough to
//! memorize. Used by the examples, the learning tests and `ccinfer` smoke runs.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::align::{AlignedAssertion, Story};
use crate::hint::{build_dataset, Dataset, FormatMap, HintError};
use crate::kb::{Assertion, Source, Specificity};

struct Topic {
    sentences: [&'static str; 4],
    /// 1-based.
    target: usize,
    relation: &'static str,
    relation_text: &'static str,
    object: &'static str,
}

const TOPICS: [Topic; 8] = [
    Topic {
        sentences: [
            "{} walked to the park.",
            "Dark clouds filled the sky.",
            "It started to rain hard.",
            "{} had no umbrella.",
        ],
        target: 3,
        relation: "xEffect",
        relation_text: "has the effect on the subject",
        object: "gets soaked by the rain",
    },
    Topic {
        sentences: [
            "{} studied all night.",
            "The math exam was in the morning.",
            "{} answered every question.",
            "The teacher graded the exam.",
        ],
        target: 3,
        relation: "xReact",
        relation_text: "makes the subject feel",
        object: "proud of the good grade",
    },
    Topic {
        sentences: [
            "{} was hungry after work.",
            "{} cooked pasta with tomato sauce.",
            "The kitchen smelled of garlic.",
            "{} sat down at the table.",
        ],
        target: 2,
        relation: "xEffect",
        relation_text: "has the effect on the subject",
        object: "eats a warm dinner",
    },
    Topic {
        sentences: [
            "{} has a small dog.",
            "The dog barked at the door.",
            "{} grabbed the leash.",
            "They went outside together.",
        ],
        target: 3,
        relation: "xIntent",
        relation_text: "is done because the subject wants",
        object: "to walk the dog",
    },
    Topic {
        sentences: [
            "It was the birthday of {}.",
            "Friends brought a chocolate cake.",
            "Everyone sang loudly.",
            "{} blew out the candles.",
        ],
        target: 4,
        relation: "xReact",
        relation_text: "makes the subject feel",
        object: "happy and loved",
    },
    Topic {
        sentences: [
            "{} drove to work.",
            "The car engine made a strange noise.",
            "Smoke came from the hood.",
            "{} called a mechanic.",
        ],
        target: 4,
        relation: "xNeed",
        relation_text: "requires the subject to",
        object: "fix the broken car",
    },
    Topic {
        sentences: [
            "{} went to the beach.",
            "The sun was very hot.",
            "{} forgot the sunscreen.",
            "The sand burned like fire.",
        ],
        target: 3,
        relation: "xEffect",
        relation_text: "has the effect on the subject",
        object: "gets a painful sunburn",
    },
    Topic {
        sentences: [
            "The hockey game was tied.",
            "The team of {} had the puck.",
            "They sprinted down the ice.",
            "They scored a final goal!",
        ],
        target: 4,
        relation: "xEffect",
        relation_text: "has the effect on the subject",
        object: "wins the game",
    },
];

const NAMES: [&str; 12] = [
    "Anna", "Ben", "Carla", "Dev", "Emma", "Farid", "Gina", "Hugo", "Iris", "Jon", "Kemi", "Luis",
];

/// Number of distinct topics; each fixes its object.
pub const TOPIC_COUNT: usize = TOPICS.len();

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub stories: Vec<Story>,
    pub aligned: Vec<AlignedAssertion>,
}

/// `n` stories cycling through the topics, one aligned assertion each.
pub fn synthetic_corpus(n: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stories = Vec::with_capacity(n);
    let mut aligned = Vec::with_capacity(n);
    for i in 0..n {
        let topic = &TOPICS[i % TOPICS.len()];
        let name = *NAMES.choose(&mut rng).expect("names");
        let story_id = format!("synth-{i}");
        let sentences: Vec<String> = topic
            .sentences
            .iter()
            .map(|s| s.replace("{}", name))
            .collect();
        let assertion = Assertion {
            id: format!("atomic2020:{i}"),
            source: Source::Atomic2020,
            subject: name.to_string(),
            relation: topic.relation.to_string(),
            relation_text: topic.relation_text.to_string(),
            object: topic.object.to_string(),
            specificity: Specificity::Specific,
            glucose_dimension: None,
        };
        aligned.push(AlignedAssertion {
            assertion,
            story_id: story_id.clone(),
            sentence_index: topic.target,
            story_distance: 0.0,
            sentence_distance: 0.0,
        });
        stories.push(Story {
            story_id,
            sentences,
        });
    }
    SyntheticCorpus { stories, aligned }
}

/// Rendered, shuffled examples for a synthetic corpus of `n` stories.
pub fn synthetic_dataset(
    n: usize,
    formats: &FormatMap,
    p_hint: f64,
    seed: u64,
) -> Result<Dataset, HintError> {
    let c = synthetic_corpus(n, seed);
    build_dataset(&c.aligned, &c.stories, formats, p_hint, seed)
}

/// Relation names used by the synthetic corpus.
pub fn synthetic_relations() -> Vec<String> {
    let mut r: Vec<String> = TOPICS.iter().map(|t| t.relation.to_string()).collect();
    r.sort();
    r.dedup();
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn objects_follow_topics() {
        let c = synthetic_corpus(16, 1);
        assert_eq!(c.stories.len(), 16);
        for (i, a) in c.aligned.iter().enumerate() {
            assert_eq!(
                a.assertion.object,
                c.aligned[(i + TOPIC_COUNT) % 16].assertion.object
            );
            let story = &c.stories[i];
            assert!(story.sentence(a.sentence_index).is_some());
            assert!(story.full_text().contains(&a.assertion.subject));
        }
    }

    #[test]
    fn dataset_is_deterministic() {
        let f = FormatMap::default();
        assert_eq!(
            synthetic_dataset(24, &f, 0.5, 3).unwrap(),
            synthetic_dataset(24, &f, 0.5, 3).unwrap()
        );
    }
}
