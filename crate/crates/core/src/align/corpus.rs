use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, RwLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::embed::{embed_one, MIN_DIM};
use super::index::{build_index, cosine_distance, IndexMode};
use super::{AlignError, EmbeddingMatrix, Story};
use crate::kb::Assertion;

/// An assertion bound to its nearest story and sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignedAssertion {
    pub assertion: Assertion,
    pub story_id: String,
    /// 1-based.
    pub sentence_index: usize,
    pub story_distance: f64,
    pub sentence_distance: f64,
}

/// Produces unit vectors for a story's sentences during stage two.
pub trait SentenceEmbedder: Sync {
    fn dim(&self) -> usize;
    fn embed_sentences(&self, story: &Story) -> Result<Vec<Vec<f32>>, AlignError>;
}

/// The builtin hashed embedder with a fixed configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuiltinEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl BuiltinEmbedder {
    pub fn new(dim: usize, seed: u64) -> Result<Self, AlignError> {
        if dim < MIN_DIM {
            return Err(AlignError::DimTooSmall(dim));
        }
        Ok(BuiltinEmbedder { dim, seed })
    }

    pub fn embed_texts(
        &self,
        ids: Vec<String>,
        texts: &[String],
    ) -> Result<EmbeddingMatrix, AlignError> {
        super::embed::embed_builtin_with_ids(ids, texts, self.dim, self.seed)
    }

    /// Assertions keyed by id, embedded from their textual form.
    pub fn embed_assertions(
        &self,
        assertions: &[Assertion],
    ) -> Result<EmbeddingMatrix, AlignError> {
        let texts: Vec<String> = assertions.iter().map(Assertion::text).collect();
        self.embed_texts(assertions.iter().map(|a| a.id.clone()).collect(), &texts)
    }

    /// Stories keyed by story id, embedded from their full text.
    pub fn embed_stories(&self, stories: &[Story]) -> Result<EmbeddingMatrix, AlignError> {
        let texts: Vec<String> = stories.iter().map(Story::full_text).collect();
        self.embed_texts(stories.iter().map(|s| s.story_id.clone()).collect(), &texts)
    }
}

impl SentenceEmbedder for BuiltinEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_sentences(&self, story: &Story) -> Result<Vec<Vec<f32>>, AlignError> {
        story
            .sentences
            .iter()
            .map(|s| embed_one(s, self.dim, self.seed))
            .collect()
    }
}

/// Sentence vectors precomputed elsewhere, stored under ids `{story_id}#{k}` (k 1-based).
pub struct PrecomputedSentences(pub EmbeddingMatrix);

pub fn sentence_id(story_id: &str, index: usize) -> String {
    format!("{story_id}#{index}")
}

impl SentenceEmbedder for PrecomputedSentences {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn embed_sentences(&self, story: &Story) -> Result<Vec<Vec<f32>>, AlignError> {
        (1..=story.len())
            .map(|k| {
                let id = sentence_id(&story.story_id, k);
                self.0
                    .get(&id)
                    .map(<[f32]>::to_vec)
                    .ok_or(AlignError::MissingId(id))
            })
            .collect()
    }
}

/// Two-stage alignment: nearest story by full text, then nearest sentence
/// inside that story. Sentence ties go to the lowest index.
pub fn align_corpus(
    assertions: &[Assertion],
    stories: &[Story],
    a_emb: &EmbeddingMatrix,
    s_emb: &EmbeddingMatrix,
    mode: IndexMode,
    sentences: &dyn SentenceEmbedder,
) -> Result<Vec<AlignedAssertion>, AlignError> {
    for dim in [s_emb.dim(), sentences.dim()] {
        if dim != a_emb.dim() {
            return Err(AlignError::DimensionMismatch {
                expected: a_emb.dim(),
                found: dim,
            });
        }
    }
    if stories.is_empty() {
        return Err(AlignError::EmptyIndex);
    }
    let by_id: HashMap<&str, &Story> = stories.iter().map(|s| (s.story_id.as_str(), s)).collect();

    // Stage-one keys: the story rows, in story order.
    let mut ids = Vec::with_capacity(stories.len());
    let mut rows = Vec::with_capacity(stories.len() * s_emb.dim());
    for s in stories {
        let row = s_emb
            .get(&s.story_id)
            .ok_or_else(|| AlignError::MissingId(s.story_id.clone()))?;
        ids.push(s.story_id.clone());
        rows.extend_from_slice(row);
    }
    let index = build_index(EmbeddingMatrix::new(ids, s_emb.dim(), rows)?, mode)?;

    let cache: RwLock<HashMap<String, Arc<Vec<Vec<f32>>>>> = RwLock::new(HashMap::new());
    let sentence_vectors = |story: &Story| -> Result<Arc<Vec<Vec<f32>>>, AlignError> {
        if let Some(v) = cache.read().expect("cache lock").get(&story.story_id) {
            return Ok(v.clone());
        }
        let v = Arc::new(sentences.embed_sentences(story)?);
        cache
            .write()
            .expect("cache lock")
            .entry(story.story_id.clone())
            .or_insert_with(|| v.clone());
        Ok(v)
    };

    assertions
        .par_iter()
        .map(|a| {
            let q = a_emb
                .get(&a.id)
                .ok_or_else(|| AlignError::MissingId(a.id.clone()))?;
            let hit = index.nearest(q)?;
            let story = by_id[hit.id.as_str()];
            let vectors = sentence_vectors(story)?;
            let (best, dist) = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| (i, cosine_distance(v, q)))
                .fold(
                    (0, f64::INFINITY),
                    |acc, cur| if cur.1 < acc.1 { cur } else { acc },
                );
            Ok(AlignedAssertion {
                assertion: a.clone(),
                story_id: story.story_id.clone(),
                sentence_index: best + 1,
                story_distance: hit.distance,
                sentence_distance: dist,
            })
        })
        .collect()
}

pub fn read_aligned(path: &Path) -> Result<Vec<AlignedAssertion>, AlignError> {
    let file = File::open(path).map_err(|e| AlignError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| AlignError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AlignError::Json {
            path: path.display().to_string(),
            line: i + 1,
            source: e,
        })?);
    }
    Ok(out)
}

pub fn write_aligned(path: &Path, aligned: &[AlignedAssertion]) -> Result<(), AlignError> {
    let file = File::create(path).map_err(|e| AlignError::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in aligned {
        writeln!(
            w,
            "{}",
            serde_json::to_string(a).expect("aligned serializes")
        )
        .map_err(|e| AlignError::io(path, e))?;
    }
    w.flush().map_err(|e| AlignError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{Source, Specificity};

    fn assertion(id: &str, s: &str, o: &str) -> Assertion {
        Assertion {
            id: id.into(),
            source: Source::Conceptnet,
            subject: s.into(),
            relation: "RelatedTo".into(),
            relation_text: "is related to".into(),
            object: o.into(),
            specificity: Specificity::Specific,
            glucose_dimension: None,
        }
    }

    fn stories() -> Vec<Story> {
        vec![
            Story::new(
                "hockey",
                vec![
                    "The hockey game was tied up.".into(),
                    "The red team had the puck.".into(),
                    "They sprinted down the ice.".into(),
                    "They cracked a shot on goal!".into(),
                    "They scored a final goal!".into(),
                ],
            )
            .unwrap(),
            Story::new(
                "dog",
                vec![
                    "John is a regular person who has a dog.".into(),
                    "John, every day, goes out to walk his dog.".into(),
                ],
            )
            .unwrap(),
        ]
    }

    #[test]
    fn single_story_single_assertion() {
        let st = &stories()[1..];
        let e = BuiltinEmbedder::new(64, 0).unwrap();
        let a = vec![assertion("a", "john", "goes out every day to walk his dog")];
        let out = align_corpus(
            &a,
            st,
            &e.embed_assertions(&a).unwrap(),
            &e.embed_stories(st).unwrap(),
            IndexMode::Exact,
            &e,
        )
        .unwrap();
        assert_eq!(out[0].story_id, "dog");
        assert_eq!(out[0].sentence_index, 2);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let st = stories();
        let a = vec![assertion("a", "x", "y")];
        let a_emb = BuiltinEmbedder::new(32, 0)
            .unwrap()
            .embed_assertions(&a)
            .unwrap();
        let e = BuiltinEmbedder::new(64, 0).unwrap();
        let err = align_corpus(
            &a,
            &st,
            &a_emb,
            &e.embed_stories(&st).unwrap(),
            IndexMode::Exact,
            &e,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            AlignError::DimensionMismatch {
                expected: 32,
                found: 64
            }
        ));
    }

    #[test]
    fn coverage_gap_is_reported() {
        let st = stories();
        let e = BuiltinEmbedder::new(64, 0).unwrap();
        let a = vec![assertion("a", "x", "y")];
        let other = vec![assertion("b", "x", "y")];
        let err = align_corpus(
            &a,
            &st,
            &e.embed_assertions(&other).unwrap(),
            &e.embed_stories(&st).unwrap(),
            IndexMode::Exact,
            &e,
        )
        .unwrap_err();
        assert!(matches!(err, AlignError::MissingId(id) if id == "a"));
    }

    #[test]
    fn precomputed_sentences_by_id() {
        let st = stories();
        let e = BuiltinEmbedder::new(16, 1).unwrap();
        let mut ids = Vec::new();
        let mut texts = Vec::new();
        for s in &st {
            for (k, t) in s.sentences.iter().enumerate() {
                ids.push(sentence_id(&s.story_id, k + 1));
                texts.push(t.clone());
            }
        }
        let pre = PrecomputedSentences(e.embed_texts(ids, &texts).unwrap());
        assert_eq!(
            pre.embed_sentences(&st[0]).unwrap(),
            e.embed_sentences(&st[0]).unwrap()
        );
    }
}
