//! Story/assertion vectorization and two-stage nearest-story, nearest-sentence alignment.

mod corpus;
pub mod embed;
mod index;
mod matrix;
mod story;

use std::path::Path;

pub use corpus::{
    align_corpus, read_aligned, sentence_id, write_aligned, AlignedAssertion, BuiltinEmbedder,
    PrecomputedSentences, SentenceEmbedder,
};
pub use embed::{embed_builtin, embed_builtin_with_ids};
pub use index::{build_index, cosine_distance, CosineIndex, IndexMode, Neighbor, KMEANS_ROUNDS};
pub use matrix::{sidecar_path, EmbeddingMatrix, EMB1_MAGIC, NORM_TOLERANCE};
pub use story::{read_stories, write_stories, Story};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
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
    #[error("malformed embedding file: {0}")]
    Format(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("row `{id}` has norm {norm}, expected 1")]
    NotUnitNorm { id: String, norm: f64 },
    #[error("text {index} has no tokens and embeds to the zero vector")]
    ZeroVector { index: usize },
    #[error("embedding dimension {0} is below the minimum of 8")]
    DimTooSmall(usize),
    #[error("no embedding for id `{0}`")]
    MissingId(String),
    #[error("index needs at least one row")]
    EmptyIndex,
    #[error("{k} clusters requested for {rows} rows")]
    TooManyClusters { k: usize, rows: usize },
    #[error("story `{0}` has no sentences")]
    EmptyStory(String),
}

impl AlignError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        AlignError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
