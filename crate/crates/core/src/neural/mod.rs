//! Tape autodiff, the toy transformer pair, decoding, optimization and
//! checkpoints.

mod checkpoint;
mod decode;
mod gradcheck;
mod graph;
mod model;
mod optim;
mod tensor;
mod vocab;

pub use checkpoint::{Checkpoint, CheckpointHeader, TensorEntry, CKP1_MAGIC};
pub use decode::{decode_beam, decode_greedy, GeneratorScorer, SoftSequence, StepScorer};
pub use gradcheck::{
    gradcheck, CheckedSet, GradcheckConfig, GradcheckReport, TensorCheck, REL_FLOOR,
};
pub use graph::{sigmoid, Grads, Graph, Var, LN_EPS};
pub use model::{
    disc_assertion_cap, disc_context, positions, AssertionInput, Bound, Discriminator, Encoded,
    Generator, ModelConfig, ParamSet,
};
pub use optim::Adam;
pub use tensor::{argmax, softmax, Tensor};
pub use vocab::{
    is_symbol, split_tokens, Vocabulary, BOS, EOS, MASK, MAX_SENTENCE_SYMBOL, PAD, SEP, SPECIALS,
    UNK,
};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("vocabulary: {0}")]
    Vocabulary(String),
    #[error("model config: {0}")]
    Config(String),
    #[error("empty input")]
    EmptyInput,
    #[error("sequence of {len} tokens exceeds max_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("vector width {found}, expected {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
}

impl NeuralError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        NeuralError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
