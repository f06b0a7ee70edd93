//! Contextual commonsense inference at desk scale.
//!
//! The crate covers the whole pipeline:
//!
//! - [`kb`]: parse ConceptNet, ATOMIC 2020 and GLUCOSE dumps into canonical
//!   assertions, rename variables, and fill missing specificity.
//! - [`align`]: vectorize stories and assertions and align each assertion to
//!   its nearest story and sentence.
//! - [`hint`]: render hint-augmented training examples in the ParaCOMET,
//!   GLUCOSE and joint formats and assemble shuffled datasets.
//! - [`neural`]: a small tape-based autodiff engine with a toy
//!   encoder-decoder generator and a sequence-classifier discriminator.
//! - [`bridge`]: the soft-argmax connection feeding generator softmaxes into
//!   the discriminator's embedding space.
//! - [`adversarial`]: the GAN training loop with the confounder loss and
//!   assertion scoring.
//! - [`metrics`]: corpus BLEU, ROUGE and discriminator accuracy.
//! - [`cli`]: the `ccinfer` subcommand driver.

pub mod adversarial;
pub mod align;
pub mod bridge;
pub mod cli;
pub mod hint;
pub mod kb;
pub mod metrics;
pub mod neural;
pub mod synthetic;

pub use adversarial::{BatchRecord, GanConfig, GanTrainer};
pub use align::{AlignedAssertion, EmbeddingMatrix, Story};
pub use hint::{Format, Hint, TrainingExample};
pub use kb::{Assertion, RelationLexicon, Source, Specificity};
pub use neural::{SoftSequence, Vocabulary};
