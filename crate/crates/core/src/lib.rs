//! Unsupervised embeddings of free-text incident narratives.
//!
//! The pipeline runs narratives through word-level tri-gram tokenization
//! ([`corpus`]), a pruned vocabulary and TF-IDF weighting ([`features`]),
//! and a Gaussian-Bernoulli restricted Boltzmann machine trained with
//! contrastive divergence ([`gbrbm`]). The hidden-unit activation
//! probabilities are the embedding; records from the same crime series
//! should land near each other in Euclidean space.
//!
//! [`tsne`] projects embeddings to 2-D for inspection and [`eval`] holds the
//! synthetic corpus generator, cluster-quality metrics and an LDA baseline.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod gbrbm;
pub mod tsne;

pub use corpus::{Record, RecordSet, TokenizedDoc};
pub use error::{Error, Result};
pub use features::{CountMatrix, TfIdfMatrix, Vocabulary};
pub use gbrbm::{EmbeddingMatrix, GbrbmModel, Gradients, TrainConfig};
pub use tsne::{AffinityMatrix, Projection};

/// Deterministic RNG used throughout. Seeded explicitly, never from ambient state.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate RNG from a seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Derive an independent RNG stream for a named sub-task from a base seed.
pub fn derived_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = seeded_rng(seed);
    rng.set_stream(stream);
    rng
}
