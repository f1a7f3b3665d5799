//! Evaluation bench: synthetic labelled corpora, cluster-quality metrics and
//! the LDA topic-model baseline.

pub mod lda;
pub mod metrics;
pub mod synth;

pub use lda::{lda_fit, LdaConfig, LdaFit};
pub use metrics::{knn_purity, silhouette, KnnPurity, MetricReport, SeriesPurity};
pub use synth::{generate_synthetic_corpus, SynthConfig};
