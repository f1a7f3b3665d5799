//! Shared inputs for the benchmarks in `benches/`.

use narrembed::corpus::{tokenize_corpus, Stopwords};
use narrembed::eval::{generate_synthetic_corpus, SynthConfig};
use narrembed::features::{build_vocabulary, term_document_counts, tfidf};
use narrembed::{CountMatrix, RecordSet, TfIdfMatrix, TrainConfig};
use ndarray::Array2;

pub struct Fixture {
    pub records: RecordSet,
    pub counts: CountMatrix,
    pub tfidf: TfIdfMatrix,
}

/// The default synthetic corpus, tokenized and weighted.
pub fn fixture() -> Fixture {
    let records = generate_synthetic_corpus(&SynthConfig::default()).expect("default config is valid");
    let docs = tokenize_corpus(&records, &Stopwords::english());
    let vocab = build_vocabulary(&docs, 3, 0.5).expect("default corpus has terms");
    let counts = term_document_counts(&docs, &vocab);
    let tfidf = tfidf(&counts);
    Fixture { records, counts, tfidf }
}

/// Embedding from a short training run, for the projection benchmarks.
pub fn embedding(fixture: &Fixture, n_hidden: usize) -> Array2<f64> {
    let config = TrainConfig { epochs: 2, ..Default::default() };
    let out = narrembed::gbrbm::train(&fixture.tfidf, n_hidden, &config).expect("training runs");
    out.model.embed(&fixture.tfidf).expect("dimensions match").values
}
