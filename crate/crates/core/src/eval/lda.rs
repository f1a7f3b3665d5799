//! Latent Dirichlet allocation fitted by collapsed Gibbs sampling.

use ndarray::Array2;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CountMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaConfig {
    pub n_topics: usize,
    pub iterations: usize,
    /// Document-topic prior; `None` means `50 / n_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        Self { n_topics: 50, iterations: 200, alpha: None, beta: 0.01, seed: 0 }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.n_topics as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_topics < 2 {
            return Err(Error::config("LDA needs at least 2 topics"));
        }
        if self.iterations == 0 {
            return Err(Error::config("LDA needs at least one sweep"));
        }
        if !(self.alpha() > 0.0 && self.beta > 0.0) {
            return Err(Error::config("LDA priors must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    /// Documents × topics, smoothed proportions; rows sum to one.
    pub doc_topic: Array2<f64>,
    /// Topic of every token, per document, in expanded column order.
    pub assignments: Vec<Vec<usize>>,
    pub row_ids: Vec<String>,
}

pub fn lda_fit(counts: &CountMatrix, config: &LdaConfig) -> Result<LdaFit> {
    config.validate()?;
    if counts.n_rows() == 0 || counts.nnz() == 0 {
        return Err(Error::config("LDA needs a non-empty count matrix"));
    }
    let (n_docs, n_terms, n_topics) = (counts.n_rows(), counts.n_cols(), config.n_topics);
    let (alpha, beta) = (config.alpha(), config.beta);
    let beta_sum = beta * n_terms as f64;
    let mut rng = crate::derived_rng(config.seed, 0);

    let tokens: Vec<Vec<usize>> =
        (0..n_docs).map(|d| counts.row(d).flat_map(|(t, c)| std::iter::repeat_n(t, c as usize)).collect()).collect();
    let mut doc_topic = vec![vec![0u32; n_topics]; n_docs];
    let mut topic_term = vec![vec![0u32; n_terms]; n_topics];
    let mut topic_total = vec![0u32; n_topics];
    let mut assignments: Vec<Vec<usize>> = tokens
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&t| {
                    let k = rng.random_range(0..n_topics);
                    doc_topic[d][k] += 1;
                    topic_term[k][t] += 1;
                    topic_total[k] += 1;
                    k
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; n_topics];
    for _ in 0..config.iterations {
        for (d, doc) in tokens.iter().enumerate() {
            for (pos, &t) in doc.iter().enumerate() {
                let old = assignments[d][pos];
                doc_topic[d][old] -= 1;
                topic_term[old][t] -= 1;
                topic_total[old] -= 1;

                let mut acc = 0.0;
                for k in 0..n_topics {
                    acc += (doc_topic[d][k] as f64 + alpha) * (topic_term[k][t] as f64 + beta)
                        / (topic_total[k] as f64 + beta_sum);
                    weights[k] = acc;
                }
                let u = rng.random::<f64>() * acc;
                let new = weights.partition_point(|&w| w <= u).min(n_topics - 1);

                assignments[d][pos] = new;
                doc_topic[d][new] += 1;
                topic_term[new][t] += 1;
                topic_total[new] += 1;
            }
        }
    }

    let theta = Array2::from_shape_fn((n_docs, n_topics), |(d, k)| {
        (doc_topic[d][k] as f64 + alpha) / (tokens[d].len() as f64 + n_topics as f64 * alpha)
    });
    Ok(LdaFit { doc_topic: theta, assignments, row_ids: counts.row_ids().to_vec() })
}
