//! Declarative pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use narrembed::eval::{LdaConfig, SynthConfig};
use narrembed::tsne::TsneConfig;
use narrembed::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// Narrative file (`.jsonl` or `.csv`). Unset means the `synth` output.
    pub path: Option<PathBuf>,
    /// One stopword per line. Unset means the built-in English list.
    pub stopwords: Option<PathBuf>,
    pub ngram: usize,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { path: None, stopwords: None, ngram: narrembed::corpus::DEFAULT_NGRAM }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub min_df: usize,
    pub max_df_fraction: f64,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self { min_df: 3, max_df_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n_hidden: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { n_hidden: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Neighbour count for kNN purity.
    pub k: usize,
    pub lda: LdaConfig,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { k: 5, lda: LdaConfig::default() }
    }
}

/// Every stage parameter plus the global seed.
///
/// The per-stage `seed` fields of `synth`, `train` and `evaluate.lda` are
/// overwritten by the global seed in [`PipelineConfig::resolved`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub corpus: CorpusSection,
    pub synth: SynthConfig,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub tsne: TsneConfig,
    pub evaluate: EvaluateSection,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Copy with the global seed pushed into every stage.
    pub fn resolved(mut self) -> Self {
        self.synth.seed = self.seed;
        self.train.seed = self.seed;
        self.evaluate.lda.seed = self.seed;
        self
    }

    /// Check every stage's parameters before any stage runs.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let wrap = |section: &str, e: narrembed::Error| ConfigError(format!("[{section}] {e}"));
        if self.corpus.ngram == 0 {
            return Err(ConfigError("[corpus] ngram must be >= 1".into()));
        }
        if let Some(p) = &self.corpus.stopwords {
            if !p.is_file() {
                return Err(ConfigError(format!("[corpus] stopword file {} not found", p.display())));
            }
        }
        self.synth.validate().map_err(|e| wrap("synth", e))?;
        if self.features.min_df == 0 {
            return Err(ConfigError("[features] min_df must be >= 1".into()));
        }
        let f = self.features.max_df_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(ConfigError(format!("[features] max_df_fraction {f} must lie in (0, 1]")));
        }
        if self.model.n_hidden == 0 {
            return Err(ConfigError("[model] n_hidden must be >= 1".into()));
        }
        self.train.validate().map_err(|e| wrap("train", e))?;
        self.tsne.validate().map_err(|e| wrap("tsne", e))?;
        if self.evaluate.k == 0 {
            return Err(ConfigError("[evaluate] k must be >= 1".into()));
        }
        self.evaluate.lda.validate().map_err(|e| wrap("evaluate.lda", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = PipelineConfig::from_toml("").unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = PipelineConfig { seed: 7, ..Default::default() };
        c.model.n_hidden = 64;
        c.evaluate.lda.n_topics = 10;
        assert_eq!(PipelineConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn sections_parse() {
        let c = PipelineConfig::from_toml(
            "seed = 3\n[model]\nn_hidden = 100\n[train]\nepochs = 5\n[evaluate.lda]\nn_topics = 8\n",
        )
        .unwrap();
        assert_eq!((c.seed, c.model.n_hidden, c.train.epochs, c.evaluate.lda.n_topics), (3, 100, 5, 8));
        assert_eq!(c.train.batch_size, TrainConfig::default().batch_size);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml("[train]\nmomentum = 0.9\n").is_err());
        assert!(PipelineConfig::from_toml("hidden = 3\n").is_err());
    }

    #[test]
    fn global_seed_reaches_every_stage() {
        let c = PipelineConfig { seed: 41, ..Default::default() }.resolved();
        assert_eq!((c.synth.seed, c.train.seed, c.evaluate.lda.seed), (41, 41, 41));
    }

    #[test]
    fn validation_covers_each_stage() {
        let bad = [
            "[corpus]\nngram = 0\n",
            "[corpus]\nstopwords = \"/nonexistent/stop.txt\"\n",
            "[synth]\nn_series = 2\n",
            "[features]\nmin_df = 0\n",
            "[features]\nmax_df_fraction = 1.5\n",
            "[model]\nn_hidden = 0\n",
            "[train]\nbatch_size = 0\n",
            "[tsne]\nperplexity = -1.0\n",
            "[evaluate]\nk = 0\n",
            "[evaluate.lda]\nn_topics = 1\n",
        ];
        for text in bad {
            let c = PipelineConfig::from_toml(text).unwrap();
            assert!(c.validate().is_err(), "{text}");
        }
    }
}
