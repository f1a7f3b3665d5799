//! Stage implementations. Every stage reads its inputs from earlier stages'
//! artifacts, writes its own artifacts into the output directory and records
//! a [`Manifest`] next to them.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use narrembed::corpus::{load_records, tokenize_corpus_with, RecordFormat, Stopwords};
use narrembed::eval::{generate_synthetic_corpus, lda_fit, MetricReport};
use narrembed::features::{build_vocabulary, term_document_counts, tfidf};
use narrembed::gbrbm::{save_loss_trace, train};
use narrembed::tsne::{embedding_affinities, project_with};
use narrembed::{CountMatrix, EmbeddingMatrix, GbrbmModel, RecordSet, TfIdfMatrix, Vocabulary};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::PipelineConfig;
use crate::manifest::{FileDigest, Manifest};
use crate::MissingArtifact;

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const VOCAB: &str = "vocab.tsv";
    pub const COUNTS: &str = "counts.tsv";
    pub const TFIDF: &str = "tfidf.tsv";
    pub const MODEL: &str = "model.gbrbm";
    pub const LOSS: &str = "loss.csv";
    pub const EMBEDDING: &str = "embedding.csv";
    pub const PROJECTION: &str = "projection.csv";
    pub const KL_TRACE: &str = "kl.csv";
    pub const METRICS: &str = "metrics.json";
    pub const LDA_METRICS: &str = "lda_metrics.json";
    pub const REPORT: &str = "report.json";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    BuildVocab,
    Featurize,
    Train,
    Embed,
    Project,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::BuildVocab,
        Stage::Featurize,
        Stage::Train,
        Stage::Embed,
        Stage::Project,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::BuildVocab => "build-vocab",
            Stage::Featurize => "featurize",
            Stage::Train => "train",
            Stage::Embed => "embed",
            Stage::Project => "project",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }
}

/// Stage that writes a given artifact, for error messages.
fn producer(artifact: &str) -> &'static str {
    use artifacts::*;
    match artifact {
        CORPUS => "synth",
        VOCAB => "build-vocab",
        COUNTS | TFIDF => "featurize",
        MODEL | LOSS => "train",
        EMBEDDING => "embed",
        METRICS | LDA_METRICS => "evaluate",
        _ => "an earlier stage",
    }
}

pub struct Pipeline {
    config: PipelineConfig,
    out_dir: PathBuf,
}

struct StageRun {
    stage: Stage,
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<String>,
    summary: BTreeMap<String, serde_json::Value>,
}

impl Pipeline {
    /// Validate the whole config and create the output directory.
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>) -> anyhow::Result<Self> {
        let config = config.resolved();
        config.validate()?;
        let out_dir = out_dir.into();
        std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self { config, out_dir })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn run_stage(&self, stage: Stage) -> anyhow::Result<Manifest> {
        match stage {
            Stage::Synth => self.synth(),
            Stage::BuildVocab => self.build_vocab(),
            Stage::Featurize => self.featurize(),
            Stage::Train => self.train(),
            Stage::Embed => self.embed(),
            Stage::Project => self.project(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
        }
    }

    /// Every stage in order. `synth` is skipped when the config names a corpus file.
    pub fn run_all(&self) -> anyhow::Result<Vec<Manifest>> {
        Stage::ALL
            .into_iter()
            .filter(|&s| !(s == Stage::Synth && self.config.corpus.path.is_some()))
            .map(|s| self.run_stage(s))
            .collect()
    }

    fn begin(&self, stage: Stage) -> StageRun {
        StageRun { stage, started: Instant::now(), inputs: Vec::new(), outputs: Vec::new(), summary: BTreeMap::new() }
    }

    /// Fail fast when any required artifact is absent, then hash them all.
    fn require(&self, run: &mut StageRun, names: &[&str]) -> anyhow::Result<()> {
        for name in names {
            let path = self.artifact(name);
            if !path.is_file() {
                return Err(MissingArtifact { path, producer: producer(name) }.into());
            }
        }
        for name in names {
            run.inputs.push(FileDigest::of(&self.artifact(name), *name)?);
        }
        Ok(())
    }

    fn corpus_path(&self) -> (PathBuf, String) {
        match &self.config.corpus.path {
            Some(p) => (p.clone(), p.display().to_string()),
            None => (self.artifact(artifacts::CORPUS), artifacts::CORPUS.to_string()),
        }
    }

    fn require_corpus(&self, run: &mut StageRun) -> anyhow::Result<RecordSet> {
        let (path, display) = self.corpus_path();
        if !path.is_file() {
            let producer = if self.config.corpus.path.is_some() { "the [corpus] path setting" } else { "synth" };
            return Err(MissingArtifact { path, producer }.into());
        }
        run.inputs.push(FileDigest::of(&path, display)?);
        Ok(load_records(&path, RecordFormat::from_path(&path))?)
    }

    fn stopwords(&self, run: &mut StageRun) -> anyhow::Result<Stopwords> {
        match &self.config.corpus.stopwords {
            Some(p) => {
                run.inputs.push(FileDigest::of(p, p.display().to_string())?);
                Ok(Stopwords::load(p)?)
            }
            None => Ok(Stopwords::english()),
        }
    }

    fn finish(&self, run: StageRun) -> anyhow::Result<Manifest> {
        let elapsed_seconds = run.started.elapsed().as_secs_f64();
        let outputs = run
            .outputs
            .iter()
            .map(|name| FileDigest::of(&self.artifact(name), name.as_str()))
            .collect::<anyhow::Result<_>>()?;
        let manifest = Manifest {
            stage: run.stage.name().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.config.seed,
            config: self.config.clone(),
            inputs: run.inputs,
            outputs,
            elapsed_seconds,
            summary: run.summary,
        };
        manifest.save(&self.out_dir)?;
        Ok(manifest)
    }

    fn synth(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Synth);
        let records = generate_synthetic_corpus(&self.config.synth)?;
        records.save_jsonl(self.artifact(artifacts::CORPUS))?;
        run.summary.insert("n_records".into(), json!(records.len()));
        run.outputs.push(artifacts::CORPUS.into());
        self.finish(run)
    }

    fn tokenized(&self, run: &mut StageRun) -> anyhow::Result<Vec<narrembed::TokenizedDoc>> {
        let records = self.require_corpus(run)?;
        let stopwords = self.stopwords(run)?;
        Ok(tokenize_corpus_with(&records, &stopwords, self.config.corpus.ngram))
    }

    fn build_vocab(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::BuildVocab);
        let docs = self.tokenized(&mut run)?;
        let f = &self.config.features;
        let vocab = build_vocabulary(&docs, f.min_df, f.max_df_fraction)?;
        vocab.save(self.artifact(artifacts::VOCAB))?;
        run.summary.insert("n_terms".into(), json!(vocab.len()));
        run.summary.insert("n_docs".into(), json!(vocab.n_docs()));
        run.outputs.push(artifacts::VOCAB.into());
        self.finish(run)
    }

    fn featurize(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Featurize);
        self.require(&mut run, &[artifacts::VOCAB])?;
        let docs = self.tokenized(&mut run)?;
        let vocab = Vocabulary::load(self.artifact(artifacts::VOCAB))?;
        let counts = term_document_counts(&docs, &vocab);
        let weights = tfidf(&counts);
        counts.save(self.artifact(artifacts::COUNTS))?;
        weights.save(self.artifact(artifacts::TFIDF))?;
        let empty = (0..weights.n_docs()).filter(|&d| weights.row(d).next().is_none()).count();
        run.summary.insert("n_docs".into(), json!(weights.n_docs()));
        run.summary.insert("n_terms".into(), json!(weights.n_terms()));
        run.summary.insert("nnz".into(), json!(counts.nnz()));
        run.summary.insert("empty_docs".into(), json!(empty));
        run.outputs.extend([artifacts::COUNTS.into(), artifacts::TFIDF.into()]);
        self.finish(run)
    }

    fn train(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Train);
        self.require(&mut run, &[artifacts::TFIDF])?;
        let data = TfIdfMatrix::load(self.artifact(artifacts::TFIDF))?;
        let started = Instant::now();
        let out = train(&data, self.config.model.n_hidden, &self.config.train)?;
        let training_seconds = started.elapsed().as_secs_f64();
        out.model.save(self.artifact(artifacts::MODEL))?;
        save_loss_trace(self.artifact(artifacts::LOSS), &out.loss_trace)?;
        run.summary.insert("training_seconds".into(), json!(training_seconds));
        run.summary.insert("n_visible".into(), json!(out.model.n_visible()));
        run.summary.insert("n_hidden".into(), json!(out.model.n_hidden()));
        run.summary.insert("final_loss".into(), json!(out.loss_trace.last()));
        run.outputs.extend([artifacts::MODEL.into(), artifacts::LOSS.into()]);
        self.finish(run)
    }

    fn embed(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Embed);
        self.require(&mut run, &[artifacts::MODEL, artifacts::TFIDF])?;
        let model = GbrbmModel::load(self.artifact(artifacts::MODEL))?;
        let data = TfIdfMatrix::load(self.artifact(artifacts::TFIDF))?;
        let embedding = model.embed(&data)?;
        embedding.save_csv(self.artifact(artifacts::EMBEDDING))?;
        run.summary.insert("dim".into(), json!(embedding.dim()));
        run.outputs.push(artifacts::EMBEDDING.into());
        self.finish(run)
    }

    fn project(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Project);
        self.require(&mut run, &[artifacts::EMBEDDING])?;
        let records = self.require_corpus(&mut run)?;
        let embedding = EmbeddingMatrix::load_csv(self.artifact(artifacts::EMBEDDING))?;
        let affinities = embedding_affinities(&embedding, self.config.tsne.perplexity)?;
        let projection = project_with(&affinities, &self.config.tsne, self.config.seed)?;
        let series = records.series_by_id();
        projection.save_csv(self.artifact(artifacts::PROJECTION), |id| {
            series.get(id).copied().flatten().unwrap_or("background").to_string()
        })?;
        projection.save_kl_trace(self.artifact(artifacts::KL_TRACE))?;
        run.summary.insert("final_kl".into(), json!(projection.kl_trace.last()));
        run.outputs.extend([artifacts::PROJECTION.into(), artifacts::KL_TRACE.into()]);
        self.finish(run)
    }

    fn evaluate(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Evaluate);
        self.require(&mut run, &[artifacts::EMBEDDING, artifacts::COUNTS])?;
        let records = self.require_corpus(&mut run)?;
        let embedding = EmbeddingMatrix::load_csv(self.artifact(artifacts::EMBEDDING))?;
        let counts = CountMatrix::load(self.artifact(artifacts::COUNTS))?;
        let k = self.config.evaluate.k;

        let labels = labels_for(&records, &embedding.row_ids)?;
        let gbrbm = MetricReport::compute("gbrbm", embedding.values.view(), &embedding.row_ids, &labels, k)?;
        gbrbm.save(self.artifact(artifacts::METRICS))?;

        let fit = lda_fit(&counts, &self.config.evaluate.lda)?;
        let lda_labels = labels_for(&records, &fit.row_ids)?;
        let lda = MetricReport::compute("lda", fit.doc_topic.view(), &fit.row_ids, &lda_labels, k)?;
        lda.save(self.artifact(artifacts::LDA_METRICS))?;

        run.summary.insert("gbrbm_knn_purity".into(), json!(gbrbm.knn_purity));
        run.summary.insert("lda_knn_purity".into(), json!(lda.knn_purity));
        run.outputs.extend([artifacts::METRICS.into(), artifacts::LDA_METRICS.into()]);
        self.finish(run)
    }

    fn report(&self) -> anyhow::Result<Manifest> {
        let mut run = self.begin(Stage::Report);
        self.require(&mut run, &[artifacts::METRICS])?;
        let train_manifest = self.artifact(&Manifest::file_name(Stage::Train.name()));
        if !train_manifest.is_file() {
            return Err(MissingArtifact { path: train_manifest, producer: "train" }.into());
        }
        let gbrbm = MetricReport::load(self.artifact(artifacts::METRICS))?;
        let lda_path = self.artifact(artifacts::LDA_METRICS);
        let lda = if lda_path.is_file() {
            run.inputs.push(FileDigest::of(&lda_path, artifacts::LDA_METRICS)?);
            Some(MetricReport::load(&lda_path)?)
        } else {
            None
        };

        let mut stages = Vec::new();
        for stage in Stage::ALL.into_iter().filter(|&s| s != Stage::Report) {
            let path = self.artifact(&Manifest::file_name(stage.name()));
            if path.is_file() {
                let m = Manifest::load(&path)?;
                run.inputs.push(FileDigest::of(&path, Manifest::file_name(stage.name()))?);
                stages.push(StageSummary {
                    stage: m.stage,
                    elapsed_seconds: m.elapsed_seconds,
                    outputs: m.outputs,
                    summary: m.summary,
                });
            }
        }
        let train = stages.iter().find(|s| s.stage == Stage::Train.name()).expect("checked above");
        let training_seconds = train.summary.get("training_seconds").and_then(|v| v.as_f64()).unwrap_or(f64::NAN);
        let n_hidden = train.summary.get("n_hidden").and_then(|v| v.as_u64());
        let n_visible = train.summary.get("n_visible").and_then(|v| v.as_u64());

        let report = Report { seed: self.config.seed, n_visible, n_hidden, training_seconds, gbrbm, lda, stages };
        let path = self.artifact(artifacts::REPORT);
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        run.summary.insert("training_seconds".into(), json!(training_seconds));
        run.outputs.push(artifacts::REPORT.into());
        self.finish(run)
    }
}

/// Series label per row id, `None` for background records.
fn labels_for(records: &RecordSet, ids: &[String]) -> anyhow::Result<Vec<Option<String>>> {
    let series: HashMap<&str, Option<&str>> = records.series_by_id();
    ids.iter()
        .map(|id| match series.get(id.as_str()) {
            Some(s) => Ok(s.map(str::to_string)),
            None => bail!("record {id} is not in the corpus"),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: String,
    pub elapsed_seconds: f64,
    pub outputs: Vec<FileDigest>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

/// Aggregate of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub seed: u64,
    pub n_visible: Option<u64>,
    pub n_hidden: Option<u64>,
    pub training_seconds: f64,
    pub gbrbm: MetricReport,
    pub lda: Option<MetricReport>,
    pub stages: Vec<StageSummary>,
}

impl Report {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Plain-text table for the terminal.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let dims = match (self.n_visible, self.n_hidden) {
            (Some(m), Some(n)) => format!("{m} visible x {n} hidden"),
            _ => "unknown size".to_string(),
        };
        s.push_str(&format!("seed {}  model {}  training {:.1}s\n", self.seed, dims, self.training_seconds));
        s.push_str(&format!("{:<8} {:>5} {:>10} {:>10}\n", "method", "dim", "knn-purity", "silhouette"));
        for r in std::iter::once(&self.gbrbm).chain(self.lda.as_ref()) {
            s.push_str(&format!("{:<8} {:>5} {:>10.3} {:>10.3}\n", r.method, r.dim, r.knn_purity, r.silhouette));
        }
        for p in &self.gbrbm.per_series {
            s.push_str(&format!("  {:<12} n={:<3} purity {:.3}\n", p.series, p.size, p.purity));
        }
        for st in &self.stages {
            s.push_str(&format!("stage {:<12} {:>8.2}s\n", st.stage, st.elapsed_seconds));
        }
        s
    }
}
