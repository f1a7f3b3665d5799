//! Command-line pipeline driver: one subcommand per stage, file handoffs
//! between stages, a JSON manifest per stage.

pub mod config;
pub mod manifest;
pub mod pipeline;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use manifest::{FileDigest, Manifest};
pub use pipeline::{artifacts, Pipeline, Report, Stage};

/// Exit status for a stage that could not find an input artifact.
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
/// Exit status for an invalid or unreadable config.
pub const EXIT_CONFIG: i32 = 4;
/// Exit status for any other stage failure.
pub const EXIT_FAILURE: i32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingArtifact {
    pub path: PathBuf,
    pub producer: &'static str,
}

impl fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing artifact {} (produced by {})", self.path.display(), self.producer)
    }
}

impl std::error::Error for MissingArtifact {}

#[derive(Debug, Parser)]
#[command(name = "narrembed", version, about = "Embed incident narratives with a Gaussian-Bernoulli RBM")]
pub struct Cli {
    /// TOML pipeline config; defaults apply to anything left out.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's global seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory holding every artifact and manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with planted crime series.
    Synth,
    /// Build the pruned tri-gram vocabulary.
    BuildVocab,
    /// Write term counts and the TF-IDF matrix.
    Featurize,
    /// Train the GBRBM with CD-k.
    Train,
    /// Hidden activation probabilities for every document.
    Embed,
    /// 2-D t-SNE projection of the embedding.
    Project,
    /// kNN purity and silhouette for the embedding and the LDA baseline.
    Evaluate,
    /// Summarize manifests, metrics and training time.
    Report,
    /// Every stage in order.
    Run,
    /// Print the effective config as TOML.
    ShowConfig,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::BuildVocab => Stage::BuildVocab,
            Command::Featurize => Stage::Featurize,
            Command::Train => Stage::Train,
            Command::Embed => Stage::Embed,
            Command::Project => Stage::Project,
            Command::Evaluate => Stage::Evaluate,
            Command::Report => Stage::Report,
            Command::Run | Command::ShowConfig => return None,
        })
    }
}

/// Load the config named on the command line and apply `--seed`.
pub fn effective_config(cli: &Cli) -> Result<PipelineConfig, ConfigError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn print_manifest(m: &Manifest) {
    let outputs: Vec<&str> = m.outputs.iter().map(|o| o.path.as_str()).collect();
    println!("{:<12} {:>8.2}s  {}", m.stage, m.elapsed_seconds, outputs.join(" "));
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> anyhow::Result<()> {
    let config = effective_config(cli)?;
    let pipeline = Pipeline::new(config, &cli.out_dir)?;
    match cli.command {
        Command::ShowConfig => print!("{}", pipeline.config().to_toml()),
        Command::Run => {
            for m in pipeline.run_all()? {
                print_manifest(&m);
            }
        }
        cmd => {
            let stage = cmd.stage().expect("stage command");
            let m = pipeline.run_stage(stage)?;
            print_manifest(&m);
        }
    }
    if matches!(cli.command, Command::Report | Command::Run) {
        let report = Report::load(&pipeline.artifact(artifacts::REPORT))?;
        print!("{}", report.render());
    }
    Ok(())
}

/// Exit status for an error returned by [`execute`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<MissingArtifact>().is_some() {
        EXIT_MISSING_ARTIFACT
    } else if err.downcast_ref::<ConfigError>().is_some() {
        EXIT_CONFIG
    } else {
        EXIT_FAILURE
    }
}

/// Parse `args`, run, and return the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
